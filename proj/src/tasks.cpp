#include "dsmc/tasks.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "dsmc/errors.hpp"

namespace dsmc {

namespace {

using nlohmann::json;

AgentState facing(double x, double y, double tx, double ty) {
  AgentState s;
  s.x = x;
  s.y = y;
  s.theta = std::atan2(ty - y, tx - x);
  s.v = 0.0;
  return s;
}

void validate(const TaskSpec& t) {
  const int n = t.n_agents;
  if (n < 1) throw ConfigError("task needs at least one agent");
  if (t.r < 0 || t.r >= n)
    throw ConfigError("neighbor count r must satisfy 0 <= r < n_agents");
  if ((int)t.start.size() != n || (int)t.target.size() != n)
    throw ConfigError("start/target lists must have one entry per agent");
  if (!t.target_phase1.empty() && (int)t.target_phase1.size() != n)
    throw ConfigError("target_phase1 must be empty or one entry per agent");
  if (t.phase_split < 0.0 || t.phase_split > 1.0)
    throw ConfigError("phase_split must lie in [0, 1]");
  if (!t.noise_keys.empty() && (int)t.noise_keys.size() != n)
    throw ConfigError("noise_keys must be empty or one entry per agent");
  if (t.noise.horizon_steps < 1 || t.noise.dt <= 0.0)
    throw ConfigError("horizon_steps must be >= 1 and dt > 0");
  if (t.batch < 1) throw ConfigError("batch must be >= 1");
}

}  // namespace

std::vector<Obstacle> obstacles_at(const TaskSpec& task, int step) {
  std::vector<Obstacle> out;
  out.reserve(task.obstacles.size());
  const double t = step * task.noise.dt;
  for (const auto& track : task.obstacles) {
    Obstacle o = track.base;
    o.x += track.velocity.x() * t;
    o.y += track.velocity.y() * t;
    out.push_back(o);
  }
  return out;
}

Eigen::Vector2d target_at(const TaskSpec& task, int agent, int step) {
  if (!task.target_phase1.empty()) {
    const int boundary =
        (int)std::floor(task.phase_split * task.noise.horizon_steps);
    if (step < boundary) return task.target_phase1.at(agent);
  }
  return task.target.at(agent);
}

double running_cost(const TaskSpec& task, const AgentState& s, int agent,
                    int step) {
  const Eigen::Vector2d tgt = target_at(task, agent, step);
  const double dx = s.x - tgt.x();
  const double dy = s.y - tgt.y();
  return task.cost.w_p * (dx * dx + dy * dy) + task.cost.w_v * s.v * s.v;
}

Eigen::Vector4d running_cost_grad(const TaskSpec& task, const AgentState& s,
                                  int agent, int step) {
  const Eigen::Vector2d tgt = target_at(task, agent, step);
  Eigen::Vector4d g;
  g << 2.0 * task.cost.w_p * (s.x - tgt.x()),
      2.0 * task.cost.w_p * (s.y - tgt.y()), 0.0,
      2.0 * task.cost.w_v * s.v;
  return g;
}

double terminal_cost(const TaskSpec& task, const AgentState& s, int agent) {
  const Eigen::Vector2d tgt = task.target.at(agent);
  const double dx = s.x - tgt.x();
  const double dy = s.y - tgt.y();
  return task.cost.W_p * (dx * dx + dy * dy) + task.cost.W_v * s.v * s.v;
}

Eigen::Vector4d terminal_cost_grad(const TaskSpec& task, const AgentState& s,
                                   int agent) {
  const Eigen::Vector2d tgt = task.target.at(agent);
  Eigen::Vector4d g;
  g << 2.0 * task.cost.W_p * (s.x - tgt.x()),
      2.0 * task.cost.W_p * (s.y - tgt.y()), 0.0,
      2.0 * task.cost.W_v * s.v;
  return g;
}

TaskSpec make_task(const std::string& name, int n_agents) {
  TaskSpec t;
  t.name = name;
  // Training profile: few splitting iterations per step, warm-started from
  // the previous step. Verification runs override these (tight eps, high
  // iteration caps) instead of the other way around.
  t.solver.max_iters = 15;
  t.extras.neighbor_obstacle = true;
  t.extras.neighbor_neighbor = true;

  const double circle = 2.0;

  if (name == "swap" || name == "swap_asym" || name == "moving_obstacle") {
    const int n = n_agents > 0 ? n_agents : 4;
    t.n_agents = n;
    t.r = std::min(3, n - 1);
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * M_PI * i / n;
      const double x = circle * std::cos(a);
      const double y = circle * std::sin(a);
      t.target.emplace_back(-x, -y);
      t.start.push_back(facing(x, y, -x, -y));
    }
    if (name == "swap") {
      t.obstacles.push_back({{0.0, 0.0, 0.4}, {0.0, 0.0}});
    } else if (name == "swap_asym") {
      t.obstacles.push_back({{0.0, 0.0, 0.4}, {0.0, 0.0}});
      t.obstacles.push_back({{1.0, 0.7, 0.3}, {0.0, 0.0}});
      t.obstacles.push_back({{-0.9, -0.8, 0.25}, {0.0, 0.0}});
    } else {
      // Crosses the arena bottom-to-top over the full horizon.
      const double span = 2.0 * circle;
      const double speed = span / (t.noise.horizon_steps * t.noise.dt);
      t.obstacles.push_back({{0.0, -circle, 0.4}, {0.0, speed}});
    }
  } else if (name == "bottleneck") {
    const int n = n_agents > 0 ? n_agents : 8;
    if (n < 2 || n % 2 != 0)
      throw ConfigError("bottleneck needs an even number of agents >= 2");
    t.n_agents = n;
    t.r = std::min(3, n - 1);
    // Wall on the y-axis with a gap at the origin; columns swap sides.
    t.obstacles.push_back({{0.0, 1.1, 0.6}, {0.0, 0.0}});
    t.obstacles.push_back({{0.0, -1.1, 0.6}, {0.0, 0.0}});
    t.obstacles.push_back({{0.0, 2.3, 0.6}, {0.0, 0.0}});
    t.obstacles.push_back({{0.0, -2.3, 0.6}, {0.0, 0.0}});
    const int half = n / 2;
    for (int side = 0; side < 2; ++side) {
      const double x0 = side == 0 ? -2.5 : 2.5;
      for (int k = 0; k < half; ++k) {
        const double y0 = half == 1 ? 0.0 : -1.5 + 3.0 * k / (half - 1);
        t.start.push_back(facing(x0, y0, -x0, y0));
        t.target.emplace_back(-x0, y0);
        // Head for the x-axis point just past the gap first, then fan out.
        t.target_phase1.emplace_back(side == 0 ? 0.75 : -0.75, 0.0);
      }
    }
    t.phase_split = 0.8;
  } else if (name == "formation") {
    const int n = n_agents > 0 ? n_agents : 8;
    t.n_agents = n;
    t.r = std::min(3, n - 1);
    t.obstacles.push_back({{0.0, 1.2, 0.3}, {0.0, 0.0}});
    t.obstacles.push_back({{0.0, -1.2, 0.3}, {0.0, 0.0}});
    // Rectangular grid of targets, two rows, centered at the origin.
    const int cols = (n + 1) / 2;
    for (int i = 0; i < n; ++i) {
      const int row = i / cols;
      const int col = i % cols;
      const double tx = cols == 1 ? 0.0 : -1.5 + 3.0 * col / (cols - 1);
      const double ty = n == 1 ? 0.0 : (row == 0 ? 0.6 : -0.6);
      t.target.emplace_back(tx, ty);
      const double a = 2.0 * M_PI * i / n;
      const double x = circle * std::cos(a);
      const double y = circle * std::sin(a);
      t.start.push_back(facing(x, y, tx, ty));
    }
  } else {
    throw ConfigError("unknown task '" + name +
                      "' (expected swap, swap_asym, bottleneck, "
                      "moving_obstacle, or formation)");
  }

  validate(t);
  return t;
}

namespace {

json vec2_to_json(const Eigen::Vector2d& v) { return json{v.x(), v.y()}; }

Eigen::Vector2d vec2_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

std::string task_to_json(const TaskSpec& t) {
  json j;
  j["name"] = t.name;
  j["n_agents"] = t.n_agents;
  j["r"] = t.r;
  j["agent_radius"] = t.agent_radius;
  j["u_max"] = {t.u_max.x(), t.u_max.y()};
  json obs = json::array();
  for (const auto& o : t.obstacles) {
    obs.push_back({{"x", o.base.x},
                   {"y", o.base.y},
                   {"radius", o.base.radius},
                   {"vx", o.velocity.x()},
                   {"vy", o.velocity.y()}});
  }
  j["obstacles"] = obs;
  j["extras"] = {{"neighbor_obstacle", t.extras.neighbor_obstacle},
                 {"neighbor_neighbor", t.extras.neighbor_neighbor}};
  j["barrier"] = {{"gamma", t.barrier.gamma},
                  {"alpha", t.barrier.alpha},
                  {"beta", t.barrier.beta},
                  {"mu_b", t.barrier.mu_b},
                  {"normalize_ip", t.barrier.normalize_ip}};
  j["noise"] = {{"sigma", t.noise.sigma},
                {"dt", t.noise.dt},
                {"horizon_steps", t.noise.horizon_steps}};
  j["cost"] = {{"w_p", t.cost.w_p},
               {"w_v", t.cost.w_v},
               {"W_p", t.cost.W_p},
               {"W_v", t.cost.W_v},
               {"r_diag", {t.cost.r_diag.x(), t.cost.r_diag.y()}}};
  json starts = json::array();
  for (const auto& s : t.start) starts.push_back({s.x, s.y, s.theta, s.v});
  j["start"] = starts;
  json targets = json::array();
  for (const auto& p : t.target) targets.push_back(vec2_to_json(p));
  j["target"] = targets;
  json phase1 = json::array();
  for (const auto& p : t.target_phase1) phase1.push_back(vec2_to_json(p));
  j["target_phase1"] = phase1;
  j["phase_split"] = t.phase_split;
  j["noise_keys"] = t.noise_keys;
  j["solver"] = {{"rho0", t.solver.rho0},
                 {"mu0", t.solver.mu0},
                 {"eps_abs", t.solver.eps_abs},
                 {"eps_rel", t.solver.eps_rel},
                 {"max_iters", t.solver.max_iters},
                 {"adapt_interval", t.solver.adapt_interval},
                 {"penalty_min", t.solver.penalty_min},
                 {"penalty_max", t.solver.penalty_max},
                 {"refactor_ratio", t.solver.refactor_ratio}};
  j["constraint_grads"] = t.constraint_grads;
  j["batch"] = t.batch;
  j["train_iters"] = t.train_iters;
  j["learning_rate"] = t.learning_rate;
  j["grad_clip"] = t.grad_clip;
  j["lr_min_frac"] = t.lr_min_frac;
  j["hidden"] = t.hidden;
  j["hidden_layers"] = t.hidden_layers;
  return j.dump(2) + "\n";
}

TaskSpec task_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    const std::string name = j.value("name", std::string("swap"));
    const int n = j.value("n_agents", -1);
    TaskSpec t = make_task(name, n);
    if (j.contains("r")) t.r = j["r"].get<int>();
    if (j.contains("agent_radius"))
      t.agent_radius = j["agent_radius"].get<double>();
    if (j.contains("u_max")) {
      t.u_max.x() = j["u_max"].at(0).get<double>();
      t.u_max.y() = j["u_max"].at(1).get<double>();
    }
    if (j.contains("obstacles")) {
      t.obstacles.clear();
      for (const auto& o : j["obstacles"]) {
        ObstacleTrack track;
        track.base.x = o.at("x").get<double>();
        track.base.y = o.at("y").get<double>();
        track.base.radius = o.at("radius").get<double>();
        track.velocity.x() = o.value("vx", 0.0);
        track.velocity.y() = o.value("vy", 0.0);
        t.obstacles.push_back(track);
      }
    }
    if (j.contains("extras")) {
      const auto& e = j["extras"];
      t.extras.neighbor_obstacle =
          e.value("neighbor_obstacle", t.extras.neighbor_obstacle);
      t.extras.neighbor_neighbor =
          e.value("neighbor_neighbor", t.extras.neighbor_neighbor);
    }
    if (j.contains("barrier")) {
      const auto& b = j["barrier"];
      t.barrier.gamma = b.value("gamma", t.barrier.gamma);
      t.barrier.alpha = b.value("alpha", t.barrier.alpha);
      t.barrier.beta = b.value("beta", t.barrier.beta);
      t.barrier.mu_b = b.value("mu_b", t.barrier.mu_b);
      t.barrier.normalize_ip = b.value("normalize_ip", t.barrier.normalize_ip);
    }
    if (j.contains("noise")) {
      const auto& nj = j["noise"];
      t.noise.sigma = nj.value("sigma", t.noise.sigma);
      t.noise.dt = nj.value("dt", t.noise.dt);
      t.noise.horizon_steps = nj.value("horizon_steps", t.noise.horizon_steps);
    }
    if (j.contains("cost")) {
      const auto& c = j["cost"];
      t.cost.w_p = c.value("w_p", t.cost.w_p);
      t.cost.w_v = c.value("w_v", t.cost.w_v);
      t.cost.W_p = c.value("W_p", t.cost.W_p);
      t.cost.W_v = c.value("W_v", t.cost.W_v);
      if (c.contains("r_diag")) {
        t.cost.r_diag.x() = c["r_diag"].at(0).get<double>();
        t.cost.r_diag.y() = c["r_diag"].at(1).get<double>();
      }
    }
    if (j.contains("start")) {
      t.start.clear();
      for (const auto& s : j["start"]) {
        AgentState a;
        a.x = s.at(0).get<double>();
        a.y = s.at(1).get<double>();
        a.theta = s.at(2).get<double>();
        a.v = s.at(3).get<double>();
        t.start.push_back(a);
      }
      t.n_agents = (int)t.start.size();
    }
    if (j.contains("target")) {
      t.target.clear();
      for (const auto& p : j["target"]) t.target.push_back(vec2_from_json(p));
    }
    if (j.contains("target_phase1")) {
      t.target_phase1.clear();
      for (const auto& p : j["target_phase1"])
        t.target_phase1.push_back(vec2_from_json(p));
    }
    if (j.contains("phase_split"))
      t.phase_split = j["phase_split"].get<double>();
    if (j.contains("noise_keys"))
      t.noise_keys = j["noise_keys"].get<std::vector<std::uint64_t>>();
    if (j.contains("solver")) {
      const auto& s = j["solver"];
      t.solver.rho0 = s.value("rho0", t.solver.rho0);
      t.solver.mu0 = s.value("mu0", t.solver.mu0);
      t.solver.eps_abs = s.value("eps_abs", t.solver.eps_abs);
      t.solver.eps_rel = s.value("eps_rel", t.solver.eps_rel);
      t.solver.max_iters = s.value("max_iters", t.solver.max_iters);
      t.solver.adapt_interval =
          s.value("adapt_interval", t.solver.adapt_interval);
      t.solver.penalty_min = s.value("penalty_min", t.solver.penalty_min);
      t.solver.penalty_max = s.value("penalty_max", t.solver.penalty_max);
      t.solver.refactor_ratio =
          s.value("refactor_ratio", t.solver.refactor_ratio);
    }
    if (j.contains("constraint_grads"))
      t.constraint_grads = j["constraint_grads"].get<bool>();
    if (j.contains("batch")) t.batch = j["batch"].get<int>();
    if (j.contains("train_iters")) t.train_iters = j["train_iters"].get<int>();
    if (j.contains("learning_rate"))
      t.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("grad_clip")) t.grad_clip = j["grad_clip"].get<double>();
    if (j.contains("lr_min_frac"))
      t.lr_min_frac = j["lr_min_frac"].get<double>();
    if (j.contains("hidden")) t.hidden = j["hidden"].get<int>();
    if (j.contains("hidden_layers"))
      t.hidden_layers = j["hidden_layers"].get<int>();
    validate(t);
    return t;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  }
}

TaskSpec load_task_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return task_from_json(ss.str());
}

}  // namespace dsmc
