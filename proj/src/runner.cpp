#include "dsmc/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dsmc/errors.hpp"
#include "dsmc/instances.hpp"
#include "dsmc/learner.hpp"
#include "dsmc/metrics.hpp"
#include "dsmc/oracle.hpp"
#include "dsmc/rng.hpp"

#include <json.hpp>

namespace dsmc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

TaskSpec resolve_task(const RunOptions& opt) {
  if (!opt.config.empty()) return load_task_file(opt.config);
  return make_task(opt.task_name);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " +
                            ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // LF line ends everywhere
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  return out;
}

ValueModel model_for(const TaskSpec& task, const RunOptions& opt) {
  if (!opt.checkpoint.empty()) {
    ValueModel m = ValueModel::load(opt.checkpoint);
    if (m.r != task.r)
      throw ConfigError("checkpoint was trained for r=" + std::to_string(m.r) +
                        " but the task uses r=" + std::to_string(task.r));
    return m;
  }
  ValueModel m;
  m.r = task.r;
  m.hidden = task.hidden;
  m.hidden_layers = task.hidden_layers;
  m.init(mix64(opt.seed, 0x6d6f64656cULL));
  return m;
}

}  // namespace

void run_train(const RunOptions& opt) {
  TaskSpec task = resolve_task(opt);
  if (opt.max_iters > 0) task.train_iters = opt.max_iters;
  ensure_dir(opt.out_dir);

  ValueModel model = model_for(task, opt);
  Adam adam;
  adam.lr = task.learning_rate;
  Eigen::VectorXd params = model.flat_params();

  std::ofstream csv = open_out(opt.out_dir + "/metrics.csv");
  csv << metrics_header();
  {
    std::ofstream cfg = open_out(opt.out_dir + "/config_resolved.json");
    cfg << task_to_json(task);
  }

  const auto t0 = std::chrono::steady_clock::now();
  for (int it = 0; it < task.train_iters; ++it) {
    const std::uint64_t batch_seed = mix64(opt.seed, 0xb417c8ULL, it);
    std::vector<Rollout> batch;
    batch.reserve(task.batch);
    for (int b = 0; b < task.batch; ++b)
      batch.push_back(rollout(model, task, batch_seed, b, true));

    const double loss = terminal_loss(batch);
    if (!std::isfinite(loss))
      throw NumericalError("training diverged: non-finite loss at iteration " +
                           std::to_string(it));
    const MetricsRecord rec = violation_metrics(batch, task, it, loss);
    BackwardResult bw = backward(batch, model, task);
    if (task.grad_clip > 0.0) {
      const double norm = bw.grad.norm();
      if (norm > task.grad_clip) bw.grad *= task.grad_clip / norm;
    }
    // Cosine annealing: large steps while the value surface is being shaped,
    // small ones once the policy feeds back into its own targets.
    const double frac = task.train_iters > 1
                            ? double(it) / double(task.train_iters - 1)
                            : 0.0;
    const double lo = task.learning_rate * task.lr_min_frac;
    adam.lr = lo + (task.learning_rate - lo) * 0.5 *
                       (1.0 + std::cos(M_PI * frac));
    adam.step(params, bw.grad);
    model.set_flat_params(params);

    csv << metrics_row(rec);
    if (it % 100 == 0 || it + 1 == task.train_iters) {
      const double secs = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
      std::printf(
          "iter %5d  loss %.4g  dist %.3f  frac_hpos %.3f  admm %.1f  %.0fs\n",
          it, loss, rec.mean_terminal_dist, rec.frac_hpos_violation,
          rec.mean_admm_iters, secs);
      std::fflush(stdout);
    }
  }
  model.save(opt.out_dir + "/checkpoint.json");
}

void run_eval(const RunOptions& opt) {
  TaskSpec task = resolve_task(opt);
  ensure_dir(opt.out_dir);
  ValueModel model = model_for(task, opt);

  std::vector<Rollout> batch;
  batch.reserve(task.batch);
  std::vector<std::vector<TraceRow>> traces;
  for (int b = 0; b < task.batch; ++b)
    batch.push_back(
        rollout(model, task, opt.seed, b, false, b == 0 ? &traces : nullptr));

  const double loss = terminal_loss(batch);
  {
    std::ofstream csv = open_out(opt.out_dir + "/metrics.csv");
    csv << metrics_header();
    csv << metrics_row(violation_metrics(batch, task, 0, loss));
  }
  {
    std::ofstream trace = open_out(opt.out_dir + "/solver_trace.csv");
    trace << "step,iter,r_pri1,r_pri2,r_dual1,r_dual2,rho,mu\n";
    for (int step = 0; step < (int)traces.size(); ++step) {
      for (const TraceRow& row : traces[step]) {
        trace << step << ',' << row.iter;
        for (double v : {row.r_pri1, row.r_pri2, row.r_dual1, row.r_dual2,
                         row.rho, row.mu})
          trace << ',' << format_full(v);
        trace << '\n';
      }
    }
  }

  json out;
  out["task"] = task.name;
  out["dt"] = task.noise.dt;
  out["horizon_steps"] = task.noise.horizon_steps;
  out["n_agents"] = task.n_agents;
  out["agent_radius"] = task.agent_radius;
  json instances = json::array();
  for (const Rollout& ro : batch) {
    json steps = json::array();
    for (int tau = 0; tau < (int)ro.steps.size(); ++tau) {
      const StepRecord& rec = ro.steps[tau];
      json agents = json::array();
      for (int i = 0; i < (int)rec.state.agents.size(); ++i) {
        const AgentState& s = rec.state.agents[i];
        agents.push_back({s.x, s.y, s.theta, s.v, rec.ustar[2 * i],
                          rec.ustar[2 * i + 1]});
      }
      json obstacles = json::array();
      for (const Obstacle& o : obstacles_at(task, tau))
        obstacles.push_back({o.x, o.y, o.radius});
      steps.push_back({{"agents", agents}, {"obstacles", obstacles}});
    }
    json terminal = json::array();
    for (const AgentState& s : ro.terminal.agents)
      terminal.push_back({s.x, s.y, s.theta, s.v});
    instances.push_back({{"steps", steps},
                         {"terminal", terminal},
                         {"value_estimate", ro.v0},
                         {"value_terminal", ro.v_terminal},
                         {"min_h", ro.min_h},
                         {"min_h_pos", ro.min_h_pos}});
  }
  out["instances"] = instances;
  std::ofstream traj = open_out(opt.out_dir + "/trajectories.json");
  traj << out.dump(2) << '\n';
}

void run_solvecheck(const RunOptions& opt) {
  const int count = opt.max_iters > 0 ? opt.max_iters : 200;
  RandomStream rs(mix64(opt.seed, 0x50c7eULL));

  SolverSettings settings;
  settings.eps_abs = 1e-5;
  settings.eps_rel = 1e-5;
  settings.max_iters = 4000;

  double worst = 0.0;
  int solved = 0;
  for (int k = 0; k < count; ++k) {
    InstanceOptions io;
    io.n_agents = rs.uniform_int(2, 5);
    io.r = rs.uniform_int(1, io.n_agents - 1);
    io.n_obstacles = rs.uniform_int(0, 2);
    TeamInstance inst = make_random_team_instance(rs, io);

    SolveResult res = solve_decentralized(inst.qps, settings);
    OracleResult ref = solve_centralized_oracle(
        inst.stacked.C_distinct, inst.stacked.d_distinct, inst.R, inst.p);
    if (!ref.feasible)
      throw NumericalError("reference solver failed on a generated instance");

    Eigen::VectorXd u(kStateDim * io.n_agents);
    for (int i = 0; i < io.n_agents; ++i)
      u.segment<2>(2 * i) = res.controls[i];
    const double err = (u - ref.u).lpNorm<Eigen::Infinity>();
    worst = std::max(worst, err);
    if (err <= 1e-3) ++solved;
  }
  std::printf("solve-check: %d/%d instances within 1e-3, worst error %.3g\n",
              solved, count, worst);
  if (solved != count)
    throw NumericalError("decentralized/reference mismatch above 1e-3");
}

void run_gradcheck(const RunOptions& opt) {
  TaskSpec task;
  if (!opt.config.empty()) {
    task = load_task_file(opt.config);
  } else {
    task = make_task("swap", 2);
    task.noise.horizon_steps = 3;
    task.batch = 2;
  }
  // The probe needs an accurately solved layer, not a fast one.
  task.solver.eps_abs = 1e-10;
  task.solver.eps_rel = 1e-10;
  task.solver.max_iters = 5000;

  ValueModel model;
  model.r = task.r;
  model.hidden = 8;
  model.hidden_layers = task.hidden_layers;
  model.init(mix64(opt.seed, 0x9c6dULL));
  Eigen::VectorXd params = model.flat_params();

  const auto batch_loss = [&](const ValueModel& m) {
    std::vector<Rollout> batch;
    for (int b = 0; b < task.batch; ++b)
      batch.push_back(rollout(m, task, opt.seed, b, false));
    return terminal_loss(batch);
  };

  std::vector<Rollout> batch;
  for (int b = 0; b < task.batch; ++b)
    batch.push_back(rollout(model, task, opt.seed, b, true));
  const BackwardResult bw = backward(batch, model, task);

  RandomStream pick(mix64(opt.seed, 0x91cbULL));
  const double step = 1e-5;
  double worst = 0.0;
  for (int probe = 0; probe < 5; ++probe) {
    const int k = pick.uniform_int(0, (int)params.size() - 1);
    ValueModel m = model;
    Eigen::VectorXd theta = params;
    theta[k] = params[k] + step;
    m.set_flat_params(theta);
    const double up = batch_loss(m);
    theta[k] = params[k] - step;
    m.set_flat_params(theta);
    const double down = batch_loss(m);
    const double fd = (up - down) / (2.0 * step);
    const double scale = std::max({std::abs(fd), std::abs(bw.grad[k]), 1e-6});
    const double rel = std::abs(fd - bw.grad[k]) / scale;
    worst = std::max(worst, rel);
    std::printf("grad-check: param %5d  analytic %.6g  fd %.6g  rel %.2g\n", k,
                bw.grad[k], fd, rel);
  }
  if (worst > 1e-2)
    throw NumericalError("analytic gradient disagrees with finite differences");
  std::printf("grad-check: worst relative error %.2g (gate 1e-2)\n", worst);
}

void run_bench(const RunOptions& opt) {
  (void)opt;
  std::printf("per-agent problem size versus team size (r=3, 1 obstacle, "
              "extras on)\n");
  std::printf("%6s %12s %10s %10s %14s\n", "N", "rows/agent", "width",
              "kkt dim", "centralized");
  int rows0 = -1;
  for (int n : {4, 8, 16, 32}) {
    TaskSpec task = make_task("swap", n);
    GlobalState g;
    g.agents = task.start;
    const auto nbhds = build_neighborhoods(g, task.r);
    const auto obstacles = obstacles_at(task, 0);
    const LocalConstraints lc =
        assemble_local(nbhds[0], g, obstacles, task.noise, task.barrier,
                       task.agent_radius, task.extras);
    const int width = kStateDim * (int)lc.columns.size();
    const int rows = (int)lc.A.rows();
    if (rows0 < 0) rows0 = rows;
    std::printf("%6d %12d %10d %10d %14ld\n", n, rows, width, width + rows,
                centralized_count(n, (int)task.obstacles.size()));
    if (rows != rows0)
      throw NumericalError("per-agent row count changed with team size");
  }

  TaskSpec task = make_task("swap", 8);
  ValueModel model = model_for(task, opt);
  const auto t0 = std::chrono::steady_clock::now();
  Rollout ro = rollout(model, task, opt.seed, 0, false);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::printf("one 8-agent episode (%d steps): %.3f s, %.1f splitting "
              "iterations per step\n",
              (int)ro.steps.size(), secs,
              (double)ro.admm_iter_total / (double)ro.steps.size());
}

}  // namespace dsmc
