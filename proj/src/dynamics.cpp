#include "dsmc/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dsmc {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("dynamics: " + msg);
}

bool finite(const AgentState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.theta) &&
         std::isfinite(s.v);
}

}  // namespace

Eigen::Vector4d drift(const AgentState& s) {
  return {s.v * std::cos(s.theta), s.v * std::sin(s.theta), 0.0, 0.0};
}

Eigen::Matrix<double, 4, 2> actuation(const AgentState& s) {
  Eigen::Matrix<double, 4, 2> G = Eigen::Matrix<double, 4, 2>::Zero();
  G(2, 0) = s.v;
  G(3, 1) = 1.0;
  return G;
}

Eigen::Matrix4d drift_control_jacobian(const AgentState& s,
                                       const ControlInput& u) {
  Eigen::Matrix4d J = Eigen::Matrix4d::Zero();
  J(0, 2) = -s.v * std::sin(s.theta);
  J(0, 3) = std::cos(s.theta);
  J(1, 2) = s.v * std::cos(s.theta);
  J(1, 3) = std::sin(s.theta);
  J(2, 3) = u.u_theta;
  return J;
}

GlobalState em_step(const GlobalState& g, const std::vector<ControlInput>& u,
                    const std::vector<Eigen::Vector2d>& noise,
                    const NoiseModel& model) {
  const std::size_t n = g.agents.size();
  require(u.size() == n, "control count " + std::to_string(u.size()) +
                             " != agent count " + std::to_string(n));
  require(noise.size() == n, "noise count " + std::to_string(noise.size()) +
                                 " != agent count " + std::to_string(n));
  require(model.dt > 0.0, "dt must be positive");

  const double root_dt = std::sqrt(model.dt);
  GlobalState out;
  out.agents.resize(n);
  out.time_index = g.time_index + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const AgentState& s = g.agents[i];
    require(finite(s), "non-finite state for agent " + std::to_string(i));
    require(std::isfinite(u[i].u_theta) && std::isfinite(u[i].u_v),
            "non-finite control for agent " + std::to_string(i));
    require(noise[i].allFinite(),
            "non-finite noise for agent " + std::to_string(i));

    AgentState& o = out.agents[i];
    o.x = s.x + s.v * std::cos(s.theta) * model.dt;
    o.y = s.y + s.v * std::sin(s.theta) * model.dt;
    o.theta = s.theta + s.v * u[i].u_theta * model.dt +
              model.sigma * root_dt * noise[i][0];
    o.v = s.v + u[i].u_v * model.dt + model.sigma * root_dt * noise[i][1];
  }
  return out;
}

std::vector<GlobalState> em_step_batch(
    const std::vector<GlobalState>& batch,
    const std::vector<std::vector<ControlInput>>& u,
    const std::vector<std::vector<Eigen::Vector2d>>& noise,
    const NoiseModel& model) {
  require(u.size() == batch.size() && noise.size() == batch.size(),
          "batch size mismatch");
  std::vector<GlobalState> out;
  out.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b)
    out.push_back(em_step(batch[b], u[b], noise[b], model));
  return out;
}

}  // namespace dsmc
