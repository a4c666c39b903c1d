#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dsmc {

/// Unicycle agent: position (x, y), heading theta, forward speed v.
/// Controls are u = [u_theta, u_v]; heading rate is v * u_theta, so the
/// heading channel loses authority as the agent slows to rest.
struct AgentState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;

  Eigen::Vector4d vec() const { return {x, y, theta, v}; }
  static AgentState from_vec(const Eigen::Vector4d& s) {
    return {s[0], s[1], s[2], s[3]};
  }
};

constexpr int kStateDim = 2;  // controls per agent
constexpr int kAgentDim = 4;  // state entries per agent

struct ControlInput {
  double u_theta = 0.0;
  double u_v = 0.0;

  Eigen::Vector2d vec() const { return {u_theta, u_v}; }
  static ControlInput from_vec(const Eigen::Vector2d& u) { return {u[0], u[1]}; }
};

/// Joint state of the team at one time index.
struct GlobalState {
  std::vector<AgentState> agents;
  int time_index = 0;

  int size() const { return static_cast<int>(agents.size()); }
};

/// Diffusion and discretization parameters shared by simulator and barriers.
/// sigma enters only the heading and speed channels, matching the actuated
/// subspace, so the noise never teleports positions directly.
struct NoiseModel {
  double sigma = 0.1;       ///< diffusion scale on theta and v
  double dt = 0.05;         ///< Euler-Maruyama step [s]
  int horizon_steps = 100;  ///< steps per episode
};

/// Drift f_i(x_i): position advances along the heading, theta and v have no
/// drift of their own.
Eigen::Vector4d drift(const AgentState& s);

/// Actuation matrix G_i(x_i) mapping [u_theta, u_v] into the state ODE.
Eigen::Matrix<double, 4, 2> actuation(const AgentState& s);

/// Jacobian of f(x) + G(x) u with respect to the state, controls held fixed.
/// One Euler step is then x' = x + dt (f + G u) + noise, with state
/// sensitivity I + dt * J.
Eigen::Matrix4d drift_control_jacobian(const AgentState& s,
                                       const ControlInput& u);

/// One Euler-Maruyama step for the whole team:
///   x' = x + (f + G u) dt + Sigma sqrt(dt) eps,
/// eps holding one standard-normal pair (theta, v channel) per agent.
/// Throws std::invalid_argument on size mismatch or non-finite input.
GlobalState em_step(const GlobalState& g, const std::vector<ControlInput>& u,
                    const std::vector<Eigen::Vector2d>& noise,
                    const NoiseModel& model);

/// Batched stepping: instances are independent; entry b uses u[b]/noise[b].
std::vector<GlobalState> em_step_batch(
    const std::vector<GlobalState>& batch,
    const std::vector<std::vector<ControlInput>>& u,
    const std::vector<std::vector<Eigen::Vector2d>>& noise,
    const NoiseModel& model);

}  // namespace dsmc
