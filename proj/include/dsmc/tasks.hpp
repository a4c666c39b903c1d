#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dsmc/barriers.hpp"
#include "dsmc/dynamics.hpp"
#include "dsmc/solver.hpp"
#include "dsmc/topology.hpp"

namespace dsmc {

/// Quadratic stage and terminal cost weights plus the per-agent control cost
/// diagonal used inside the control-selection problem.
struct CostWeights {
  double w_p = 0.5;   ///< stage position weight
  double w_v = 0.1;   ///< stage speed weight
  double W_p = 8.0;   ///< terminal position weight
  double W_v = 0.5;   ///< terminal speed weight
  Eigen::Vector2d r_diag{1.0, 1.0};  ///< control cost diag [u_theta, u_v]
};

/// An obstacle that may drift along a fixed velocity; static when velocity is
/// zero.
struct ObstacleTrack {
  Obstacle base;
  Eigen::Vector2d velocity{0.0, 0.0};
};

/// Complete description of one benchmark scenario: geometry, costs, barrier
/// and noise parameters, solver profile, and layer options.
struct TaskSpec {
  std::string name = "swap";
  int n_agents = 4;
  int r = 3;  ///< neighbors per agent
  double agent_radius = 0.25;
  /// Actuator limits [curvature, accel], enforced as extra rows of each
  /// agent's control QP; a component <= 0 drops that pair of rows. Keeping
  /// the caps inside the projection means saturation stays consistent with
  /// the KKT system the backward pass differentiates.
  Eigen::Vector2d u_max{4.0, 3.0};
  std::vector<ObstacleTrack> obstacles;
  ExtraConstraints extras;
  BarrierParams barrier;
  NoiseModel noise;
  CostWeights cost;

  std::vector<AgentState> start;
  std::vector<Eigen::Vector2d> target;
  /// Intermediate targets used until phase_split of the horizon has elapsed
  /// (empty = single-phase task).
  std::vector<Eigen::Vector2d> target_phase1;
  double phase_split = 0.8;

  /// Per-agent noise stream keys; defaulting to the agent index makes a
  /// subteam reproduce the exact draws it would see in a larger team.
  std::vector<std::uint64_t> noise_keys;

  SolverSettings solver;
  bool constraint_grads = true;  ///< chase gradients through the row data

  int batch = 32;
  int train_iters = 2000;
  double learning_rate = 1e-3;
  /// Global-norm cap on the parameter gradient before the optimizer step;
  /// <= 0 disables. Keeps occasional exploding episodes from derailing the
  /// value iterate at aggressive learning rates.
  double grad_clip = 1e4;
  /// Cosine decay floor: the learning rate anneals from learning_rate to
  /// learning_rate * lr_min_frac over train_iters. 1 = constant rate.
  double lr_min_frac = 0.1;
  int hidden = 64;
  int hidden_layers = 2;

  std::uint64_t noise_key(int agent) const {
    return noise_keys.empty() ? static_cast<std::uint64_t>(agent)
                              : noise_keys.at(agent);
  }
};

/// Obstacle positions at a step (moving tracks evaluated at step * dt).
std::vector<Obstacle> obstacles_at(const TaskSpec& task, int step);

/// Target of one agent at a step, honoring the phase switch.
Eigen::Vector2d target_at(const TaskSpec& task, int agent, int step);

double running_cost(const TaskSpec& task, const AgentState& s, int agent,
                    int step);
Eigen::Vector4d running_cost_grad(const TaskSpec& task, const AgentState& s,
                                  int agent, int step);
double terminal_cost(const TaskSpec& task, const AgentState& s, int agent);
Eigen::Vector4d terminal_cost_grad(const TaskSpec& task, const AgentState& s,
                                   int agent);

/// Built-in scenarios: swap, swap_asym, bottleneck, moving_obstacle,
/// formation. n_agents <= 0 keeps each scenario's default team size.
/// Throws ConfigError for unknown names or unusable team sizes.
TaskSpec make_task(const std::string& name, int n_agents = -1);

/// JSON round-trip of the full TaskSpec; parsing starts from make_task
/// defaults for the named task, so a config file only needs the overrides.
std::string task_to_json(const TaskSpec& task);
TaskSpec task_from_json(const std::string& text);
TaskSpec load_task_file(const std::string& path);

}  // namespace dsmc
