#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dsmc/diffqp.hpp"
#include "dsmc/dynamics.hpp"
#include "dsmc/solver.hpp"
#include "dsmc/tasks.hpp"
#include "dsmc/topology.hpp"
#include "dsmc/value_model.hpp"

namespace dsmc {

/// Linear control term of the per-agent Hamiltonian: p_i = G_i(x_i)^T dV/dx_i.
Eigen::Vector2d hamiltonian_linear_term(const AgentState& s,
                                        const Eigen::Vector4d& vgrad);

/// Local observation of one agent: ego state, relative states of the chosen
/// neighbors in neighborhood order, target minus position, normalized time.
Eigen::VectorXd observation(const GlobalState& g, const Neighborhood& nbhd,
                            const TaskSpec& task, int agent, int step);

/// Backward value recursion over one Euler step, sharing the forward step's
/// noise draws:
///   V' = V - sum_i (q_i + u_i^T R u_i / 2) dt
///          + sum_i sigma sqrt(dt) (dVdx_i[theta] e0 + dVdx_i[v] e1).
double bsde_step(double value, const std::vector<double>& stage_cost,
                 const std::vector<Eigen::Vector2d>& u,
                 const Eigen::Vector2d& r_diag,
                 const std::vector<Eigen::Vector4d>& vgrad, double sigma,
                 double dt, const std::vector<Eigen::Vector2d>& noise);

/// Everything one time step contributes to the backward pass. State and
/// caches refer to the moment before the step was taken.
struct StepRecord {
  GlobalState state;
  std::vector<Neighborhood> nbhds;
  std::vector<Eigen::VectorXd> obs;
  std::vector<Mlp::Cache> grad_cache;
  std::vector<Eigen::Vector4d> vgrad;
  std::vector<Eigen::Vector2d> noise;  // per agent, shared by FSDE and BSDE
  Eigen::VectorXd ustar;               // stacked team controls (2N)
  QpLayerCache qp;
  std::vector<ConstraintRow> class_rows;  // distinct-row provenance
  double value = 0.0;                     // V before the step
  int admm_iters = 0;
  bool converged = false;
};

struct Rollout {
  std::vector<StepRecord> steps;
  GlobalState terminal;
  std::vector<Mlp::Cache> value_cache;  // scalar head at step 0, per agent
  double v0 = 0.0;          // learned initial value estimate
  double v_terminal = 0.0;  // value propagated to the horizon
  std::vector<double> phi;  // terminal cost per agent
  double min_h = 0.0;       // over every pair/obstacle barrier and step
  double min_h_pos = 0.0;   // position-only part of the same scan
  int nonconverged_steps = 0;
  long admm_iter_total = 0;
};

/// Simulates one episode under the model-driven safe controller. `instance`
/// salts the noise streams so batch members differ; a given (seed, instance,
/// agent key) triple always reproduces the same draws. with_grad keeps the
/// caches the backward pass needs; without it only trajectory data, value
/// bookkeeping, and the safety scan are stored. `traces` (optional) receives
/// the per-step solver iteration history.
Rollout rollout(const ValueModel& model, const TaskSpec& task,
                std::uint64_t seed, int instance, bool with_grad,
                std::vector<std::vector<TraceRow>>* traces = nullptr);

/// Mean squared terminal-value error over a batch of rollouts.
double terminal_loss(const std::vector<Rollout>& batch);

struct BackwardResult {
  Eigen::VectorXd grad;  // flat layout: grad_net then value_net
  int degraded_steps = 0;
};

/// Reverse-mode sweep over the unrolled episodes: terminal loss, value
/// recursion, the control-selection layer at every step (via the cached KKT
/// data), the simulator step, and the observation maps, accumulating
/// parameter gradients across the whole batch.
BackwardResult backward(const std::vector<Rollout>& batch,
                        const ValueModel& model, const TaskSpec& task);

}  // namespace dsmc
