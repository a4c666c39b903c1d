#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dsmc/dynamics.hpp"

namespace dsmc {

/// Exponential barrier parameters. B = exp(-gamma h) maps the safe set
/// {h >= 0} to {B <= 1}; alpha/beta shape the supermartingale decay condition
/// and with them the failure-probability bound over a horizon.
struct BarrierParams {
  double gamma = 1.0;   ///< exponential sharpness, > 0
  double alpha = 1.0;   ///< decay rate, >= 0
  double beta = 0.5;    ///< drift allowance, >= 0
  double mu_b = 0.2;    ///< weight of the velocity (approach) term, >= 0
  bool normalize_ip = false;  ///< use unit-normalized relative position in
                              ///< the approach term instead of the raw one
};

struct Obstacle {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
};

enum class BarrierKind {
  PairCollision,      // two agents, shared radius; joint state is 8-dim
  ObstacleCollision,  // one agent vs a static disc; joint state is 4-dim
  LegacySpeed,        // one agent vs a disc, speed-squared velocity term
  ControlBox,         // actuator limit row; constant, no barrier function
};

/// One barrier instance. For PairCollision the pair (i, j) is stored in
/// canonical order (i < j) so that every holder of the pair evaluates the
/// identical expression stream and duplicate rows match bit for bit.
struct BarrierSpec {
  BarrierKind kind = BarrierKind::ObstacleCollision;
  int i = 0;             // first (or only) agent
  int j = -1;            // second agent (PairCollision only)
  int obstacle = -1;     // obstacle index (obstacle kinds only)
  double radius_i = 0.0;
  double radius_j = 0.0;  // obstacle radius for obstacle kinds

  static BarrierSpec pair(int a, int b, double agent_radius);
  static BarrierSpec obstacle_disc(int agent, int obstacle_index,
                                   double agent_radius, double obs_radius);
  static BarrierSpec legacy_disc(int agent, int obstacle_index,
                                 double agent_radius, double obs_radius);

  /// Joint-state dimension: 8 for PairCollision, 4 otherwise.
  int dim() const { return kind == BarrierKind::PairCollision ? 8 : 4; }
};

/// Pairwise distance margin with a directional approach term: positive when
/// the agents are separated and not closing fast. Signature h >= 0 is the
/// safe set.
double h_pair(const AgentState& si, const AgentState& sj, double agent_radius,
              const BarrierParams& params);

/// Agent/disc margin with the agent's approach speed toward the disc.
double h_obstacle(const AgentState& si, const Obstacle& obs, double radius_i,
                  const BarrierParams& params);

/// Older form kept for comparison runs: a provided position margin minus
/// mu_b * v^2, penalizing speed in every direction equally.
double legacy_h(const AgentState& si, double h_pos, const BarrierParams& params);

/// Barrier value and its analytic first/second derivatives with respect to
/// the joint state of the involved agents (order: agent i block then agent j
/// block, each [x, y, theta, v]).
struct BarrierDerivatives {
  double h = 0.0;
  double B = 0.0;
  Eigen::VectorXd dB;    // dim()
  Eigen::MatrixXd d2B;   // dim() x dim()
};

BarrierDerivatives barrier_derivatives(const BarrierSpec& spec,
                                       const GlobalState& g,
                                       const std::vector<Obstacle>& obstacles,
                                       const BarrierParams& params);

/// One affine control constraint a^T u_bar <= d over the involved agents'
/// controls, obtained by requiring the generator of B along the controlled
/// diffusion to respect dB/dt <= -alpha B + beta.
struct ConstraintRow {
  BarrierSpec spec;
  std::vector<int> owners;              // agents whose controls appear (1 or 2)
  std::vector<Eigen::Vector2d> blocks;  // coefficient block per owner
  double rhs = 0.0;                     // d
  bool degenerate = false;              // max |a| < 1e-10: row has no control
                                        // authority at this state

  double coeff_inf_norm() const;
};

ConstraintRow constraint_row(const BarrierSpec& spec, const GlobalState& g,
                             const std::vector<Obstacle>& obstacles,
                             const NoiseModel& model,
                             const BarrierParams& params);

/// Derivatives of the row coefficients and rhs with respect to the involved
/// joint state; used when gradients are chased through the constraint data of
/// the control-selection layer. da_dx is (2*owners) x dim(), dd_dx is dim().
struct ConstraintRowJacobian {
  Eigen::MatrixXd da_dx;
  Eigen::VectorXd dd_dx;
};

ConstraintRowJacobian constraint_row_state_jacobian(
    const BarrierSpec& spec, const GlobalState& g,
    const std::vector<Obstacle>& obstacles, const NoiseModel& model,
    const BarrierParams& params);

/// Probability bound for leaving the safe set within horizon T given the
/// initial barrier value B0 = B(x(0)); clamped to [0, 1].
double failure_bound(double B0, const BarrierParams& params, double T);

}  // namespace dsmc
