#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dsmc/topology.hpp"

namespace dsmc {

struct DiffQpOptions {
  /// Row k counts as active when d_k - (C u)_k <= active_tol * (1 + |d_k|).
  double active_tol = 1e-6;
  /// Reciprocal-condition floor for the saddle system; below it the solve
  /// falls back to a minimum-norm least-squares solution and, unless the
  /// deficiency is fully explained by exact duplicate rows, flags the result
  /// as degraded (the gradient is then only a noisy descent direction).
  double rcond_limit = 1e-12;
};

/// Sensitivities of a QP optimum with respect to a loss gradient in u:
/// solves the saddle system over the active rows
///   [[R, C_a^T], [C_a, 0]] [du; w_a] = [-grad_u; 0]
/// where w = diag(lambda) dlambda, the variable the gradient formulas
/// consume; dlambda itself is recovered where lambda > 0.
struct KktSolution {
  Eigen::VectorXd du;
  Eigen::VectorXd dlambda;         // zero on inactive rows
  Eigen::VectorXd lambda_dlambda;  // diag(lambda) dlambda, zero on inactive
  Eigen::VectorXd lambda;          // multipliers as supplied
  std::vector<bool> active;
  bool degraded = false;
};

KktSolution kkt_solve(const Eigen::MatrixXd& R, const Eigen::MatrixXd& C,
                      const Eigen::VectorXd& d, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& lambda,
                      const Eigen::VectorXd& grad_u,
                      const DiffQpOptions& opt = {});

/// Loss gradients with respect to the QP data at the optimum:
///   dq = du, dd = -diag(lambda) dlambda,
///   dR = (du u^T + u du^T)/2, dC = lambda du^T + diag(lambda) dlambda u^T.
struct QpGradients {
  Eigen::VectorXd dq;
  Eigen::VectorXd dd;
  Eigen::MatrixXd dR;
  Eigen::MatrixXd dC;
};
QpGradients qp_gradients(const KktSolution& sol, const Eigen::VectorXd& u);

/// Class-wise sums of per-row multiplier data of a problem with duplicated
/// rows; the sums match the multipliers of the distinct-row problem, which is
/// what makes the duplicated and deduplicated backward passes agree.
struct AggregatedDuals {
  Eigen::VectorXd lambda;
  Eigen::VectorXd lambda_dlambda;
};
AggregatedDuals aggregate_duplicates(const Eigen::VectorXd& lambda_dup,
                                     const Eigen::VectorXd& lambda_dlambda_dup,
                                     const DuplicateMap& map);

/// Forward data of one solved control-selection problem, in global control
/// coordinates: the distinct rows plus the stacked per-agent multipliers and
/// the map tying them together.
struct QpLayerCache {
  Eigen::MatrixXd R;           // 2N x 2N block-diagonal control cost
  Eigen::MatrixXd C_distinct;  // distinct rows x 2N
  Eigen::VectorXd d_distinct;
  Eigen::VectorXd u;           // consensus solution
  Eigen::VectorXd lambda_dup;  // stacked local row multipliers
  DuplicateMap map;
};

struct QpLayerGrads {
  Eigen::VectorXd dq;           // toward the stacked linear cost terms
  Eigen::VectorXd dd_distinct;  // per distinct row
  Eigen::MatrixXd dC_distinct;
  bool degraded = false;
};

/// Backward through the control-selection layer: sums the duplicate
/// multipliers per class, cleans them to be nonnegative (zero on inactive
/// classes), differentiates the distinct-row system, and returns the data
/// gradients. The caller routes dq into the value-model backward pass and may
/// chase dd/dC into the states that generated the rows.
QpLayerGrads backprop_through_layer(const QpLayerCache& cache,
                                    const Eigen::VectorXd& grad_u,
                                    const DiffQpOptions& opt = {});

}  // namespace dsmc
