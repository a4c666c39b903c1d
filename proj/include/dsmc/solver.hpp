#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dsmc {

/// Termination and penalty settings for the decentralized solver. The
/// defaults are the training profile; verification runs tighten eps to 1e-5
/// and raise max_iters.
struct SolverSettings {
  double rho0 = 1.0;  ///< initial constraint-splitting penalty
  double mu0 = 1.0;   ///< initial consensus penalty
  double eps_abs = 1e-4;
  double eps_rel = 1e-4;
  int max_iters = 500;
  int adapt_interval = 10;  ///< iterations between penalty updates; 0 = fixed
  double penalty_min = 1e-6;
  double penalty_max = 1e6;
  /// A freshly computed penalty is adopted (and the local systems
  /// refactorized) only when it differs from the active one by more than
  /// this ratio; smaller changes are discarded so the splitting stays
  /// internally consistent with the cached factorization.
  double refactor_ratio = 5.0;
};

struct PenaltyState {
  double rho = 1.0;
  double mu = 1.0;
};

/// One agent's quadratic subproblem over the stacked controls
/// [u_ego; u_neighbors...] plus the splitting state that persists across
/// iterations (and across time steps when warm-started).
struct LocalQp {
  Eigen::MatrixXd R;         // width x width; ego block carries the cost
  Eigen::VectorXd p;         // width
  Eigen::MatrixXd A;         // rows x width
  Eigen::VectorXd d;         // rows
  std::vector<int> columns;  // agent per block, ego first

  Eigen::VectorXd u;     // local solution iterate
  Eigen::VectorXd z;     // constraint-space auxiliary
  Eigen::VectorXd zhat;  // projected constraint-space iterate
  Eigen::VectorXd y;     // constraint dual (row multipliers at convergence)
  Eigen::VectorXd xi;    // consensus dual
  Eigen::VectorXd g;     // consensus view [g_ego; g_neighbors...]

  int width() const { return static_cast<int>(R.rows()); }
  int rows() const { return static_cast<int>(A.rows()); }
  int block_dim() const {
    return columns.empty() ? width() : width() / static_cast<int>(columns.size());
  }
  bool state_sized() const;
  void reset_state();
};

/// Solution of one agent's equality-constrained step: the saddle system
///   [[R + mu I, A^T], [A, -(1/rho) I]] [u; nu] = [-p + mu g - xi; zhat - y/rho]
/// followed by z = zhat - y/rho + nu/rho.
struct Block1Result {
  Eigen::VectorXd u;
  Eigen::VectorXd z;
};
Block1Result local_block1(const LocalQp& qp, const PenaltyState& pen);

/// Componentwise projection onto the constraint box: min(z + y/rho, d).
Eigen::VectorXd project_upper(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                              double rho, const Eigen::VectorXd& d);

/// Penalty-shifted average of the copies of one agent's control held by the
/// agent itself and everyone that selected it: mean of (u_copy + xi_copy/mu).
Eigen::VectorXd consensus_average(const std::vector<Eigen::VectorXd>& u_copies,
                                  const std::vector<Eigen::VectorXd>& xi_copies,
                                  double mu);

/// In-place dual ascent: y += rho (z - zhat), xi += mu (u - g).
void dual_update(LocalQp& qp, const PenaltyState& pen);

/// Scaled residuals of the split problem. r_dual2 tracks the movement of the
/// consensus views between iterations, so it needs the previous g per agent.
struct ResidualReport {
  double r_pri1 = 0.0, r_pri2 = 0.0, r_dual1 = 0.0, r_dual2 = 0.0;
  double kappa_pri1 = 0.0, kappa_pri2 = 0.0, kappa_dual1 = 0.0, kappa_dual2 = 0.0;
  double eps_pri1 = 0.0, eps_pri2 = 0.0, eps_dual1 = 0.0, eps_dual2 = 0.0;
  bool converged = false;
};
ResidualReport compute_residuals(const std::vector<LocalQp>& qps,
                                 const std::vector<Eigen::VectorXd>& g_prev,
                                 const PenaltyState& pen,
                                 const SolverSettings& settings);

/// Square-root residual balancing: each penalty moves by the root of the
/// ratio of its normalized primal to dual residual; zero residuals or scales
/// leave it unchanged; the result is clamped to [penalty_min, penalty_max].
PenaltyState adapt_penalties(const ResidualReport& res, const PenaltyState& pen,
                             const SolverSettings& settings);

struct TraceRow {
  int iter = 0;
  double r_pri1 = 0.0, r_pri2 = 0.0, r_dual1 = 0.0, r_dual2 = 0.0;
  double rho = 0.0, mu = 0.0;
};

struct SolveResult {
  std::vector<Eigen::VectorXd> controls;  ///< consensus ego control per agent
  ResidualReport residuals;
  int iterations = 0;
  bool converged = false;
  PenaltyState penalties;
  long phase1_messages = 0;  ///< copy/dual exchanges, one per edge per iter
  long phase2_messages = 0;  ///< consensus-view exchanges, same count
  long pre_messages = 0;     ///< one state exchange per edge before iterating
};

/// Runs the merged splitting loop over all agents. Communication goes through
/// an internal mailbox with exactly two exchange phases per iteration plus
/// one pre-iteration state exchange; message counts are reported. Agents are
/// processed in index order within each phase, so reruns are bit-identical.
/// Warm starting: the splitting state found in `qps` is kept when its sizes
/// match the problem, otherwise it is reset to zero. On hitting max_iters the
/// last iterate is returned with converged = false.
SolveResult solve_decentralized(std::vector<LocalQp>& qps,
                                const SolverSettings& settings,
                                std::vector<TraceRow>* trace = nullptr);

}  // namespace dsmc
