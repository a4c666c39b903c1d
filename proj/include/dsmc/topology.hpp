#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dsmc/barriers.hpp"
#include "dsmc/dynamics.hpp"

namespace dsmc {

/// Communication/constraint neighborhood of one agent: the r nearest agents
/// by Euclidean position (ties broken toward the lower index) plus the
/// reverse set of agents that selected this one. The neighbor list is kept
/// in ascending index order so the induced copy layout is stable as long as
/// the membership is.
struct Neighborhood {
  int ego = 0;
  std::vector<int> neighbors;  // N_i, ascending agent index
  std::vector<int> reverse;    // P_i = { j : ego in N_j }, ascending
};

/// Builds all neighborhoods for one joint state. Requires 0 <= r < N. The
/// per-agent problem size depends only on r and the obstacle count, never on
/// the team size.
std::vector<Neighborhood> build_neighborhoods(const GlobalState& g, int r);

/// Optional constraint families beyond the ego ones.
struct ExtraConstraints {
  bool neighbor_obstacle = false;   // each neighbor vs each obstacle
  bool neighbor_neighbor = false;   // each neighbor pair within N_i
};

/// The inequality block of one agent's local problem, over the stacked
/// controls [u_ego; u_{N_i...}] in neighborhood order. Row order: ego-pair
/// rows in N_i order, ego-obstacle rows in obstacle order, then the optional
/// neighbor-obstacle (neighbor-major) and neighbor-pair families.
struct LocalConstraints {
  Eigen::MatrixXd A;  // n_rows x (2 * (1 + |N_i|))
  Eigen::VectorXd d;
  std::vector<ConstraintRow> rows;  // provenance, same order as A
  std::vector<int> columns;         // agent per column block: ego first
};

LocalConstraints assemble_local(const Neighborhood& nbhd, const GlobalState& g,
                                const std::vector<Obstacle>& obstacles,
                                const NoiseModel& model,
                                const BarrierParams& params,
                                double agent_radius,
                                const ExtraConstraints& extras = {});

/// Mapping between the stacked local rows (with cross-agent duplicates) and
/// their distinct representatives: stacked = M * distinct, where each row of
/// M selects exactly one representative. Duplicates are exact by construction
/// because every holder of a pair row evaluates it in canonical order.
struct DuplicateMap {
  std::vector<int> class_of;               // per stacked row
  std::vector<std::vector<int>> members;   // per class, ascending row ids
  int classes() const { return static_cast<int>(members.size()); }

  /// Class-wise sums: out[c] = sum of x over members of class c (M^T x).
  Eigen::VectorXd aggregate(const Eigen::VectorXd& stacked) const;
};

/// The team-level problem the stacked local rows represent: every local row
/// rewritten over the global control vector (2N), plus the duplicate map and
/// the distinct representatives.
struct StackedConstraints {
  Eigen::MatrixXd C;        // total local rows x 2N (duplicates included)
  Eigen::VectorXd d;
  Eigen::MatrixXd C_distinct;  // classes x 2N
  Eigen::VectorXd d_distinct;
  DuplicateMap map;
  std::vector<ConstraintRow> class_rows;  // representative provenance
  std::vector<int> row_agent;             // owning agent of each stacked row
};

StackedConstraints assemble_duplicate(const std::vector<LocalConstraints>& local,
                                      int n_agents);

/// Constraint count of the fully centralized formulation: one row per agent
/// pair plus one per agent/obstacle pair.
long centralized_count(int n_agents, int n_obstacles);

}  // namespace dsmc
