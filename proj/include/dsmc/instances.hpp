#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dsmc/barriers.hpp"
#include "dsmc/dynamics.hpp"
#include "dsmc/rng.hpp"
#include "dsmc/solver.hpp"
#include "dsmc/topology.hpp"

namespace dsmc {

/// One randomly generated team control-selection problem in both of its
/// forms: the per-agent local problems the decentralized solver consumes and
/// the distinct-row team problem the reference solver consumes. Strictly
/// feasible at u = 0 by construction (every rhs >= the feasibility margin).
struct TeamInstance {
  GlobalState state;
  std::vector<Obstacle> obstacles;
  NoiseModel model;
  BarrierParams barrier;
  double agent_radius = 0.25;
  int r = 1;

  std::vector<LocalQp> qps;  // splitting state reset, ready to solve
  StackedConstraints stacked;
  Eigen::MatrixXd R;  // team control cost (block diagonal)
  Eigen::VectorXd p;  // stacked linear terms
};

struct InstanceOptions {
  int n_agents = 3;
  int r = 1;
  int n_obstacles = 1;
  double p_scale = 3.0;      // linear-term magnitude; larger activates rows
  double feas_margin = 0.05; // minimum rhs over all rows
  bool extras = true;
  int max_attempts = 500;
};

/// Draws random states/obstacles until the induced constraint set is
/// strictly feasible at zero, then attaches random linear costs. Throws
/// std::runtime_error when max_attempts rejections pass without a hit.
TeamInstance make_random_team_instance(RandomStream& rs,
                                       const InstanceOptions& opt);

}  // namespace dsmc
