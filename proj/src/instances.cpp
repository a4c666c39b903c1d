#include "dsmc/instances.hpp"

#include <cmath>
#include <stdexcept>

namespace dsmc {

TeamInstance make_random_team_instance(RandomStream& rs,
                                       const InstanceOptions& opt) {
  const int n = opt.n_agents;
  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    TeamInstance inst;
    inst.r = opt.r;
    inst.state.agents.resize(n);
    for (AgentState& s : inst.state.agents) {
      s.x = rs.uniform(-3.0, 3.0);
      s.y = rs.uniform(-3.0, 3.0);
      s.theta = rs.uniform(-M_PI, M_PI);
      s.v = rs.uniform(0.0, 1.5);
    }
    inst.obstacles.resize(opt.n_obstacles);
    for (Obstacle& o : inst.obstacles) {
      o.x = rs.uniform(-2.0, 2.0);
      o.y = rs.uniform(-2.0, 2.0);
      o.radius = rs.uniform(0.2, 0.5);
    }

    ExtraConstraints extras;
    extras.neighbor_obstacle = opt.extras;
    extras.neighbor_neighbor = opt.extras;

    const auto nbhds = build_neighborhoods(inst.state, opt.r);
    std::vector<LocalConstraints> locals(n);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      locals[i] = assemble_local(nbhds[i], inst.state, inst.obstacles,
                                 inst.model, inst.barrier, inst.agent_radius,
                                 extras);
      // Strict feasibility at u = 0 plus a sane row scale keeps the instance
      // solvable and the reference enumeration well conditioned.
      for (int k = 0; k < (int)locals[i].rows.size(); ++k) {
        if (locals[i].d[k] < opt.feas_margin) ok = false;
        if (locals[i].rows[k].degenerate) ok = false;
      }
    }
    if (!ok) continue;

    inst.stacked = assemble_duplicate(locals, n);
    inst.qps.resize(n);
    inst.R = Eigen::MatrixXd::Identity(kStateDim * n, kStateDim * n);
    inst.p.resize(kStateDim * n);
    for (int i = 0; i < n; ++i)
      inst.p.segment<2>(2 * i) =
          Eigen::Vector2d(rs.normal(), rs.normal()) * opt.p_scale;

    for (int i = 0; i < n; ++i) {
      LocalQp& qp = inst.qps[i];
      const int width = kStateDim * (int)locals[i].columns.size();
      qp.R = Eigen::MatrixXd::Zero(width, width);
      qp.R(0, 0) = 1.0;
      qp.R(1, 1) = 1.0;
      qp.p = Eigen::VectorXd::Zero(width);
      qp.p.head<2>() = inst.p.segment<2>(2 * i);
      qp.A = locals[i].A;
      qp.d = locals[i].d;
      qp.columns = locals[i].columns;
      qp.reset_state();
    }
    return inst;
  }
  throw std::runtime_error(
      "instance generation: no strictly feasible draw within the attempt "
      "budget");
}

}  // namespace dsmc
