#include "dsmc/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "dsmc/barriers.hpp"
#include "dsmc/errors.hpp"
#include "dsmc/rng.hpp"

namespace dsmc {

Eigen::Vector2d hamiltonian_linear_term(const AgentState& s,
                                        const Eigen::Vector4d& vgrad) {
  return {s.v * vgrad[2], vgrad[3]};
}

Eigen::VectorXd observation(const GlobalState& g, const Neighborhood& nbhd,
                            const TaskSpec& task, int agent, int step) {
  const AgentState& ego = g.agents.at(agent);
  Eigen::VectorXd obs(ValueModel::obs_dim((int)nbhd.neighbors.size()));
  obs.segment<4>(0) = ego.vec();
  int off = 4;
  for (int j : nbhd.neighbors) {
    obs.segment<4>(off) = g.agents.at(j).vec() - ego.vec();
    off += 4;
  }
  const Eigen::Vector2d tgt = target_at(task, agent, step);
  obs[off++] = tgt.x() - ego.x;
  obs[off++] = tgt.y() - ego.y;
  obs[off] = (double)step / task.noise.horizon_steps;
  return obs;
}

double bsde_step(double value, const std::vector<double>& stage_cost,
                 const std::vector<Eigen::Vector2d>& u,
                 const Eigen::Vector2d& r_diag,
                 const std::vector<Eigen::Vector4d>& vgrad, double sigma,
                 double dt, const std::vector<Eigen::Vector2d>& noise) {
  const std::size_t n = stage_cost.size();
  const double root_dt = std::sqrt(dt);
  double out = value;
  for (std::size_t i = 0; i < n; ++i) {
    out -= (stage_cost[i] + 0.5 * u[i].dot(r_diag.cwiseProduct(u[i]))) * dt;
    out += sigma * root_dt *
           (vgrad[i][2] * noise[i][0] + vgrad[i][3] * noise[i][1]);
  }
  return out;
}

namespace {

// Tracks the worst barrier margin seen anywhere in the episode, over every
// agent pair and every obstacle, not just the rows the local problems used.
void scan_state(const GlobalState& g, const std::vector<Obstacle>& obstacles,
                const TaskSpec& task, double& min_h, double& min_h_pos) {
  const int n = g.size();
  const double rr = 2.0 * task.agent_radius;
  for (int i = 0; i < n; ++i) {
    const AgentState& si = g.agents[i];
    for (int j = i + 1; j < n; ++j) {
      const AgentState& sj = g.agents[j];
      const double dx = si.x - sj.x;
      const double dy = si.y - sj.y;
      const double h_pos = 0.5 * (dx * dx + dy * dy - rr * rr);
      const double h = h_pair(si, sj, task.agent_radius, task.barrier);
      min_h_pos = std::min(min_h_pos, h_pos);
      min_h = std::min(min_h, h);
    }
    for (const Obstacle& o : obstacles) {
      const double dx = si.x - o.x;
      const double dy = si.y - o.y;
      const double margin = task.agent_radius + o.radius;
      const double h_pos = 0.5 * (dx * dx + dy * dy - margin * margin);
      const double h = h_obstacle(si, o, task.agent_radius, task.barrier);
      min_h_pos = std::min(min_h_pos, h_pos);
      min_h = std::min(min_h, h);
    }
  }
}

// Actuator limits as private rows of an agent's control QP. Saturation then
// happens inside the projection, where the backward pass sees it through the
// KKT system, instead of feeding an unbounded control into the rollout when
// the value gradient is still untrained.
void append_control_box(LocalConstraints& lc, int agent,
                        const Eigen::Vector2d& u_max) {
  int extra = 0;
  for (int axis = 0; axis < 2; ++axis)
    if (u_max[axis] > 0.0) extra += 2;
  if (extra == 0) return;
  const int base = static_cast<int>(lc.A.rows());
  lc.A.conservativeResize(base + extra, lc.A.cols());
  lc.d.conservativeResize(base + extra);
  int k = base;
  for (int axis = 0; axis < 2; ++axis) {
    if (u_max[axis] <= 0.0) continue;
    for (const double sign : {1.0, -1.0}) {
      lc.A.row(k).setZero();
      lc.A(k, axis) = sign;
      lc.d[k] = u_max[axis];
      ConstraintRow row;
      row.spec.kind = BarrierKind::ControlBox;
      row.spec.i = agent;
      row.owners = {agent};
      row.blocks = {sign * Eigen::Vector2d::Unit(axis)};
      row.rhs = u_max[axis];
      lc.rows.push_back(std::move(row));
      ++k;
    }
  }
}

}  // namespace

Rollout rollout(const ValueModel& model, const TaskSpec& task,
                std::uint64_t seed, int instance, bool with_grad,
                std::vector<std::vector<TraceRow>>* traces) {
  const int n = task.n_agents;
  const int horizon = task.noise.horizon_steps;
  if (model.r != task.r)
    throw ConfigError("model was built for r=" + std::to_string(model.r) +
                      " but the task uses r=" + std::to_string(task.r));

  std::vector<RandomStream> streams;
  streams.reserve(n);
  for (int i = 0; i < n; ++i)
    streams.emplace_back(
        mix64(seed, (std::uint64_t)instance, task.noise_key(i)));

  GlobalState g;
  g.agents = task.start;
  g.time_index = 0;

  Rollout ro;
  ro.steps.reserve(horizon);
  ro.min_h = std::numeric_limits<double>::infinity();
  ro.min_h_pos = std::numeric_limits<double>::infinity();

  {
    const auto nbhds0 = build_neighborhoods(g, task.r);
    if (with_grad) ro.value_cache.resize(n);
    double v0 = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd obs0 = observation(g, nbhds0[i], task, i, 0);
      v0 += model.value_net.forward(obs0,
                                    with_grad ? &ro.value_cache[i] : nullptr)[0];
    }
    ro.v0 = v0;
  }

  scan_state(g, obstacles_at(task, 0), task, ro.min_h, ro.min_h_pos);

  double value = ro.v0;
  std::vector<LocalQp> qps(n);
  std::vector<std::vector<int>> prev_columns(n);
  SolverSettings settings = task.solver;

  for (int tau = 0; tau < horizon; ++tau) {
    StepRecord rec;
    rec.state = g;
    rec.value = value;
    rec.nbhds = build_neighborhoods(g, task.r);
    const std::vector<Obstacle> obstacles = obstacles_at(task, tau);

    rec.obs.resize(n);
    rec.vgrad.resize(n);
    if (with_grad) rec.grad_cache.resize(n);
    std::vector<LocalConstraints> locals(n);
    for (int i = 0; i < n; ++i) {
      rec.obs[i] = observation(g, rec.nbhds[i], task, i, tau);
      rec.vgrad[i] = model.grad_net.forward(
          rec.obs[i], with_grad ? &rec.grad_cache[i] : nullptr);
      locals[i] = assemble_local(rec.nbhds[i], g, obstacles, task.noise,
                                 task.barrier, task.agent_radius, task.extras);
      append_control_box(locals[i], i, task.u_max);
    }

    for (int i = 0; i < n; ++i) {
      LocalQp& qp = qps[i];
      const int width = kStateDim * (int)locals[i].columns.size();
      qp.R = Eigen::MatrixXd::Zero(width, width);
      qp.R(0, 0) = task.cost.r_diag[0];
      qp.R(1, 1) = task.cost.r_diag[1];
      qp.p = Eigen::VectorXd::Zero(width);
      qp.p.head<2>() = hamiltonian_linear_term(g.agents[i], rec.vgrad[i]);
      qp.A = locals[i].A;
      qp.d = locals[i].d;
      qp.columns = locals[i].columns;
      // Warm starting is only meaningful while the copy layout is stable;
      // a neighborhood change redefines what the state vectors mean.
      if (qp.columns != prev_columns[i]) qp.reset_state();
      prev_columns[i] = qp.columns;
    }

    std::vector<TraceRow> trace_rows;
    SolveResult res =
        solve_decentralized(qps, settings, traces ? &trace_rows : nullptr);
    if (traces) traces->push_back(std::move(trace_rows));
    // Keep penalties across steps, but not the extremes the balancing reaches
    // on an all-slack tail: a fresh row activating next step needs a workable
    // rho from iteration one, not after the first adaptation check.
    settings.rho0 = std::clamp(res.penalties.rho, 1e-2, 1e3);
    settings.mu0 = std::clamp(res.penalties.mu, 1e-2, 1e3);
    rec.admm_iters = res.iterations;
    rec.converged = res.converged;
    ro.admm_iter_total += res.iterations;
    if (!res.converged) ++ro.nonconverged_steps;

    rec.ustar.resize(kStateDim * n);
    std::vector<ControlInput> controls(n);
    std::vector<Eigen::Vector2d> uvec(n);
    for (int i = 0; i < n; ++i) {
      rec.ustar.segment<2>(2 * i) = res.controls[i];
      uvec[i] = res.controls[i];
      controls[i] = ControlInput::from_vec(res.controls[i]);
    }

    if (with_grad) {
      StackedConstraints st = assemble_duplicate(locals, n);
      int total_rows = 0;
      for (const LocalQp& qp : qps) total_rows += qp.rows();
      rec.qp.lambda_dup.resize(total_rows);
      int off = 0;
      for (const LocalQp& qp : qps) {
        rec.qp.lambda_dup.segment(off, qp.rows()) = qp.y;
        off += qp.rows();
      }
      rec.qp.R = Eigen::MatrixXd::Zero(kStateDim * n, kStateDim * n);
      for (int i = 0; i < n; ++i) {
        rec.qp.R(2 * i, 2 * i) = task.cost.r_diag[0];
        rec.qp.R(2 * i + 1, 2 * i + 1) = task.cost.r_diag[1];
      }
      rec.qp.u = rec.ustar;
      rec.qp.C_distinct = std::move(st.C_distinct);
      rec.qp.d_distinct = std::move(st.d_distinct);
      rec.qp.map = std::move(st.map);
      rec.class_rows = std::move(st.class_rows);
    }

    rec.noise.resize(n);
    for (int i = 0; i < n; ++i)
      rec.noise[i] = {streams[i].normal(), streams[i].normal()};

    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = running_cost(task, g.agents[i], i, tau);
    value = bsde_step(value, q, uvec, task.cost.r_diag, rec.vgrad,
                      task.noise.sigma, task.noise.dt, rec.noise);
    g = em_step(g, controls, rec.noise, task.noise);

    scan_state(g, obstacles_at(task, tau + 1), task, ro.min_h, ro.min_h_pos);
    ro.steps.push_back(std::move(rec));
  }

  ro.terminal = g;
  ro.v_terminal = value;
  ro.phi.resize(n);
  for (int i = 0; i < n; ++i)
    ro.phi[i] = terminal_cost(task, g.agents[i], i);
  return ro;
}

double terminal_loss(const std::vector<Rollout>& batch) {
  double acc = 0.0;
  for (const Rollout& ro : batch) {
    const double phi = std::accumulate(ro.phi.begin(), ro.phi.end(), 0.0);
    const double err = ro.v_terminal - phi;
    acc += err * err;
  }
  return acc / (double)batch.size();
}

BackwardResult backward(const std::vector<Rollout>& batch,
                        const ValueModel& model, const TaskSpec& task) {
  const int n = task.n_agents;
  const double dt = task.noise.dt;
  const double diff_scale = task.noise.sigma * std::sqrt(dt);
  const int bsize = (int)batch.size();
  Eigen::VectorXd grad_g = Eigen::VectorXd::Zero(model.grad_net.param_count());
  Eigen::VectorXd grad_v = Eigen::VectorXd::Zero(model.value_net.param_count());
  BackwardResult out;
  const DiffQpOptions qopt;

  for (const Rollout& ro : batch) {
    const double phi = std::accumulate(ro.phi.begin(), ro.phi.end(), 0.0);
    const double g_value = 2.0 * (ro.v_terminal - phi) / bsize;

    std::vector<Eigen::Vector4d> gx_next(n);
    for (int i = 0; i < n; ++i)
      gx_next[i] =
          -g_value * terminal_cost_grad(task, ro.terminal.agents[i], i);

    for (int tau = (int)ro.steps.size() - 1; tau >= 0; --tau) {
      const StepRecord& rec = ro.steps[tau];

      Eigen::VectorXd grad_u(kStateDim * n);
      for (int i = 0; i < n; ++i) {
        const AgentState& s = rec.state.agents[i];
        const Eigen::Vector2d u_i = rec.ustar.segment<2>(2 * i);
        Eigen::Vector2d gu = dt * (actuation(s).transpose() * gx_next[i]);
        gu -= g_value * dt * task.cost.r_diag.cwiseProduct(u_i);
        grad_u.segment<2>(2 * i) = gu;
      }

      const QpLayerGrads qg = backprop_through_layer(rec.qp, grad_u, qopt);
      if (qg.degraded) ++out.degraded_steps;

      std::vector<Eigen::Vector4d> gx_cur(n, Eigen::Vector4d::Zero());
      std::vector<Eigen::Vector4d> gvgrad(n, Eigen::Vector4d::Zero());

      for (int i = 0; i < n; ++i) {
        const Eigen::Vector2d gp = qg.dq.segment<2>(2 * i);
        gvgrad[i][2] += rec.state.agents[i].v * gp[0];
        gvgrad[i][3] += gp[1];
        // p_i[0] = v * dVdx[theta] also moves with the ego speed
        gx_cur[i][3] += gp[0] * rec.vgrad[i][2];
      }

      if (task.constraint_grads && !rec.class_rows.empty()) {
        const std::vector<Obstacle> obstacles = obstacles_at(task, tau);
        for (int c = 0; c < (int)rec.class_rows.size(); ++c) {
          const ConstraintRow& row = rec.class_rows[c];
          // Actuator-limit rows are state constants; nothing to chase.
          if (row.spec.kind == BarrierKind::ControlBox) continue;
          const int owners = (int)row.owners.size();
          const double gd = qg.dd_distinct[c];
          Eigen::VectorXd ga(2 * owners);
          for (int k = 0; k < owners; ++k)
            ga.segment<2>(2 * k) =
                qg.dC_distinct.row(c).segment<2>(2 * row.owners[k]).transpose();
          if (gd == 0.0 && ga.isZero(0.0)) continue;  // inactive class
          const ConstraintRowJacobian jac = constraint_row_state_jacobian(
              row.spec, rec.state, obstacles, task.noise, task.barrier);
          const Eigen::VectorXd gjoint =
              jac.da_dx.transpose() * ga + gd * jac.dd_dx;
          for (int k = 0; k < owners; ++k)
            gx_cur[row.owners[k]] += gjoint.segment<4>(4 * k);
        }
      }

      for (int i = 0; i < n; ++i) {
        gvgrad[i][2] += g_value * diff_scale * rec.noise[i][0];
        gvgrad[i][3] += g_value * diff_scale * rec.noise[i][1];
      }

      for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd gobs =
            model.grad_net.backward(rec.grad_cache[i], gvgrad[i], grad_g);
        gx_cur[i] += gobs.segment<4>(0);
        int off = 4;
        for (int j : rec.nbhds[i].neighbors) {
          gx_cur[j] += gobs.segment<4>(off);
          gx_cur[i] -= gobs.segment<4>(off);
          off += 4;
        }
        // relative target block: d(target - pos)/d pos = -I
        gx_cur[i][0] -= gobs[off];
        gx_cur[i][1] -= gobs[off + 1];
      }

      for (int i = 0; i < n; ++i) {
        const AgentState& s = rec.state.agents[i];
        const ControlInput u_i =
            ControlInput::from_vec(rec.ustar.segment<2>(2 * i));
        const Eigen::Matrix4d jac = drift_control_jacobian(s, u_i);
        gx_cur[i] += gx_next[i] + dt * (jac.transpose() * gx_next[i]);
        gx_cur[i] -= g_value * dt * running_cost_grad(task, s, i, tau);
      }
      gx_next = std::move(gx_cur);
    }

    Eigen::VectorXd gout(1);
    gout[0] = g_value;
    for (int i = 0; i < n; ++i)
      model.value_net.backward(ro.value_cache[i], gout, grad_v);
  }

  out.grad.resize(grad_g.size() + grad_v.size());
  out.grad << grad_g, grad_v;
  return out;
}

}  // namespace dsmc
