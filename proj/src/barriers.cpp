#include "dsmc/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsmc {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("barriers: " + msg);
}

// Approach term T = v_a * <dir, heading(theta_a)> where dir is the relative
// position of a reference point (other agent or obstacle centre), either raw
// or unit-normalized. Derivatives are taken with respect to the local order
// [x_a, y_a, theta_a, v_a, x_o, y_o].
struct ApproachTerm {
  double value = 0.0;
  Eigen::Matrix<double, 6, 1> grad = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 6> hess = Eigen::Matrix<double, 6, 6>::Zero();
};

ApproachTerm approach_term(const AgentState& a, double ox, double oy,
                           bool normalize) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  const Eigen::Vector2d w{c, s};
  const Eigen::Vector2d wp{-s, c};  // d w / d theta
  const Eigen::Vector2d delta{ox - a.x, oy - a.y};
  const double sw = delta.dot(w);
  const double sp = delta.dot(wp);

  double ip, ip_theta;         // IP and dIP/dtheta
  Eigen::Vector2d q, q_theta;  // dIP/ddelta and its theta derivative
  Eigen::Matrix2d D;           // d q / d delta
  if (!normalize) {
    ip = sw;
    ip_theta = sp;
    q = w;
    q_theta = wp;
    D.setZero();
  } else {
    const double n = std::max(delta.norm(), 1e-9);
    const double n3 = n * n * n;
    ip = sw / n;
    ip_theta = sp / n;
    q = w / n - sw * delta / n3;
    q_theta = wp / n - sp * delta / n3;
    D = -(w * delta.transpose() + delta * w.transpose() +
          sw * Eigen::Matrix2d::Identity()) /
            n3 +
        3.0 * sw * delta * delta.transpose() / (n3 * n * n);
  }

  ApproachTerm t;
  t.value = a.v * ip;
  t.grad.segment<2>(0) = -a.v * q;
  t.grad[2] = a.v * ip_theta;
  t.grad[3] = ip;
  t.grad.segment<2>(4) = a.v * q;

  t.hess.block<2, 2>(0, 0) = a.v * D;
  t.hess.block<2, 1>(0, 2) = -a.v * q_theta;
  t.hess.block<2, 1>(0, 3) = -q;
  t.hess.block<2, 2>(0, 4) = -a.v * D;
  t.hess(2, 2) = -t.value;  // second theta derivative of IP is -IP
  t.hess(2, 3) = ip_theta;
  t.hess.block<1, 2>(2, 4) = (a.v * q_theta).transpose();
  t.hess.block<1, 2>(3, 4) = q.transpose();
  t.hess.block<2, 2>(4, 4) = a.v * D;
  t.hess.triangularView<Eigen::StrictlyLower>() =
      t.hess.triangularView<Eigen::StrictlyUpper>().transpose();
  return t;
}

// Scatters a 6-index local quantity (agent block + reference point) into the
// joint-state indexing of the barrier. ref_x/ref_y < 0 mean the reference
// point is fixed (an obstacle) and its entries are dropped.
void scatter_term(const ApproachTerm& t, double weight, int base, int ref_x,
                  Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
  int map[6] = {base, base + 1, base + 2, base + 3, ref_x,
                ref_x < 0 ? -1 : ref_x + 1};
  for (int r = 0; r < 6; ++r) {
    if (map[r] < 0) continue;
    grad[map[r]] += weight * t.grad[r];
    for (int c = 0; c < 6; ++c) {
      if (map[c] < 0) continue;
      hess(map[r], map[c]) += weight * t.hess(r, c);
    }
  }
}

// Joint derivatives of the margin h plus the pieces the constraint-row
// jacobian needs beyond second order: the gradient of each diagonal
// heading-heading Hessian entry (the only nonzero third-order slice; the
// speed-speed entry is identically zero because h is linear in each speed).
struct JointDerivs {
  double h = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  std::vector<int> base;                      // joint-state offset per agent
  std::vector<int> agents;                    // agent index per block
  std::vector<Eigen::VectorXd> d_hess_theta;  // grad of hess(theta_a, theta_a)
};

const AgentState& agent_at(const GlobalState& g, int idx) {
  require(idx >= 0 && idx < g.size(), "agent index out of range");
  return g.agents[idx];
}

const Obstacle& obstacle_at(const std::vector<Obstacle>& obstacles, int idx) {
  require(idx >= 0 && idx < static_cast<int>(obstacles.size()),
          "obstacle index out of range");
  return obstacles[idx];
}

JointDerivs joint_h_derivs(const BarrierSpec& spec, const GlobalState& g,
                           const std::vector<Obstacle>& obstacles,
                           const BarrierParams& params) {
  require(spec.kind != BarrierKind::ControlBox,
          "control box rows carry no barrier function");
  JointDerivs out;
  const int dim = spec.dim();
  out.grad = Eigen::VectorXd::Zero(dim);
  out.hess = Eigen::MatrixXd::Zero(dim, dim);

  if (spec.kind == BarrierKind::PairCollision) {
    const AgentState& si = agent_at(g, spec.i);
    const AgentState& sj = agent_at(g, spec.j);
    const double dx = si.x - sj.x;
    const double dy = si.y - sj.y;
    const double rr = 2.0 * spec.radius_i;
    out.h = 0.5 * (dx * dx + dy * dy - rr * rr);
    out.grad[0] = dx;
    out.grad[1] = dy;
    out.grad[4] = -dx;
    out.grad[5] = -dy;
    for (int k : {0, 1}) {
      out.hess(k, k) += 1.0;
      out.hess(k + 4, k + 4) += 1.0;
      out.hess(k, k + 4) -= 1.0;
      out.hess(k + 4, k) -= 1.0;
    }
    const ApproachTerm ti = approach_term(si, sj.x, sj.y, params.normalize_ip);
    const ApproachTerm tj = approach_term(sj, si.x, si.y, params.normalize_ip);
    out.h -= params.mu_b * (ti.value + tj.value);
    scatter_term(ti, -params.mu_b, 0, 4, out.grad, out.hess);
    scatter_term(tj, -params.mu_b, 4, 0, out.grad, out.hess);

    out.base = {0, 4};
    out.agents = {spec.i, spec.j};
    Eigen::VectorXd gi = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd gj = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd scratch = Eigen::MatrixXd::Zero(dim, dim);
    scatter_term(ti, params.mu_b, 0, 4, gi, scratch);
    scatter_term(tj, params.mu_b, 4, 0, gj, scratch);
    out.d_hess_theta = {gi, gj};  // hess(theta_a, theta_a) = mu_b * T_a
    return out;
  }

  const AgentState& si = agent_at(g, spec.i);
  const Obstacle& obs = obstacle_at(obstacles, spec.obstacle);
  const double dx = si.x - obs.x;
  const double dy = si.y - obs.y;
  const double rr = spec.radius_i + spec.radius_j;
  out.h = 0.5 * (dx * dx + dy * dy - rr * rr);
  out.grad[0] = dx;
  out.grad[1] = dy;
  out.hess(0, 0) += 1.0;
  out.hess(1, 1) += 1.0;
  out.base = {0};
  out.agents = {spec.i};

  if (spec.kind == BarrierKind::ObstacleCollision) {
    const ApproachTerm ti = approach_term(si, obs.x, obs.y, params.normalize_ip);
    out.h -= params.mu_b * ti.value;
    scatter_term(ti, -params.mu_b, 0, -1, out.grad, out.hess);
    Eigen::VectorXd gi = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd scratch = Eigen::MatrixXd::Zero(dim, dim);
    scatter_term(ti, params.mu_b, 0, -1, gi, scratch);
    out.d_hess_theta = {gi};
  } else {  // LegacySpeed: h_pos - mu_b v^2, direction-blind speed penalty
    out.h -= params.mu_b * si.v * si.v;
    out.grad[3] -= 2.0 * params.mu_b * si.v;
    out.hess(3, 3) -= 2.0 * params.mu_b;
    out.d_hess_theta = {Eigen::VectorXd::Zero(dim)};
  }
  return out;
}

constexpr double kExponentCap = 30.0;  // caps -gamma h before exp
constexpr double kDegenerateRowTol = 1e-10;

}  // namespace

BarrierSpec BarrierSpec::pair(int a, int b, double agent_radius) {
  require(a != b, "pair barrier needs two distinct agents");
  BarrierSpec s;
  s.kind = BarrierKind::PairCollision;
  s.i = std::min(a, b);
  s.j = std::max(a, b);
  s.radius_i = agent_radius;
  s.radius_j = agent_radius;
  return s;
}

BarrierSpec BarrierSpec::obstacle_disc(int agent, int obstacle_index,
                                       double agent_radius, double obs_radius) {
  BarrierSpec s;
  s.kind = BarrierKind::ObstacleCollision;
  s.i = agent;
  s.obstacle = obstacle_index;
  s.radius_i = agent_radius;
  s.radius_j = obs_radius;
  return s;
}

BarrierSpec BarrierSpec::legacy_disc(int agent, int obstacle_index,
                                     double agent_radius, double obs_radius) {
  BarrierSpec s = obstacle_disc(agent, obstacle_index, agent_radius, obs_radius);
  s.kind = BarrierKind::LegacySpeed;
  return s;
}

double h_pair(const AgentState& si, const AgentState& sj, double agent_radius,
              const BarrierParams& params) {
  GlobalState g;
  g.agents = {si, sj};
  return joint_h_derivs(BarrierSpec::pair(0, 1, agent_radius), g, {}, params).h;
}

double h_obstacle(const AgentState& si, const Obstacle& obs, double radius_i,
                  const BarrierParams& params) {
  GlobalState g;
  g.agents = {si};
  return joint_h_derivs(
             BarrierSpec::obstacle_disc(0, 0, radius_i, obs.radius), g, {obs},
             params)
      .h;
}

double legacy_h(const AgentState& si, double h_pos,
                const BarrierParams& params) {
  return h_pos - params.mu_b * si.v * si.v;
}

BarrierDerivatives barrier_derivatives(const BarrierSpec& spec,
                                       const GlobalState& g,
                                       const std::vector<Obstacle>& obstacles,
                                       const BarrierParams& params) {
  require(params.gamma > 0.0, "gamma must be positive");
  const JointDerivs jd = joint_h_derivs(spec, g, obstacles, params);

  BarrierDerivatives out;
  out.h = jd.h;
  const double z = std::min(-params.gamma * jd.h, kExponentCap);
  out.B = std::exp(z);
  out.dB = -params.gamma * out.B * jd.grad;
  out.d2B = out.B * (params.gamma * params.gamma * jd.grad * jd.grad.transpose() -
                     params.gamma * jd.hess);
  return out;
}

double ConstraintRow::coeff_inf_norm() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

ConstraintRow constraint_row(const BarrierSpec& spec, const GlobalState& g,
                             const std::vector<Obstacle>& obstacles,
                             const NoiseModel& model,
                             const BarrierParams& params) {
  const JointDerivs jd = joint_h_derivs(spec, g, obstacles, params);
  const double z = std::min(-params.gamma * jd.h, kExponentCap);
  const double B = std::exp(z);
  const Eigen::VectorXd dB = -params.gamma * B * jd.grad;
  const Eigen::MatrixXd d2B =
      B * (params.gamma * params.gamma * jd.grad * jd.grad.transpose() -
           params.gamma * jd.hess);

  ConstraintRow row;
  row.spec = spec;
  row.owners = jd.agents;

  // a = G_bar^T dB: per agent, the heading channel carries a factor v.
  double drift_term = 0.0;
  double trace_term = 0.0;
  for (std::size_t k = 0; k < jd.agents.size(); ++k) {
    const int b = jd.base[k];
    const AgentState& s = g.agents[jd.agents[k]];
    row.blocks.push_back(Eigen::Vector2d{s.v * dB[b + 2], dB[b + 3]});
    drift_term += dB[b] * s.v * std::cos(s.theta) +
                  dB[b + 1] * s.v * std::sin(s.theta);
    trace_term += d2B(b + 2, b + 2) + d2B(b + 3, b + 3);
  }
  row.rhs = -params.alpha * B + params.beta - drift_term -
            0.5 * model.sigma * model.sigma * trace_term;
  row.degenerate = row.coeff_inf_norm() < kDegenerateRowTol;
  return row;
}

ConstraintRowJacobian constraint_row_state_jacobian(
    const BarrierSpec& spec, const GlobalState& g,
    const std::vector<Obstacle>& obstacles, const NoiseModel& model,
    const BarrierParams& params) {
  const JointDerivs jd = joint_h_derivs(spec, g, obstacles, params);
  const int dim = spec.dim();
  const double gamma = params.gamma;
  const double z = std::min(-gamma * jd.h, kExponentCap);
  const double B = std::exp(z);
  const Eigen::VectorXd dB = -gamma * B * jd.grad;
  const Eigen::MatrixXd d2B =
      B * (gamma * gamma * jd.grad * jd.grad.transpose() - gamma * jd.hess);

  // Third-order action: x-gradient of each Hessian row of B. We only ever
  // need rows at (theta, theta) and (v, v), where the h third-order slice is
  // mu_b * grad(T_a) and zero respectively.
  const auto d2B_diag_grad = [&](int c, const Eigen::VectorXd& h3_slice) {
    const double hc = jd.grad[c];
    const double hcc = jd.hess(c, c);
    return Eigen::VectorXd(dB * (gamma * gamma * hc * hc - gamma * hcc) +
                           B * (2.0 * gamma * gamma * hc * jd.hess.row(c).transpose() -
                                gamma * h3_slice));
  };
  // Gradient of an arbitrary d2B entry (r, c), given the third-order slice of
  // h at (r, c). For rows of the actuation product we need full rows of d2B's
  // derivative, see below.

  ConstraintRowJacobian out;
  const int n_rows = 2 * static_cast<int>(jd.agents.size());
  out.da_dx = Eigen::MatrixXd::Zero(n_rows, dim);
  out.dd_dx = Eigen::VectorXd::Zero(dim);

  // d/dx of a: block entries are v_a * dB[theta_a] and dB[v_a]. The gradient
  // of dB itself is the Hessian d2B (as a matrix of row gradients).
  for (std::size_t k = 0; k < jd.agents.size(); ++k) {
    const int b = jd.base[k];
    const AgentState& s = g.agents[jd.agents[k]];
    out.da_dx.row(2 * k) = s.v * d2B.row(b + 2);
    out.da_dx(2 * k, b + 3) += dB[b + 2];
    out.da_dx.row(2 * k + 1) = d2B.row(b + 3);
  }

  // d/dx of d = -alpha B + beta - dB.f - 0.5 sigma^2 sum_c d2B_cc.
  out.dd_dx = -params.alpha * dB;

  Eigen::VectorXd fbar = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd Jf = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t k = 0; k < jd.agents.size(); ++k) {
    const int b = jd.base[k];
    const AgentState& s = g.agents[jd.agents[k]];
    const double c = std::cos(s.theta);
    const double sn = std::sin(s.theta);
    fbar[b] = s.v * c;
    fbar[b + 1] = s.v * sn;
    Jf(b, b + 2) = -s.v * sn;
    Jf(b, b + 3) = c;
    Jf(b + 1, b + 2) = s.v * c;
    Jf(b + 1, b + 3) = sn;
  }
  // grad(dB.f) = d2B f + Jf^T dB; the drift gradient of B is -gamma B grad h,
  // whose x-derivative is exactly d2B by the product/chain rule used above.
  out.dd_dx -= d2B * fbar + Jf.transpose() * dB;

  const double half_s2 = 0.5 * model.sigma * model.sigma;
  for (std::size_t k = 0; k < jd.agents.size(); ++k) {
    const int b = jd.base[k];
    out.dd_dx -= half_s2 * d2B_diag_grad(b + 2, jd.d_hess_theta[k]);
    out.dd_dx -=
        half_s2 * d2B_diag_grad(b + 3, Eigen::VectorXd::Zero(dim));
  }
  return out;
}

double failure_bound(double B0, const BarrierParams& params, double T) {
  require(B0 >= 0.0, "B0 must be nonnegative");
  require(T >= 0.0, "horizon must be nonnegative");
  require(params.alpha >= 0.0 && params.beta >= 0.0, "alpha, beta must be >= 0");

  double p;
  if (params.alpha == 0.0) {
    p = B0 + params.beta * T;
  } else if (params.beta <= params.alpha) {
    p = 1.0 - (1.0 - B0) * std::exp(-params.beta * T);
  } else {
    const double eT = std::exp(params.beta * T);
    p = (B0 + (eT - 1.0) * params.beta / params.alpha) / eT;
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace dsmc
