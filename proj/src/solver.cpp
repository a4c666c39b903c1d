#include "dsmc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsmc {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("solver: " + msg);
}

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd build_kkt(const LocalQp& qp, const PenaltyState& pen) {
  const int n = qp.width();
  const int m = qp.rows();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = qp.R;
  K.topLeftCorner(n, n).diagonal().array() += pen.mu;
  if (m > 0) {
    K.topRightCorner(n, m) = qp.A.transpose();
    K.bottomLeftCorner(m, n) = qp.A;
    K.bottomRightCorner(m, m).diagonal().setConstant(-1.0 / pen.rho);
  }
  return K;
}

}  // namespace

bool LocalQp::state_sized() const {
  const int n = width();
  const int m = rows();
  return u.size() == n && z.size() == m && zhat.size() == m && y.size() == m &&
         xi.size() == n && g.size() == n;
}

void LocalQp::reset_state() {
  u = Eigen::VectorXd::Zero(width());
  z = Eigen::VectorXd::Zero(rows());
  zhat = Eigen::VectorXd::Zero(rows());
  y = Eigen::VectorXd::Zero(rows());
  xi = Eigen::VectorXd::Zero(width());
  g = Eigen::VectorXd::Zero(width());
}

Block1Result local_block1(const LocalQp& qp, const PenaltyState& pen) {
  require(pen.rho > 0.0 && pen.mu > 0.0, "penalties must be positive");
  const int n = qp.width();
  const int m = qp.rows();

  Eigen::VectorXd rhs(n + m);
  rhs.head(n) = -qp.p + pen.mu * qp.g - qp.xi;
  if (m > 0) rhs.tail(m) = qp.zhat - qp.y / pen.rho;

  Block1Result out;
  if (m == 0) {
    Eigen::MatrixXd H = qp.R;
    H.diagonal().array() += pen.mu;
    out.u = H.ldlt().solve(rhs.head(n));
    out.z.resize(0);
    return out;
  }
  const Eigen::VectorXd sol = build_kkt(qp, pen).partialPivLu().solve(rhs);
  out.u = sol.head(n);
  out.z = qp.zhat - qp.y / pen.rho + sol.tail(m) / pen.rho;
  return out;
}

Eigen::VectorXd project_upper(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                              double rho, const Eigen::VectorXd& d) {
  require(rho > 0.0, "rho must be positive");
  require(z.size() == y.size() && z.size() == d.size(),
          "projection size mismatch");
  return (z + y / rho).cwiseMin(d);
}

Eigen::VectorXd consensus_average(const std::vector<Eigen::VectorXd>& u_copies,
                                  const std::vector<Eigen::VectorXd>& xi_copies,
                                  double mu) {
  require(!u_copies.empty() && u_copies.size() == xi_copies.size(),
          "averaging needs matched, nonempty copy lists");
  require(mu > 0.0, "mu must be positive");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(u_copies.front().size());
  for (std::size_t k = 0; k < u_copies.size(); ++k)
    sum += u_copies[k] + xi_copies[k] / mu;
  return sum / static_cast<double>(u_copies.size());
}

void dual_update(LocalQp& qp, const PenaltyState& pen) {
  qp.y += pen.rho * (qp.z - qp.zhat);
  qp.xi += pen.mu * (qp.u - qp.g);
}

ResidualReport compute_residuals(const std::vector<LocalQp>& qps,
                                 const std::vector<Eigen::VectorXd>& g_prev,
                                 const PenaltyState& pen,
                                 const SolverSettings& settings) {
  require(g_prev.size() == qps.size(), "g_prev size mismatch");
  ResidualReport r;
  for (std::size_t i = 0; i < qps.size(); ++i) {
    const LocalQp& qp = qps[i];
    const Eigen::VectorXd Au = qp.A * qp.u;
    const Eigen::VectorXd Aty = qp.A.transpose() * qp.y;
    const Eigen::VectorXd Ru = qp.R * qp.u;

    // The reduced KKT system makes A*u equal the relaxed slack z exactly, so
    // the gap that certifies a^T u <= d at termination is the one against the
    // projected slack. Measuring against z would report 0 on violated rows and
    // feed a vanishing numerator to the penalty balancing below.
    r.r_pri1 = std::max(r.r_pri1, inf_norm(Au - qp.zhat));
    r.kappa_pri1 = std::max({r.kappa_pri1, inf_norm(Au), inf_norm(qp.zhat)});
    r.r_pri2 = std::max(r.r_pri2, inf_norm(qp.u - qp.g));
    r.kappa_pri2 = std::max({r.kappa_pri2, inf_norm(qp.u), inf_norm(qp.g)});
    // Stationarity of the local Lagrangian includes the consensus dual: at the
    // fixed point R u + p + A^T y = -xi, so leaving xi out would floor this
    // residual at |xi| on any coupled problem. That both blocks termination
    // and drives the rho balancing toward the floor while rows are still
    // violated.
    r.r_dual1 = std::max(r.r_dual1, inf_norm(Ru + qp.p + Aty + qp.xi));
    r.kappa_dual1 = std::max({r.kappa_dual1, inf_norm(Ru), inf_norm(qp.p),
                              inf_norm(Aty), inf_norm(qp.xi)});
    r.r_dual2 = std::max(r.r_dual2, pen.mu * inf_norm(qp.g - g_prev[i]));
    // xi starts at zero and converges to zero whenever no row is active, so
    // its norm alone would blow up the normalized consensus dual residual and
    // collapse mu. mu|g| keeps the scale proportional to the iterate like the
    // other kappas, so the normalized residual still vanishes in the tail.
    r.kappa_dual2 = std::max(
        r.kappa_dual2, std::max(inf_norm(qp.xi), pen.mu * inf_norm(qp.g)));
  }
  r.eps_pri1 = settings.eps_abs + settings.eps_rel * r.kappa_pri1;
  r.eps_pri2 = settings.eps_abs + settings.eps_rel * r.kappa_pri2;
  r.eps_dual1 = settings.eps_abs + settings.eps_rel * r.kappa_dual1;
  r.eps_dual2 = settings.eps_abs + settings.eps_rel * r.kappa_dual2;
  r.converged = r.r_pri1 <= r.eps_pri1 && r.r_pri2 <= r.eps_pri2 &&
                r.r_dual1 <= r.eps_dual1 && r.r_dual2 <= r.eps_dual2;
  return r;
}

PenaltyState adapt_penalties(const ResidualReport& res, const PenaltyState& pen,
                             const SolverSettings& settings) {
  PenaltyState out = pen;
  // A penalty whose primal residual already passes its threshold is left
  // alone: r_dual1 bottoms out at the consensus dual magnitude rather than 0,
  // so balancing against it after primal convergence would shrink rho toward
  // the floor and freeze the constraint duals mid-flight.
  const auto balanced = [&](double r_pri, double k_pri, double r_dual,
                            double k_dual, double eps_pri, double value) {
    if (r_pri <= 0.0 || k_pri <= 0.0 || r_dual <= 0.0 || k_dual <= 0.0)
      return value;
    if (r_pri <= eps_pri) return value;
    const double scaled = value * std::sqrt((r_pri / k_pri) / (r_dual / k_dual));
    return std::clamp(scaled, settings.penalty_min, settings.penalty_max);
  };
  out.rho = balanced(res.r_pri1, res.kappa_pri1, res.r_dual1, res.kappa_dual1,
                     res.eps_pri1, pen.rho);
  out.mu = balanced(res.r_pri2, res.kappa_pri2, res.r_dual2, res.kappa_dual2,
                    res.eps_pri2, pen.mu);
  return out;
}

namespace {

// The mailbox is the only channel between agents inside the loop: phase 1
// carries copy controls and consensus duals toward the copied agent, phase 2
// carries consensus views back toward everyone holding a copy.
struct Mailbox {
  struct Source {
    int holder;  // agent whose problem holds the copy
    int block;   // block position of the copied agent inside that problem
  };
  std::vector<std::vector<Source>> sources;      // per agent: who copies it
  std::vector<std::vector<Eigen::VectorXd>> u_in;   // phase 1 payloads
  std::vector<std::vector<Eigen::VectorXd>> xi_in;  // phase 1 payloads
  std::vector<std::vector<Eigen::VectorXd>> g_in;   // phase 2, aligned with
                                                    // the receiver's columns
  long phase1 = 0, phase2 = 0, pre = 0;
};

Mailbox build_mailbox(const std::vector<LocalQp>& qps) {
  const int n = static_cast<int>(qps.size());
  Mailbox mb;
  mb.sources.resize(n);
  mb.u_in.resize(n);
  mb.xi_in.resize(n);
  mb.g_in.resize(n);
  for (int j = 0; j < n; ++j) {
    require(!qps[j].columns.empty() && qps[j].columns[0] == j,
            "columns must start with the ego agent " + std::to_string(j));
    for (std::size_t b = 1; b < qps[j].columns.size(); ++b) {
      const int i = qps[j].columns[b];
      require(i >= 0 && i < n, "column refers to an unknown agent");
      mb.sources[i].push_back({j, static_cast<int>(b)});
    }
  }
  for (int i = 0; i < n; ++i) {
    const int m = qps[i].block_dim();
    mb.u_in[i].assign(mb.sources[i].size(), Eigen::VectorXd::Zero(m));
    mb.xi_in[i].assign(mb.sources[i].size(), Eigen::VectorXd::Zero(m));
    mb.g_in[i].assign(qps[i].columns.size() - 1, Eigen::VectorXd::Zero(m));
    // Pre-iteration exchange: each neighbor's state/constraint data crosses
    // the same edges once before the loop starts.
    mb.pre += static_cast<long>(qps[i].columns.size()) - 1;
  }
  return mb;
}

}  // namespace

SolveResult solve_decentralized(std::vector<LocalQp>& qps,
                                const SolverSettings& settings,
                                std::vector<TraceRow>* trace) {
  const int n = static_cast<int>(qps.size());
  require(n > 0, "no agents");
  for (auto& qp : qps) {
    require(qp.R.rows() == qp.R.cols() && qp.R.rows() == qp.p.size(),
            "inconsistent cost dimensions");
    require(qp.A.cols() == qp.R.rows() && qp.A.rows() == qp.d.size(),
            "inconsistent constraint dimensions");
    require(!qp.columns.empty() &&
                qp.width() % static_cast<int>(qp.columns.size()) == 0,
            "width must split evenly over the column agents");
    if (!qp.state_sized()) qp.reset_state();
  }

  Mailbox mb = build_mailbox(qps);
  PenaltyState pen{settings.rho0, settings.mu0};

  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> kkt(n);
  std::vector<Eigen::LDLT<Eigen::MatrixXd>> unconstrained(n);
  const auto factorize = [&](int i) {
    if (qps[i].rows() > 0) {
      kkt[i].compute(build_kkt(qps[i], pen));
    } else {
      Eigen::MatrixXd H = qps[i].R;
      H.diagonal().array() += pen.mu;
      unconstrained[i].compute(H);
    }
  };
  for (int i = 0; i < n; ++i) factorize(i);

  std::vector<Eigen::VectorXd> g_prev(n);
  for (int i = 0; i < n; ++i) g_prev[i] = qps[i].g;

  SolveResult result;
  result.penalties = pen;
  Eigen::VectorXd rhs, sol;

  int iter = 0;
  for (; iter < settings.max_iters; ++iter) {
    // Block 1: local equality-constrained solves.
    for (int i = 0; i < n; ++i) {
      LocalQp& qp = qps[i];
      const int w = qp.width();
      const int m = qp.rows();
      rhs.resize(w + m);
      rhs.head(w) = -qp.p + pen.mu * qp.g - qp.xi;
      if (m > 0) {
        rhs.tail(m) = qp.zhat - qp.y / pen.rho;
        sol = kkt[i].solve(rhs);
        qp.u = sol.head(w);
        qp.z = qp.zhat - qp.y / pen.rho + sol.tail(m) / pen.rho;
      } else {
        qp.u = unconstrained[i].solve(rhs.head(w));
      }
    }

    // Phase 1: every holder of a copy sends the copy and its consensus dual
    // to the copied agent.
    for (int i = 0; i < n; ++i) {
      const int m = qps[i].block_dim();
      for (std::size_t s = 0; s < mb.sources[i].size(); ++s) {
        const auto& src = mb.sources[i][s];
        mb.u_in[i][s] = qps[src.holder].u.segment(m * src.block, m);
        mb.xi_in[i][s] = qps[src.holder].xi.segment(m * src.block, m);
        ++mb.phase1;
      }
    }

    // Block 2: projection and consensus averaging.
    for (int i = 0; i < n; ++i) {
      LocalQp& qp = qps[i];
      const int m = qp.block_dim();
      if (qp.rows() > 0) qp.zhat = (qp.z + qp.y / pen.rho).cwiseMin(qp.d);
      Eigen::VectorXd sum = qp.u.head(m) + qp.xi.head(m) / pen.mu;
      for (std::size_t s = 0; s < mb.sources[i].size(); ++s)
        sum += mb.u_in[i][s] + mb.xi_in[i][s] / pen.mu;
      qp.g.head(m) = sum / (1.0 + static_cast<double>(mb.sources[i].size()));
    }

    // Phase 2: consensus views travel back to every copy holder.
    for (int i = 0; i < n; ++i) {
      const int m = qps[i].block_dim();
      for (std::size_t b = 1; b < qps[i].columns.size(); ++b) {
        mb.g_in[i][b - 1] = qps[qps[i].columns[b]].g.head(m);
        ++mb.phase2;
      }
    }

    // Dual ascent against the refreshed consensus view.
    for (int i = 0; i < n; ++i) {
      LocalQp& qp = qps[i];
      const int m = qp.block_dim();
      for (std::size_t b = 1; b < qp.columns.size(); ++b)
        qp.g.segment(m * static_cast<Eigen::Index>(b), m) = mb.g_in[i][b - 1];
      dual_update(qp, pen);
    }

    result.residuals = compute_residuals(qps, g_prev, pen, settings);
    for (int i = 0; i < n; ++i) g_prev[i] = qps[i].g;
    if (trace)
      trace->push_back({iter + 1, result.residuals.r_pri1, result.residuals.r_pri2,
                        result.residuals.r_dual1, result.residuals.r_dual2,
                        pen.rho, pen.mu});
    if (result.residuals.converged) {
      ++iter;
      break;
    }

    if (settings.adapt_interval > 0 && (iter + 1) % settings.adapt_interval == 0) {
      const PenaltyState cand = adapt_penalties(result.residuals, pen, settings);
      const double ratio_rho = std::max(cand.rho / pen.rho, pen.rho / cand.rho);
      const double ratio_mu = std::max(cand.mu / pen.mu, pen.mu / cand.mu);
      bool changed = false;
      if (ratio_rho > settings.refactor_ratio) {
        pen.rho = cand.rho;
        changed = true;
      }
      if (ratio_mu > settings.refactor_ratio) {
        pen.mu = cand.mu;
        changed = true;
      }
      if (changed)
        for (int i = 0; i < n; ++i) factorize(i);
    }
  }

  result.iterations = iter;
  result.converged = result.residuals.converged;
  result.penalties = pen;
  result.phase1_messages = mb.phase1;
  result.phase2_messages = mb.phase2;
  result.pre_messages = mb.pre;
  result.controls.resize(n);
  for (int i = 0; i < n; ++i)
    result.controls[i] = qps[i].g.head(qps[i].block_dim());
  return result;
}

}  // namespace dsmc
