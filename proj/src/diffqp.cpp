#include "dsmc/diffqp.hpp"

#include <cstring>
#include <set>
#include <stdexcept>
#include <string>

namespace dsmc {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("diffqp: " + msg);
}

// Distinct-row count among the active rows, by exact byte equality. When the
// saddle system is rank-deficient but its rank still covers every distinct
// active row, the deficiency comes from duplicates alone and the minimum-norm
// solution carries exact class sums.
int distinct_active(const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                    const std::vector<int>& act) {
  std::set<std::string> keys;
  for (int k : act) {
    std::string key((C.cols() + 1) * sizeof(double), '\0');
    Eigen::VectorXd row = C.row(k);
    std::memcpy(key.data(), row.data(), C.cols() * sizeof(double));
    std::memcpy(key.data() + C.cols() * sizeof(double), &d[k], sizeof(double));
    keys.insert(key);
  }
  return static_cast<int>(keys.size());
}

}  // namespace

KktSolution kkt_solve(const Eigen::MatrixXd& R, const Eigen::MatrixXd& C,
                      const Eigen::VectorXd& d, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& lambda,
                      const Eigen::VectorXd& grad_u, const DiffQpOptions& opt) {
  const int n = static_cast<int>(R.rows());
  const int m = static_cast<int>(C.rows());
  require(R.cols() == n && u.size() == n && grad_u.size() == n,
          "inconsistent primal dimensions");
  require((m == 0 || C.cols() == n) && d.size() == m && lambda.size() == m,
          "inconsistent row dimensions");

  KktSolution sol;
  sol.lambda = lambda;
  sol.dlambda = Eigen::VectorXd::Zero(m);
  sol.lambda_dlambda = Eigen::VectorXd::Zero(m);
  sol.active.assign(m, false);

  std::vector<int> act;
  for (int k = 0; k < m; ++k) {
    const double margin = d[k] - C.row(k).dot(u);
    if (margin <= opt.active_tol * (1.0 + std::abs(d[k]))) {
      sol.active[k] = true;
      act.push_back(k);
    }
  }
  const int na = static_cast<int>(act.size());

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + na, n + na);
  K.topLeftCorner(n, n) = R;
  for (int i = 0; i < na; ++i) {
    K.block(n + i, 0, 1, n) = C.row(act[i]);
    K.block(0, n + i, n, 1) = C.row(act[i]).transpose();
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + na);
  rhs.head(n) = -grad_u;

  // With R positive definite the saddle matrix is nonsingular exactly when
  // the active rows are linearly independent, so the row rank decides the
  // path. LU alone cannot: on an exactly singular but consistent system it
  // can return a finite zero-residual solution and a meaningless rcond.
  int row_rank = na;
  if (na > 0) {
    Eigen::MatrixXd rows_act(na, n);
    for (int i = 0; i < na; ++i) rows_act.row(i) = C.row(act[i]);
    row_rank = static_cast<int>(
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(rows_act)
            .rank());
  }

  Eigen::VectorXd x;
  bool solved = false;
  if (row_rank == na) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
    if (lu.rcond() > opt.rcond_limit) {
      x = lu.solve(rhs);
      const double scale =
          1.0 + rhs.cwiseAbs().maxCoeff() + x.cwiseAbs().maxCoeff();
      solved = x.allFinite() &&
               (K * x - rhs).cwiseAbs().maxCoeff() <= 1e-8 * scale;
    }
  }
  if (!solved) {
    // Minimum-norm solution. Rank deficiency that covers every distinct
    // active row comes from duplicates alone and stays exact under class
    // aggregation; anything beyond that is reported as degraded.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(K);
    x = cod.solve(rhs);
    sol.degraded = cod.rank() < n + distinct_active(C, d, act);
  }

  sol.du = x.head(n);
  for (int i = 0; i < na; ++i) {
    const double w = x[n + i];
    sol.lambda_dlambda[act[i]] = w;
    if (lambda[act[i]] > 0.0) sol.dlambda[act[i]] = w / lambda[act[i]];
  }
  return sol;
}

QpGradients qp_gradients(const KktSolution& sol, const Eigen::VectorXd& u) {
  QpGradients g;
  g.dq = sol.du;
  g.dd = -sol.lambda_dlambda;
  g.dR = 0.5 * (sol.du * u.transpose() + u * sol.du.transpose());
  g.dC = sol.lambda * sol.du.transpose() +
         sol.lambda_dlambda * u.transpose();
  return g;
}

AggregatedDuals aggregate_duplicates(const Eigen::VectorXd& lambda_dup,
                                     const Eigen::VectorXd& lambda_dlambda_dup,
                                     const DuplicateMap& map) {
  AggregatedDuals out;
  out.lambda = map.aggregate(lambda_dup);
  out.lambda_dlambda = map.aggregate(lambda_dlambda_dup);
  return out;
}

QpLayerGrads backprop_through_layer(const QpLayerCache& cache,
                                    const Eigen::VectorXd& grad_u,
                                    const DiffQpOptions& opt) {
  Eigen::VectorXd lam = cache.map.aggregate(cache.lambda_dup).cwiseMax(0.0);
  // Zero multipliers on inactive classes: an unconverged forward pass can
  // leave dust on rows with slack, which would bleed into dC.
  for (int c = 0; c < cache.map.classes(); ++c) {
    const double margin =
        cache.d_distinct[c] - cache.C_distinct.row(c).dot(cache.u);
    if (margin > opt.active_tol * (1.0 + std::abs(cache.d_distinct[c])))
      lam[c] = 0.0;
  }

  const KktSolution sol = kkt_solve(cache.R, cache.C_distinct, cache.d_distinct,
                                    cache.u, lam, grad_u, opt);
  const QpGradients g = qp_gradients(sol, cache.u);

  QpLayerGrads out;
  out.dq = g.dq;
  out.dd_distinct = g.dd;
  out.dC_distinct = g.dC;
  out.degraded = sol.degraded;
  return out;
}

}  // namespace dsmc
