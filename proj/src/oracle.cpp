#include "dsmc/oracle.hpp"

#include <cstring>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsmc {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("oracle: " + msg);
}

constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;

bool next_combination(std::vector<int>& idx, int m) {
  const int k = static_cast<int>(idx.size());
  for (int i = k - 1; i >= 0; --i) {
    if (idx[i] < m - k + i) {
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

OracleResult solve_centralized_oracle(const Eigen::MatrixXd& C,
                                      const Eigen::VectorXd& d,
                                      const Eigen::MatrixXd& R,
                                      const Eigen::VectorXd& p) {
  const int n = static_cast<int>(R.rows());
  const int m = static_cast<int>(C.rows());
  require(R.cols() == n && p.size() == n, "inconsistent cost dimensions");
  require((m == 0 || C.cols() == n) && d.size() == m,
          "inconsistent constraint dimensions");
  require(n <= 24, "enumeration oracle limited to 24 variables");

  // Collapse bit-identical rows; one active copy stands in for the class.
  std::vector<int> rep;  // distinct row -> original index
  {
    std::map<std::string, int> seen;
    for (int k = 0; k < m; ++k) {
      std::string key((C.cols() + 1) * sizeof(double), '\0');
      std::memcpy(key.data(), C.row(k).eval().data(), C.cols() * sizeof(double));
      std::memcpy(key.data() + C.cols() * sizeof(double), &d[k], sizeof(double));
      if (seen.try_emplace(key, k).second) rep.push_back(k);
    }
  }
  const int md = static_cast<int>(rep.size());
  require(md <= 20, "enumeration oracle limited to 20 distinct rows");

  OracleResult out;
  out.lambda = Eigen::VectorXd::Zero(m);

  const Eigen::LLT<Eigen::MatrixXd> llt(R);
  require(llt.info() == Eigen::Success, "R must be positive definite");

  const auto primal_feasible = [&](const Eigen::VectorXd& u) {
    for (int k = 0; k < m; ++k)
      if (C.row(k).dot(u) > d[k] + kPrimalTol * (1.0 + std::abs(d[k])))
        return false;
    return true;
  };

  for (int size = 0; size <= std::min(n, md); ++size) {
    if (size == 0) {
      const Eigen::VectorXd u = llt.solve(-p);
      if (primal_feasible(u)) {
        out.u = u;
        out.feasible = true;
        return out;
      }
      continue;
    }
    std::vector<int> idx(size);
    for (int i = 0; i < size; ++i) idx[i] = i;
    do {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + size, n + size);
      K.topLeftCorner(n, n) = R;
      for (int i = 0; i < size; ++i) {
        K.block(n + i, 0, 1, n) = C.row(rep[idx[i]]);
        K.block(0, n + i, n, 1) = C.row(rep[idx[i]]).transpose();
      }
      Eigen::VectorXd rhs(n + size);
      rhs.head(n) = -p;
      for (int i = 0; i < size; ++i) rhs[n + i] = d[rep[idx[i]]];

      const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
      if (!lu.isInvertible()) continue;
      const Eigen::VectorXd sol = lu.solve(rhs);
      const Eigen::VectorXd u = sol.head(n);
      const Eigen::VectorXd lam = sol.tail(size);
      if ((lam.array() < -kDualTol * (1.0 + lam.cwiseAbs().maxCoeff())).any())
        continue;
      if (!primal_feasible(u)) continue;
      out.u = u;
      for (int i = 0; i < size; ++i) out.lambda[rep[idx[i]]] = lam[i];
      out.feasible = true;
      return out;
    } while (next_combination(idx, md));
  }
  return out;  // feasible == false: no KKT-consistent active set exists
}

}  // namespace dsmc
