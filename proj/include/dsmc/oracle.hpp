#pragma once

#include <Eigen/Dense>

namespace dsmc {

/// Exact reference solution of min 1/2 u^T R u + p^T u  s.t.  C u <= d,
/// found by enumerating candidate active sets in increasing size and
/// returning the first KKT-consistent one (unique optimum since R is
/// positive definite). Exponential worst case; intended for verification on
/// instances with at most 24 variables and 20 distinct rows. Exact duplicate
/// rows are collapsed before enumeration; the returned multiplier vector
/// places each class's multiplier on the first copy and zero on the others.
struct OracleResult {
  Eigen::VectorXd u;
  Eigen::VectorXd lambda;  // one entry per input row
  bool feasible = false;
};

OracleResult solve_centralized_oracle(const Eigen::MatrixXd& C,
                                      const Eigen::VectorXd& d,
                                      const Eigen::MatrixXd& R,
                                      const Eigen::VectorXd& p);

}  // namespace dsmc
