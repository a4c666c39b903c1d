#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "dsmc/instances.hpp"
#include "dsmc/oracle.hpp"
#include "dsmc/rng.hpp"
#include "dsmc/solver.hpp"

using namespace dsmc;

namespace {

LocalQp make_qp(const Eigen::MatrixXd& R, const Eigen::VectorXd& p,
                const Eigen::MatrixXd& A, const Eigen::VectorXd& d,
                std::vector<int> columns) {
  LocalQp qp;
  qp.R = R;
  qp.p = p;
  qp.A = A;
  qp.d = d;
  qp.columns = std::move(columns);
  qp.reset_state();
  return qp;
}

LocalQp scalar_qp(double R, double p, double a, double d) {
  return make_qp(Eigen::MatrixXd::Constant(1, 1, R),
                 Eigen::VectorXd::Constant(1, p),
                 Eigen::MatrixXd::Constant(1, 1, a),
                 Eigen::VectorXd::Constant(1, d), {0});
}

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST_CASE("equality step: all-zero state is a fixed point of a centered QP") {
  LocalQp qp = scalar_qp(1.0, 0.0, 1.0, 0.0);
  PenaltyState pen;  // rho = mu = 1
  Block1Result r = local_block1(qp, pen);
  CHECK(r.u[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r.z[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("equality step: hand-solved 1x1 saddle system") {
  // R = 1, mu = 1, rho = 1, p = 2, everything else zero:
  //   [[2, 1], [1, -1]] [u; nu] = [-2; 0]  =>  u = nu = -2/3,
  //   z = zhat - y/rho + nu/rho = -2/3.
  LocalQp qp = scalar_qp(1.0, 2.0, 1.0, 0.0);
  PenaltyState pen;
  Block1Result r = local_block1(qp, pen);
  CHECK(r.u[0] == doctest::Approx(-2.0 / 3.0).epsilon(1e-14));
  CHECK(r.z[0] == doctest::Approx(-2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("equality step without rows reduces to the consensus-pulled optimum") {
  // u = (R + mu I)^{-1} (-p + mu g - xi) = (-2 + 1 - 0.5) / 2 = -0.75.
  LocalQp qp = make_qp(Eigen::MatrixXd::Constant(1, 1, 1.0), vec1(2.0),
                       Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), {0});
  qp.g = vec1(1.0);
  qp.xi = vec1(0.5);
  PenaltyState pen;
  Block1Result r = local_block1(qp, pen);
  CHECK(r.u[0] == doctest::Approx(-0.75).epsilon(1e-14));
  CHECK(r.z.size() == 0);
}

TEST_CASE("upper projection clips at the bound and shifts by the dual") {
  Eigen::VectorXd z(3), y(3), d(3);
  z << 0.4, 0.4, -1.0;
  y << 0.2, 0.2, 0.0;
  d << 0.3, 1.0, 0.0;
  Eigen::VectorXd out = project_upper(z, y, 2.0, d);
  CHECK(out[0] == doctest::Approx(0.3).epsilon(1e-15));  // clipped
  CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-15));  // interior
  CHECK(out[2] == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("consensus average shifts each copy by its scaled dual") {
  // Equal duals of zero: plain mean.
  CHECK(consensus_average({vec1(1.0), vec1(3.0)}, {vec1(0.0), vec1(0.0)},
                          1.0)[0] == doctest::Approx(2.0).epsilon(1e-15));
  // Single copy: u + xi/mu.
  CHECK(consensus_average({vec1(5.0)}, {vec1(1.0)}, 2.0)[0] ==
        doctest::Approx(5.5).epsilon(1e-15));
  // Duals that cancel leave the mean untouched.
  CHECK(consensus_average({vec1(1.0), vec1(1.0)}, {vec1(2.0), vec1(-2.0)},
                          2.0)[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("dual ascent steps scale with their penalties") {
  LocalQp qp = scalar_qp(1.0, 0.0, 1.0, 0.0);
  qp.z = vec1(0.6);
  qp.zhat = vec1(0.1);
  qp.y = vec1(1.0);
  qp.u = vec1(0.4);
  qp.g = vec1(0.5);
  PenaltyState pen;
  pen.rho = 2.0;
  pen.mu = 10.0;
  dual_update(qp, pen);
  CHECK(qp.y[0] == doctest::Approx(1.0 + 2.0 * 0.5).epsilon(1e-15));
  CHECK(qp.xi[0] == doctest::Approx(10.0 * -0.1).epsilon(1e-15));
}

TEST_CASE("residuals: infinity norms and scale factors") {
  SolverSettings settings;
  PenaltyState pen;

  LocalQp qp = make_qp(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2),
                       Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                       {0});
  qp.u << 1e-3, -2e-3;
  qp.g = qp.u;
  std::vector<LocalQp> qps = {qp};
  std::vector<Eigen::VectorXd> g_prev = {qp.g};

  ResidualReport res = compute_residuals(qps, g_prev, pen, settings);
  CHECK(res.r_pri1 == doctest::Approx(2e-3).epsilon(1e-12));
  CHECK(res.kappa_pri1 == doctest::Approx(2e-3).epsilon(1e-12));
  CHECK(res.eps_pri1 ==
        doctest::Approx(settings.eps_abs + settings.eps_rel * 2e-3));
  CHECK(res.r_pri2 == 0.0);
  CHECK(res.r_dual2 == 0.0);
  CHECK_FALSE(res.converged);  // r_pri1 = 2e-3 > 1e-4 + 1e-4 * 2e-3

  // kappa_pri1 takes the larger of |A u| and |zhat|.
  qps[0].u << 4.0, 0.0;
  qps[0].zhat << 5.0, 0.0;
  qps[0].g = qps[0].u;
  g_prev[0] = qps[0].g;
  res = compute_residuals(qps, g_prev, pen, settings);
  CHECK(res.kappa_pri1 == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("residuals include the consensus dual in local stationarity") {
  SolverSettings settings;
  PenaltyState pen;
  LocalQp qp = make_qp(Eigen::MatrixXd::Identity(1, 1), vec1(1.0),
                       Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), {0});
  qp.u = vec1(-1.0);  // R u + p = 0 exactly
  qp.g = qp.u;
  qp.xi = vec1(0.25);
  std::vector<LocalQp> qps = {qp};
  std::vector<Eigen::VectorXd> g_prev = {qp.g};
  ResidualReport res = compute_residuals(qps, g_prev, pen, settings);
  CHECK(res.r_dual1 == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("an exact unconstrained solution is certified converged") {
  SolverSettings settings;
  PenaltyState pen;
  LocalQp qp = make_qp(Eigen::MatrixXd::Identity(2, 2),
                       Eigen::VectorXd::Ones(2), Eigen::MatrixXd(0, 2),
                       Eigen::VectorXd(0), {0});
  qp.u = -Eigen::VectorXd::Ones(2);
  qp.g = qp.u;
  std::vector<LocalQp> qps = {qp};
  std::vector<Eigen::VectorXd> g_prev = {qp.g};
  ResidualReport res = compute_residuals(qps, g_prev, pen, settings);
  CHECK(res.r_pri1 == 0.0);
  CHECK(res.r_dual1 == 0.0);
  CHECK(res.converged);
}

TEST_CASE("penalty balancing follows the square root of the residual ratio") {
  SolverSettings settings;
  PenaltyState pen;
  pen.rho = 3.0;
  pen.mu = 2.0;

  ResidualReport res;
  res.eps_pri1 = res.eps_pri2 = 1e-6;
  res.kappa_pri1 = res.kappa_dual1 = 1.0;
  res.kappa_pri2 = res.kappa_dual2 = 1.0;

  // Balanced residuals leave both penalties alone.
  res.r_pri1 = res.r_dual1 = 0.2;
  res.r_pri2 = res.r_dual2 = 0.1;
  PenaltyState out = adapt_penalties(res, pen, settings);
  CHECK(out.rho == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(out.mu == doctest::Approx(2.0).epsilon(1e-12));

  // Primal four times the dual: the penalty doubles.
  res.r_pri1 = 0.4;
  res.r_dual1 = 0.1;
  out = adapt_penalties(res, pen, settings);
  CHECK(out.rho == doctest::Approx(6.0).epsilon(1e-12));

  // Dual four times the primal: halves.
  res.r_pri1 = 0.1;
  res.r_dual1 = 0.4;
  out = adapt_penalties(res, pen, settings);
  CHECK(out.rho == doctest::Approx(1.5).epsilon(1e-12));

  // mu reacts to the consensus pair the same way.
  res.r_pri1 = res.r_dual1 = 0.2;
  res.r_pri2 = 0.4;
  res.r_dual2 = 0.1;
  out = adapt_penalties(res, pen, settings);
  CHECK(out.rho == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(out.mu == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("penalty balancing guards: zeros, converged primal, clamping") {
  SolverSettings settings;
  PenaltyState pen;
  pen.rho = 3.0;
  pen.mu = 2.0;

  ResidualReport res;
  res.kappa_pri1 = res.kappa_dual1 = 1.0;
  res.kappa_pri2 = res.kappa_dual2 = 1.0;
  res.eps_pri1 = res.eps_pri2 = 1e-4;

  // A vanished dual residual would send the ratio to infinity: unchanged.
  res.r_pri1 = 0.4;
  res.r_dual1 = 0.0;
  CHECK(adapt_penalties(res, pen, settings).rho == 3.0);

  // Everything zero: unchanged.
  res = ResidualReport{};
  CHECK(adapt_penalties(res, pen, settings).rho == 3.0);
  CHECK(adapt_penalties(res, pen, settings).mu == 2.0);

  // A primal residual already below its threshold leaves the penalty alone
  // even when the dual residual is large.
  res.kappa_pri1 = res.kappa_dual1 = 1.0;
  res.eps_pri1 = 1e-4;
  res.r_pri1 = 1e-9;
  res.r_dual1 = 0.5;
  CHECK(adapt_penalties(res, pen, settings).rho == 3.0);

  // The adopted value never leaves [penalty_min, penalty_max].
  res.eps_pri1 = 1e-9;
  res.r_pri1 = 1.0;
  res.r_dual1 = 1e-12;
  PenaltyState big;
  big.rho = 1e6;
  big.mu = 1.0;
  CHECK(adapt_penalties(res, big, settings).rho == settings.penalty_max);
}

TEST_CASE("solve: single agent without rows reaches the unconstrained optimum") {
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd p(2);
  p << 1.0, 1.0;
  std::vector<LocalQp> qps = {
      make_qp(R, p, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), {0})};
  SolverSettings settings;
  settings.eps_abs = settings.eps_rel = 1e-9;
  settings.max_iters = 2000;
  SolveResult res = solve_decentralized(qps, settings);
  CHECK(res.converged);
  REQUIRE(res.controls.size() == 1);
  CHECK(res.controls[0][0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(res.controls[0][1] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("solve: a binding row is enforced, not just approached") {
  // min 1/2|u|^2 + u_x subject to u_x <= -2: optimum (-2, 0), multiplier 1.
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd p(2);
  p << 1.0, 0.0;
  Eigen::MatrixXd A(1, 2);
  A << 1.0, 0.0;
  std::vector<LocalQp> qps = {make_qp(R, p, A, vec1(-2.0), {0})};
  SolverSettings settings;
  settings.eps_abs = settings.eps_rel = 1e-9;
  settings.max_iters = 5000;
  SolveResult res = solve_decentralized(qps, settings);
  CHECK(res.converged);
  CHECK(res.controls[0][0] == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(res.controls[0][1] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(qps[0].y[0] == doctest::Approx(1.0).epsilon(1e-4));
  // Certified feasible within the reported tolerance.
  CHECK(res.controls[0][0] <= -2.0 + res.residuals.eps_pri1 +
                                  res.residuals.eps_pri2);
}

TEST_CASE("solve matches the centralized oracle on random teams") {
  RandomStream rs(mix64(11, 0xBEEFULL));
  SolverSettings settings;
  settings.eps_abs = settings.eps_rel = 1e-5;
  settings.max_iters = 4000;

  int checked = 0;
  for (int k = 0; k < 25; ++k) {
    InstanceOptions io;
    io.n_agents = rs.uniform_int(2, 5);
    io.r = rs.uniform_int(1, io.n_agents - 1);
    io.n_obstacles = rs.uniform_int(0, 2);
    TeamInstance inst = make_random_team_instance(rs, io);

    OracleResult ref = solve_centralized_oracle(
        inst.stacked.C_distinct, inst.stacked.d_distinct, inst.R, inst.p);
    if (!ref.feasible) continue;

    SolveResult res = solve_decentralized(inst.qps, settings);
    CHECK(res.converged);

    Eigen::VectorXd u(2 * io.n_agents);
    for (int i = 0; i < io.n_agents; ++i) u.segment<2>(2 * i) = res.controls[i];
    CHECK((u - ref.u).cwiseAbs().maxCoeff() < 1e-3);

    // Converged runs certify their rows.
    const Eigen::VectorXd slack =
        inst.stacked.C_distinct * u - inst.stacked.d_distinct;
    CHECK(slack.maxCoeff() < 5e-4);
    ++checked;
  }
  CHECK(checked >= 15);
}

TEST_CASE("with fixed penalties the infeasibility contracts over iterations") {
  RandomStream rs(mix64(21, 0xA11CEULL));
  SolverSettings settings;
  settings.eps_abs = settings.eps_rel = 0.0;  // never terminate early
  settings.max_iters = 200;
  settings.adapt_interval = 0;  // penalties stay fixed

  for (int k = 0; k < 5; ++k) {
    InstanceOptions io;
    io.n_agents = rs.uniform_int(2, 4);
    io.r = rs.uniform_int(1, io.n_agents - 1);
    io.n_obstacles = 1;
    TeamInstance inst = make_random_team_instance(rs, io);

    std::vector<TraceRow> trace;
    SolveResult res = solve_decentralized(inst.qps, settings, &trace);
    CHECK_FALSE(res.converged);
    REQUIRE((int)trace.size() == 200);
    CHECK(trace.front().iter == 1);
    CHECK(trace.back().iter == 200);
    CHECK(trace.back().rho == trace.front().rho);  // adaptation off
    const double start = std::max(trace.front().r_pri1, trace.front().r_pri2);
    const double end = std::max(trace.back().r_pri1, trace.back().r_pri2);
    CHECK(end < start);
  }
}

TEST_CASE("message counts: two phases per iteration plus one state exchange") {
  // Three agents, complete copy layout: 6 directed edges.
  const int n = 3;
  std::vector<LocalQp> qps;
  for (int i = 0; i < n; ++i) {
    std::vector<int> cols = {i};
    for (int j = 0; j < n; ++j)
      if (j != i) cols.push_back(j);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    R.topLeftCorner(2, 2) = Eigen::Matrix2d::Identity();
    Eigen::VectorXd p = Eigen::VectorXd::Zero(2 * n);
    p[0] = 0.5 + i;
    qps.push_back(make_qp(R, p, Eigen::MatrixXd(0, 2 * n),
                          Eigen::VectorXd(0), cols));
  }
  SolverSettings settings;
  settings.eps_abs = settings.eps_rel = 0.0;
  settings.max_iters = 7;
  settings.adapt_interval = 0;
  SolveResult res = solve_decentralized(qps, settings);
  CHECK(res.iterations == 7);
  CHECK(res.pre_messages == 6);
  CHECK(res.phase1_messages == 6 * 7);
  CHECK(res.phase2_messages == 6 * 7);
}

TEST_CASE("agents without shared structure solve exactly as they would alone") {
  auto make_a = [] {
    Eigen::MatrixXd R(2, 2);
    R << 2.0, 0.3, 0.3, 1.0;
    Eigen::VectorXd p(2);
    p << 1.0, -1.0;
    Eigen::MatrixXd A(1, 2);
    A << 1.0, 0.2;
    return make_qp(R, p, A, vec1(-0.5), {0});
  };
  auto make_b = [](int label) {
    Eigen::MatrixXd R(2, 2);
    R << 1.5, 0.1, 0.1, 0.8;
    Eigen::VectorXd p(2);
    p << -0.4, 0.7;
    Eigen::MatrixXd A(1, 2);
    A << 0.3, -1.0;
    return make_qp(R, p, A, vec1(0.2), {label});
  };

  SolverSettings settings;
  settings.eps_abs = settings.eps_rel = 1e-14;
  settings.max_iters = 37;
  settings.adapt_interval = 0;

  std::vector<LocalQp> joint = {make_a(), make_b(1)};
  SolveResult both = solve_decentralized(joint, settings);

  std::vector<LocalQp> only_a = {make_a()};
  SolveResult ra = solve_decentralized(only_a, settings);
  std::vector<LocalQp> only_b = {make_b(0)};
  SolveResult rb = solve_decentralized(only_b, settings);

  // Bitwise: the joint run must not mix the agents in any way.
  CHECK(both.controls[0][0] == ra.controls[0][0]);
  CHECK(both.controls[0][1] == ra.controls[0][1]);
  CHECK(both.controls[1][0] == rb.controls[0][0]);
  CHECK(both.controls[1][1] == rb.controls[0][1]);
}

TEST_CASE("reruns are bit-identical and warm starts keep the answer") {
  RandomStream rs(mix64(5, 0xF00DULL));
  InstanceOptions io;
  io.n_agents = 3;
  io.r = 2;
  io.n_obstacles = 1;
  TeamInstance inst = make_random_team_instance(rs, io);
  SolverSettings settings;
  settings.eps_abs = settings.eps_rel = 1e-6;
  settings.max_iters = 4000;

  std::vector<LocalQp> cold = inst.qps;
  SolveResult first = solve_decentralized(cold, settings);
  CHECK(first.converged);

  std::vector<LocalQp> again = inst.qps;
  SolveResult repeat = solve_decentralized(again, settings);
  CHECK(repeat.iterations == first.iterations);
  for (int i = 0; i < 3; ++i) {
    CHECK(repeat.controls[i][0] == first.controls[i][0]);
    CHECK(repeat.controls[i][1] == first.controls[i][1]);
  }

  // Warm start from the converged state: no worse, same answer.
  SolveResult warm = solve_decentralized(cold, settings);
  CHECK(warm.iterations <= first.iterations);
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(warm.controls[i][0] - first.controls[i][0]) < 1e-4);
}

TEST_CASE("reset_state sizes the splitting state to the problem") {
  LocalQp qp = scalar_qp(1.0, 0.0, 1.0, 0.0);
  CHECK(qp.state_sized());
  qp.A = Eigen::MatrixXd::Zero(3, 1);
  qp.d = Eigen::VectorXd::Zero(3);
  CHECK_FALSE(qp.state_sized());
  qp.reset_state();
  CHECK(qp.state_sized());
  CHECK(qp.y.size() == 3);
  CHECK(qp.y.cwiseAbs().maxCoeff() == 0.0);
}
