// End-to-end verification of the toolkit's headline properties. Each
// criterion prints exactly one PASS/FAIL line; the process exits nonzero if
// any selected criterion fails. Run with --criterion N to check one.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsmc/barriers.hpp"
#include "dsmc/diffqp.hpp"
#include "dsmc/dynamics.hpp"
#include "dsmc/instances.hpp"
#include "dsmc/learner.hpp"
#include "dsmc/metrics.hpp"
#include "dsmc/oracle.hpp"
#include "dsmc/rng.hpp"
#include "dsmc/runner.hpp"
#include "dsmc/solver.hpp"
#include "dsmc/tasks.hpp"
#include "dsmc/topology.hpp"

namespace fs = std::filesystem;
using namespace dsmc;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return std::string(buf);
}

fs::path scratch_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() /
                 ("dsmc_accept_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Decentralized solver matches the exact reference on random feasible
//    team instances.

bool criterion1(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  RandomStream rs(mix64(7, 0x50c7eULL));

  SolverSettings settings;
  settings.eps_abs = 1e-5;
  settings.eps_rel = 1e-5;
  settings.max_iters = 4000;

  const int count = 200;
  double worst = 0.0;
  int within = 0;
  for (int k = 0; k < count; ++k) {
    InstanceOptions io;
    io.n_agents = rs.uniform_int(2, 5);
    io.r = rs.uniform_int(1, io.n_agents - 1);
    io.n_obstacles = rs.uniform_int(0, 2);
    TeamInstance inst = make_random_team_instance(rs, io);

    SolveResult res = solve_decentralized(inst.qps, settings);
    OracleResult ref = solve_centralized_oracle(
        inst.stacked.C_distinct, inst.stacked.d_distinct, inst.R, inst.p);
    if (!ref.feasible) {
      detail = "reference solver rejected a generated instance";
      return false;
    }
    Eigen::VectorXd u(kStateDim * io.n_agents);
    for (int i = 0; i < io.n_agents; ++i) u.segment<2>(2 * i) = res.controls[i];
    const double err = (u - ref.u).lpNorm<Eigen::Infinity>();
    worst = std::max(worst, err);
    if (err <= 1e-3) ++within;
  }
  const double secs = seconds_since(t0);
  detail = fmt("%d/%d within 1e-3, worst %.3g, %.1fs", within, count, worst,
               secs);
  return within == count && secs <= 60.0;
}

// ---------------------------------------------------------------------------
// 2. Duplicate-row KKT differentiation plus class aggregation equals the
//    distinct-row pipeline.

struct RandomQp {
  Eigen::MatrixXd R, C;
  Eigen::VectorXd p, d;
};

RandomQp random_qp(RandomStream& rs, int n, int m) {
  RandomQp qp;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rs.normal();
  qp.R = A.transpose() * A + Eigen::MatrixXd::Identity(n, n);
  qp.p = Eigen::VectorXd::NullaryExpr(n, [&](int) { return 3.0 * rs.normal(); });
  qp.C = Eigen::MatrixXd::NullaryExpr(m, n, [&](int, int) { return rs.normal(); });
  qp.d = Eigen::VectorXd::NullaryExpr(m, [&](int) { return rs.uniform(-0.5, 0.5); });
  return qp;
}

bool criterion2(std::string& detail) {
  RandomStream rs(mix64(11, 0x7e04e31ULL));
  const DiffQpOptions opt;
  double worst = 0.0;
  int done = 0, attempts = 0;

  while (done < 100 && ++attempts < 4000) {
    const int n = rs.uniform_int(2, 4);
    const int m = rs.uniform_int(1, 3);
    RandomQp qp = random_qp(rs, n, m);
    OracleResult ref = solve_centralized_oracle(qp.C, qp.d, qp.R, qp.p);
    if (!ref.feasible) continue;

    // Count strongly active distinct rows; need at least one to duplicate.
    std::vector<int> active;
    for (int k = 0; k < m; ++k)
      if (ref.lambda[k] > 1e-3) active.push_back(k);
    if (active.empty()) continue;
    // LICQ on the distinct problem: active rows linearly independent.
    Eigen::MatrixXd Cact(active.size(), n);
    for (size_t a = 0; a < active.size(); ++a) Cact.row(a) = qp.C.row(active[a]);
    if (Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(Cact).rank() <
        (int)active.size())
      continue;

    // Stack duplicates: row k appears copies[k] times, and at least one
    // active row is genuinely duplicated so the aggregation is exercised.
    DuplicateMap map;
    std::vector<int> copies(m);
    for (int k = 0; k < m; ++k) copies[k] = rs.uniform_int(1, 3);
    copies[active[0]] = std::max(copies[active[0]], 2);
    int total = 0;
    for (int k = 0; k < m; ++k) total += copies[k];
    Eigen::MatrixXd Cdup(total, n);
    Eigen::VectorXd ddup(total), lam_dup(total);
    map.members.assign(m, {});
    int row = 0;
    for (int k = 0; k < m; ++k)
      for (int c = 0; c < copies[k]; ++c, ++row) {
        Cdup.row(row) = qp.C.row(k);
        ddup[row] = qp.d[k];
        lam_dup[row] = ref.lambda[k] / copies[k];  // any split with class sum
        map.class_of.push_back(k);
        map.members[k].push_back(row);
      }

    const Eigen::VectorXd grad_u =
        Eigen::VectorXd::NullaryExpr(n, [&](int) { return rs.normal(); });

    const KktSolution dist =
        kkt_solve(qp.R, qp.C, qp.d, ref.u, ref.lambda, grad_u, opt);
    const KktSolution dup =
        kkt_solve(qp.R, Cdup, ddup, ref.u, lam_dup, grad_u, opt);
    const AggregatedDuals agg =
        aggregate_duplicates(dup.lambda, dup.lambda_dlambda, map);

    const QpGradients gd = qp_gradients(dist, ref.u);
    // Distinct-row gradients reassembled from the duplicate pass.
    const Eigen::VectorXd dq_dup = dup.du;
    const Eigen::VectorXd dd_dup = -agg.lambda_dlambda;
    const Eigen::MatrixXd dR_dup =
        0.5 * (dup.du * ref.u.transpose() + ref.u * dup.du.transpose());
    const Eigen::MatrixXd dC_dup = agg.lambda * dup.du.transpose() +
                                   agg.lambda_dlambda * ref.u.transpose();

    double err = (gd.dq - dq_dup).lpNorm<Eigen::Infinity>();
    err = std::max(err, (gd.dd - dd_dup).lpNorm<Eigen::Infinity>());
    err = std::max(err, (gd.dR - dR_dup).lpNorm<Eigen::Infinity>());
    err = std::max(err, (gd.dC - dC_dup).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, err);
    ++done;
  }
  detail = fmt("%d instances, worst gap %.3g", done, worst);
  return done == 100 && worst <= 1e-6;
}

// ---------------------------------------------------------------------------
// 3. Analytic QP data gradients match central finite differences away from
//    active-set switches.

bool criterion3(std::string& detail) {
  RandomStream rs(mix64(13, 0x9aadULL));
  const DiffQpOptions opt;
  const double h = 1e-5;
  double worst = 0.0;
  int done = 0, attempts = 0;

  while (done < 100 && ++attempts < 4000) {
    const int n = rs.uniform_int(2, 4);
    const int m = rs.uniform_int(1, 4);
    RandomQp qp = random_qp(rs, n, m);
    OracleResult ref = solve_centralized_oracle(qp.C, qp.d, qp.R, qp.p);
    if (!ref.feasible) continue;

    // Stay at least 1e-4 from an active-set switch: every row is either
    // strongly active or clearly slack.
    bool near_switch = false;
    for (int k = 0; k < m; ++k) {
      const double margin = qp.d[k] - qp.C.row(k).dot(ref.u);
      const bool strong = ref.lambda[k] > 1e-4;
      const bool slack = margin > 1e-4;
      if (!(strong || slack) || (strong && margin > 1e-6)) near_switch = true;
    }
    if (near_switch) continue;

    const Eigen::VectorXd g =
        Eigen::VectorXd::NullaryExpr(n, [&](int) { return rs.normal(); });
    const KktSolution sol =
        kkt_solve(qp.R, qp.C, qp.d, ref.u, ref.lambda, g, opt);
    if (sol.degraded) continue;
    const QpGradients an = qp_gradients(sol, ref.u);

    const auto loss_at = [&](const RandomQp& q) {
      OracleResult r2 = solve_centralized_oracle(q.C, q.d, q.R, q.p);
      return g.dot(r2.u);
    };
    const auto check = [&](double analytic, double fd) {
      const double err = std::abs(analytic - fd) / std::max(1e-4, std::abs(fd));
      worst = std::max(worst, err);
    };

    for (int k = 0; k < n; ++k) {  // dq
      RandomQp qp_p = qp, qp_m = qp;
      qp_p.p[k] += h;
      qp_m.p[k] -= h;
      check(an.dq[k], (loss_at(qp_p) - loss_at(qp_m)) / (2 * h));
    }
    for (int k = 0; k < m; ++k) {  // dd
      RandomQp qp_p = qp, qp_m = qp;
      qp_p.d[k] += h;
      qp_m.d[k] -= h;
      check(an.dd[k], (loss_at(qp_p) - loss_at(qp_m)) / (2 * h));
    }
    for (int probe = 0; probe < 4; ++probe) {  // dR, symmetric perturbation
      const int k = rs.uniform_int(0, n - 1), l = rs.uniform_int(0, n - 1);
      RandomQp qp_p = qp, qp_m = qp;
      qp_p.R(k, l) += h;
      qp_p.R(l, k) += h;
      qp_m.R(k, l) -= h;
      qp_m.R(l, k) -= h;
      const double analytic =
          k == l ? 2.0 * an.dR(k, k) : an.dR(k, l) + an.dR(l, k);
      check(analytic, (loss_at(qp_p) - loss_at(qp_m)) / (2 * h));
    }
    for (int probe = 0; probe < 4; ++probe) {  // dC
      const int k = rs.uniform_int(0, m - 1), l = rs.uniform_int(0, n - 1);
      RandomQp qp_p = qp, qp_m = qp;
      qp_p.C(k, l) += h;
      qp_m.C(k, l) -= h;
      check(an.dC(k, l), (loss_at(qp_p) - loss_at(qp_m)) / (2 * h));
    }
    ++done;
  }
  detail = fmt("%d instances, worst relative error %.3g", done, worst);
  return done == 100 && worst <= 1e-3;
}

// ---------------------------------------------------------------------------
// 4. Barrier value and analytic first/second state derivatives match finite
//    differences for every barrier kind.

bool criterion4(std::string& detail) {
  RandomStream rs(mix64(17, 0xba66ULL));
  const double h = 1e-6;
  double worst = 0.0;
  int checked = 0;

  for (int k = 0; checked < 1000 && k < 5000; ++k) {
    BarrierParams params;
    params.gamma = rs.uniform(0.5, 2.0);
    params.alpha = rs.uniform(0.0, 1.0);
    params.beta = rs.uniform(0.0, 0.5);
    params.mu_b = rs.uniform(0.05, 0.5);
    params.normalize_ip = rs.uniform_int(0, 1) == 1;

    GlobalState g;
    g.agents.resize(2);
    for (AgentState& s : g.agents) {
      s.x = rs.uniform(-3.0, 3.0);
      s.y = rs.uniform(-3.0, 3.0);
      s.theta = rs.uniform(-M_PI, M_PI);
      s.v = rs.uniform(-1.5, 1.5);
    }
    // Keep clear of contact so the margin stays smooth at the probe scale.
    if ((Eigen::Vector2d(g.agents[0].x, g.agents[0].y) -
         Eigen::Vector2d(g.agents[1].x, g.agents[1].y))
            .norm() < 0.8)
      continue;
    std::vector<Obstacle> obstacles{
        {rs.uniform(-3.0, 3.0), rs.uniform(-3.0, 3.0), rs.uniform(0.2, 0.6)}};
    if ((Eigen::Vector2d(g.agents[0].x, g.agents[0].y) -
         Eigen::Vector2d(obstacles[0].x, obstacles[0].y))
            .norm() < obstacles[0].radius + 0.5)
      continue;

    BarrierSpec spec;
    switch (k % 3) {
      case 0:
        spec = BarrierSpec::pair(0, 1, 0.25);
        break;
      case 1:
        spec = BarrierSpec::obstacle_disc(0, 0, 0.25, obstacles[0].radius);
        break;
      default:
        spec = BarrierSpec::legacy_disc(0, 0, 0.25, obstacles[0].radius);
        break;
    }

    const BarrierDerivatives bd = barrier_derivatives(spec, g, obstacles, params);
    const int dim = spec.dim();

    // B is the exponential of the margin.
    const double direct =
        spec.kind == BarrierKind::PairCollision
            ? h_pair(g.agents[0], g.agents[1], 0.25, params)
            : (spec.kind == BarrierKind::ObstacleCollision
                   ? h_obstacle(g.agents[0], obstacles[0], 0.25, params)
                   : legacy_h(g.agents[0],
                              0.5 * ((Eigen::Vector2d(g.agents[0].x,
                                                      g.agents[0].y) -
                                      Eigen::Vector2d(obstacles[0].x,
                                                      obstacles[0].y))
                                         .squaredNorm() -
                                     std::pow(0.25 + obstacles[0].radius, 2)),
                              params));
    worst = std::max(worst,
                     std::abs(bd.B - std::exp(std::min(-params.gamma * direct,
                                                       30.0))) /
                         std::max(1e-12, bd.B));

    const auto nudged = [&](int slot, double delta) {
      GlobalState gg = g;
      AgentState& s = gg.agents[slot < 4 ? spec.i : spec.j];
      Eigen::Vector4d x = s.vec();
      x[slot % 4] += delta;
      s = AgentState::from_vec(x);
      return barrier_derivatives(spec, gg, obstacles, params);
    };

    Eigen::VectorXd dB_fd(dim);
    Eigen::MatrixXd d2B_fd(dim, dim);
    for (int s = 0; s < dim; ++s) {
      const BarrierDerivatives bp = nudged(s, h), bm = nudged(s, -h);
      dB_fd[s] = (bp.B - bm.B) / (2 * h);
      d2B_fd.col(s) = (bp.dB - bm.dB) / (2 * h);
    }
    worst = std::max(worst, (bd.dB - dB_fd).lpNorm<Eigen::Infinity>() /
                                std::max(1e-9, dB_fd.lpNorm<Eigen::Infinity>()));
    worst = std::max(worst,
                     (bd.d2B - d2B_fd).lpNorm<Eigen::Infinity>() /
                         std::max(1e-9, d2B_fd.lpNorm<Eigen::Infinity>()));
    ++checked;
  }
  detail = fmt("%d states, worst relative error %.3g", checked, worst);
  return checked == 1000 && worst <= 1e-3;
}

// ---------------------------------------------------------------------------
// 5. Monte-Carlo exit frequency of a constraint-satisfying controller stays
//    under the supermartingale failure bound.

bool criterion5(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();

  NoiseModel model;
  model.sigma = 0.5;
  model.dt = 0.02;
  model.horizon_steps = 100;

  BarrierParams params;
  params.gamma = 2.0;
  params.alpha = 0.0;  // the decay-free branch of the bound
  params.beta = 0.05;
  params.mu_b = 0.3;

  const double agent_radius = 0.25;
  std::vector<Obstacle> obstacles{{0.0, 0.0, 0.5}};
  const BarrierSpec spec = BarrierSpec::obstacle_disc(0, 0, agent_radius,
                                                      obstacles[0].radius);

  // Start aimed at the obstacle, close enough that B0 is non-negligible.
  AgentState start;
  start.x = -1.35;
  start.y = 0.0;
  start.theta = 0.0;
  start.v = 0.4;

  GlobalState g0;
  g0.agents = {start};
  const double B0 =
      barrier_derivatives(spec, g0, obstacles, params).B;
  const double T = model.horizon_steps * model.dt;
  const double bound = failure_bound(B0, params, T);

  const Eigen::Matrix2d R = Eigen::Matrix2d::Identity();
  const int rollouts = 10000;
  int exits = 0;
  long verified_steps = 0;

  for (int mc = 0; mc < rollouts; ++mc) {
    RandomStream noise(mix64(23, 0xfa11ULL, mc));
    GlobalState g = g0;
    bool exited = false;
    for (int step = 0; step < model.horizon_steps; ++step) {
      if (h_obstacle(g.agents[0], obstacles[0], agent_radius, params) < 0.0) {
        exited = true;
        break;
      }
      const ConstraintRow row =
          constraint_row(spec, g, obstacles, model, params);

      // Greedy nominal control: accelerate at the obstacle, then project
      // onto the row's halfspace (single-constraint QP in closed form).
      Eigen::Vector2d u(0.0, 1.2);
      if (!row.degenerate) {
        const Eigen::Vector2d a = row.blocks[0];
        const double viol = a.dot(u) - row.rhs;
        if (viol > 0.0) u -= a * (viol / a.dot(R * a));
        if (a.dot(u) > row.rhs + 1e-9) {
          detail = "controller failed to satisfy its own constraint row";
          return false;
        }
        ++verified_steps;
      }
      const Eigen::Vector2d eps(noise.normal(), noise.normal());
      g = em_step(g, {ControlInput::from_vec(u)}, {eps}, model);
    }
    if (!exited &&
        h_obstacle(g.agents[0], obstacles[0], agent_radius, params) < 0.0)
      exited = true;
    if (exited) ++exits;
  }

  const double phat = double(exits) / rollouts;
  const double slack = 3.0 * std::sqrt(phat * (1.0 - phat) / rollouts);
  const double secs = seconds_since(t0);
  detail = fmt("exit freq %.4f vs bound %.4f (+%.4f slack), B0 %.3f, "
               "%ld verified steps, %.1fs",
               phat, bound, slack, B0, verified_steps, secs);
  return phat <= bound + slack && verified_steps > 0 && secs <= 120.0;
}

// ---------------------------------------------------------------------------
// 6. Per-agent problem size is constant in the team size; the centralized
//    row count grows quadratically.

bool criterion6(std::string& detail) {
  RandomStream rs(mix64(29, 0x5ca1eULL));
  const int r = 3, n_obstacles = 1;
  ExtraConstraints extras;
  extras.neighbor_obstacle = true;
  extras.neighbor_neighbor = true;

  NoiseModel model;
  BarrierParams params;
  std::vector<Obstacle> obstacles{{50.0, 50.0, 0.5}};

  int rows_ref = -1, kkt_ref = -1;
  for (int n = 4; n <= 32; ++n) {
    GlobalState g;
    g.agents.resize(n);
    for (int i = 0; i < n; ++i) {
      // Well-separated ring so every margin is clean.
      const double ang = 2.0 * M_PI * i / n;
      g.agents[i].x = 10.0 * std::cos(ang) + 0.01 * rs.normal();
      g.agents[i].y = 10.0 * std::sin(ang) + 0.01 * rs.normal();
      g.agents[i].theta = rs.uniform(-M_PI, M_PI);
      g.agents[i].v = rs.uniform(-0.5, 0.5);
    }
    const auto nbhds = build_neighborhoods(g, r);
    for (int i = 0; i < n; ++i) {
      const LocalConstraints lc = assemble_local(nbhds[i], g, obstacles, model,
                                                 params, 0.25, extras);
      const int rows = (int)lc.A.rows();
      const int kkt = (int)lc.A.cols() + rows;  // saddle system dimension
      if (rows_ref < 0) {
        rows_ref = rows;
        kkt_ref = kkt;
      }
      if (rows != rows_ref || kkt != kkt_ref) {
        detail = fmt("size drifted at N=%d agent %d: rows %d vs %d, "
                     "KKT %d vs %d",
                     n, i, rows, rows_ref, kkt, kkt_ref);
        return false;
      }
    }
  }

  const long c16 = centralized_count(16, n_obstacles);
  bool growth_ok = c16 == 136;
  for (int n = 4; n <= 32; ++n)
    growth_ok = growth_ok &&
                centralized_count(n, n_obstacles) ==
                    (long)n * (n - 1) / 2 + (long)n * n_obstacles;
  detail = fmt("per-agent rows %d, KKT dim %d for all N in 4..32; "
               "centralized N=16 -> %ld",
               rows_ref, kkt_ref, c16);
  return rows_ref == 10 && kkt_ref == 18 && growth_ok;
}

// ---------------------------------------------------------------------------
// 7. Training on the default swap task improves loss and terminal distance
//    while keeping position violations rare.

bool criterion7(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = scratch_dir("train");

  RunOptions opt;
  opt.task_name = "swap";
  opt.seed = 1;
  opt.out_dir = dir.string();
  run_train(opt);

  // Parse the metrics file: iter,loss,frac_h,frac_hpos,dist,admm.
  std::ifstream csv(dir / "metrics.csv");
  std::string line;
  std::getline(csv, line);  // header
  std::vector<double> loss, hpos, dist;
  while (std::getline(csv, line)) {
    double it, lo, fh, fp, di, ad;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &it, &lo, &fh,
                    &fp, &di, &ad) == 6) {
      loss.push_back(lo);
      hpos.push_back(fp);
      dist.push_back(di);
    }
  }
  const int n = (int)loss.size();
  if (n < 100) {
    detail = fmt("metrics too short: %d rows", n);
    return false;
  }
  const auto mean = [](const std::vector<double>& v, int lo, int hi) {
    double s = 0.0;
    for (int i = lo; i < hi; ++i) s += v[i];
    return s / std::max(1, hi - lo);
  };
  const double loss0 = mean(loss, 0, 10), loss1 = mean(loss, n - 10, n);
  const double dist0 = mean(dist, 0, 10), dist1 = mean(dist, n - 10, n);
  const double hpos_tail = mean(hpos, n - n / 10, n);
  const double secs = seconds_since(t0);

  detail = fmt("loss %.3g -> %.3g (%.0f%%), dist %.3f -> %.3f (%.0f%%), "
               "tail frac_hpos %.4f, %d iters, %.0fs",
               loss0, loss1, 100.0 * (1.0 - loss1 / loss0), dist0, dist1,
               100.0 * (1.0 - dist1 / dist0), hpos_tail, n, secs);
  fs::remove_all(dir);
  return loss1 <= 0.5 * loss0 && dist1 <= 0.5 * dist0 && hpos_tail <= 0.05 &&
         secs <= 1800.0;
}

// ---------------------------------------------------------------------------
// 8. Same seed, same config: byte-identical metrics for train and eval.

bool criterion8(std::string& detail) {
  const fs::path dir = scratch_dir("determinism");
  const fs::path cfg = dir / "task.json";
  {
    TaskSpec t = make_task("swap");
    t.train_iters = 5;
    t.batch = 8;
    std::ofstream out(cfg, std::ios::binary);
    out << task_to_json(t);
  }

  const auto train_once = [&](const std::string& sub) {
    RunOptions opt;
    opt.config = cfg.string();
    opt.seed = 42;
    opt.out_dir = (dir / sub).string();
    run_train(opt);
    return slurp(dir / sub / "metrics.csv");
  };
  const auto eval_once = [&](const std::string& sub) {
    RunOptions opt;
    opt.config = cfg.string();
    opt.seed = 43;
    opt.out_dir = (dir / sub).string();
    run_eval(opt);
    return slurp(dir / sub / "metrics.csv") +
           slurp(dir / sub / "trajectories.json");
  };

  const std::string tr1 = train_once("t1"), tr2 = train_once("t2");
  const std::string ev1 = eval_once("e1"), ev2 = eval_once("e2");
  fs::remove_all(dir);

  const bool train_same = !tr1.empty() && tr1 == tr2;
  const bool eval_same = !ev1.empty() && ev1 == ev2;
  detail = fmt("train reruns %s (%zu bytes), eval reruns %s (%zu bytes)",
               train_same ? "identical" : "differ", tr1.size(),
               eval_same ? "identical" : "differ", ev1.size());
  return train_same && eval_same;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      only = std::atoi(argv[++i]);
  }

  bool (*checks[])(std::string&) = {criterion1, criterion2, criterion3,
                                    criterion4, criterion5, criterion6,
                                    criterion7, criterion8};
  bool all_ok = true;
  for (int c = 1; c <= 8; ++c) {
    if (only != 0 && c != only) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = checks[c - 1](detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("criterion %d: %s%s%s\n", c, ok ? "PASS" : "FAIL",
                detail.empty() ? "" : " - ", detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
