#pragma once

#include <cstdint>
#include <string>

namespace dsmc {

/// Options shared by the CLI subcommands. Empty strings mean "not given".
struct RunOptions {
  std::string config;      // task JSON; default task when empty
  std::string task_name = "swap";
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string checkpoint;  // eval input / training warm start
  int max_iters = -1;      // train: iteration override; solve-check: instances
};

/// Trains from scratch (or from a warm-start checkpoint), writing
/// metrics.csv, checkpoint.json, and config_resolved.json to out_dir.
void run_train(const RunOptions& opt);

/// Rolls out one batch without learning, writing metrics.csv,
/// trajectories.json, and solver_trace.csv. Without a checkpoint a freshly
/// initialized model is used.
void run_eval(const RunOptions& opt);

/// Random-instance comparison of the decentralized solver against the
/// reference enumeration. Throws NumericalError when the worst error exceeds
/// the 1e-3 gate.
void run_solvecheck(const RunOptions& opt);

/// Whole-pipeline derivative probe: central finite differences of the loss
/// against the analytic backward pass on a tiny task. Throws NumericalError
/// when any probed coordinate is off by more than 1e-2 relative.
void run_gradcheck(const RunOptions& opt);

/// Prints the per-agent problem-size report across team sizes plus one timed
/// solve, demonstrating that the local problems do not grow with the team.
void run_bench(const RunOptions& opt);

}  // namespace dsmc
