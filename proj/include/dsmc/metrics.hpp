#pragma once

#include <string>
#include <vector>

#include "dsmc/learner.hpp"

namespace dsmc {

/// One training/evaluation iteration's summary, as written to metrics.csv.
struct MetricsRecord {
  int iter = 0;
  double loss = 0.0;
  double frac_h_violation = 0.0;     // batch fraction with any h < 0
  double frac_hpos_violation = 0.0;  // batch fraction with any h_pos < 0
  double mean_terminal_dist = 0.0;   // over batch and agents
  double mean_admm_iters = 0.0;      // per solver call
};

MetricsRecord violation_metrics(const std::vector<Rollout>& batch,
                                const TaskSpec& task, int iter, double loss);

/// Full-precision, locale-independent float formatting ("%.17g"), so a rerun
/// with the same seed rewrites the file byte for byte.
std::string format_full(double x);

std::string metrics_header();
std::string metrics_row(const MetricsRecord& rec);

}  // namespace dsmc
