#include "dsmc/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace dsmc {

MetricsRecord violation_metrics(const std::vector<Rollout>& batch,
                                const TaskSpec& task, int iter, double loss) {
  MetricsRecord rec;
  rec.iter = iter;
  rec.loss = loss;
  const int bsize = (int)batch.size();
  if (bsize == 0) return rec;

  int viol_h = 0, viol_hpos = 0;
  double dist = 0.0;
  long iters = 0;
  long solves = 0;
  for (const Rollout& ro : batch) {
    if (ro.min_h < 0.0) ++viol_h;
    if (ro.min_h_pos < 0.0) ++viol_hpos;
    for (int i = 0; i < (int)ro.terminal.agents.size(); ++i) {
      const AgentState& s = ro.terminal.agents[i];
      const Eigen::Vector2d tgt = task.target.at(i);
      dist += std::hypot(s.x - tgt.x(), s.y - tgt.y());
    }
    iters += ro.admm_iter_total;
    solves += (long)ro.steps.size();
  }
  rec.frac_h_violation = (double)viol_h / bsize;
  rec.frac_hpos_violation = (double)viol_hpos / bsize;
  rec.mean_terminal_dist = dist / (bsize * task.n_agents);
  rec.mean_admm_iters = solves > 0 ? (double)iters / solves : 0.0;
  return rec;
}

std::string format_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string metrics_header() {
  return "iter,loss,frac_h_violation,frac_hpos_violation,mean_terminal_dist,"
         "mean_admm_iters\n";
}

std::string metrics_row(const MetricsRecord& rec) {
  std::string row = std::to_string(rec.iter);
  for (double v : {rec.loss, rec.frac_h_violation, rec.frac_hpos_violation,
                   rec.mean_terminal_dist, rec.mean_admm_iters}) {
    row += ',';
    row += format_full(v);
  }
  row += '\n';
  return row;
}

}  // namespace dsmc
