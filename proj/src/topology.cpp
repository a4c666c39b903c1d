#include "dsmc/topology.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <stdexcept>
#include <string>

namespace dsmc {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("topology: " + msg);
}

// Exact byte key of a row in global coordinates; bit-identical rows (and only
// those) share a key.
std::string row_key(const Eigen::VectorXd& global_row, double rhs) {
  std::string key;
  key.resize((global_row.size() + 1) * sizeof(double));
  std::memcpy(key.data(), global_row.data(), global_row.size() * sizeof(double));
  std::memcpy(key.data() + global_row.size() * sizeof(double), &rhs,
              sizeof(double));
  return key;
}

}  // namespace

std::vector<Neighborhood> build_neighborhoods(const GlobalState& g, int r) {
  const int n = g.size();
  require(r >= 0, "r must be nonnegative");
  require(r < n, "r must be smaller than the team size");

  std::vector<Neighborhood> out(n);
  for (int i = 0; i < n; ++i) {
    out[i].ego = i;
    std::vector<std::pair<double, int>> by_dist;
    by_dist.reserve(n - 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = g.agents[i].x - g.agents[j].x;
      const double dy = g.agents[i].y - g.agents[j].y;
      by_dist.emplace_back(dx * dx + dy * dy, j);
    }
    std::sort(by_dist.begin(), by_dist.end());  // ties fall to the lower index
    out[i].neighbors.resize(r);
    for (int k = 0; k < r; ++k) out[i].neighbors[k] = by_dist[k].second;
    // Membership is by distance, but the list (and with it the copy-column
    // layout) is ordered by index so it only changes when the set changes.
    std::sort(out[i].neighbors.begin(), out[i].neighbors.end());
  }
  for (int j = 0; j < n; ++j)
    for (int i : out[j].neighbors) out[i].reverse.push_back(j);
  return out;
}

LocalConstraints assemble_local(const Neighborhood& nbhd, const GlobalState& g,
                                const std::vector<Obstacle>& obstacles,
                                const NoiseModel& model,
                                const BarrierParams& params,
                                double agent_radius,
                                const ExtraConstraints& extras) {
  const int ego = nbhd.ego;
  const int r = static_cast<int>(nbhd.neighbors.size());
  const int n_obs = static_cast<int>(obstacles.size());

  LocalConstraints lc;
  lc.columns.push_back(ego);
  for (int j : nbhd.neighbors) lc.columns.push_back(j);

  auto push_pair = [&](int a, int b) {
    lc.rows.push_back(constraint_row(BarrierSpec::pair(a, b, agent_radius), g,
                                     obstacles, model, params));
  };
  auto push_obstacle = [&](int a, int o) {
    lc.rows.push_back(constraint_row(
        BarrierSpec::obstacle_disc(a, o, agent_radius, obstacles[o].radius), g,
        obstacles, model, params));
  };

  for (int j : nbhd.neighbors) push_pair(ego, j);
  for (int o = 0; o < n_obs; ++o) push_obstacle(ego, o);
  if (extras.neighbor_obstacle)
    for (int j : nbhd.neighbors)
      for (int o = 0; o < n_obs; ++o) push_obstacle(j, o);
  if (extras.neighbor_neighbor)
    for (int a = 0; a < r; ++a)
      for (int b = a + 1; b < r; ++b)
        push_pair(nbhd.neighbors[a], nbhd.neighbors[b]);

  const int m = static_cast<int>(lc.rows.size());
  const int width = kStateDim * (1 + r);
  lc.A = Eigen::MatrixXd::Zero(m, width);
  lc.d = Eigen::VectorXd::Zero(m);
  for (int k = 0; k < m; ++k) {
    const ConstraintRow& row = lc.rows[k];
    for (std::size_t b = 0; b < row.owners.size(); ++b) {
      const auto it =
          std::find(lc.columns.begin(), lc.columns.end(), row.owners[b]);
      require(it != lc.columns.end(),
              "constraint row touches an agent outside the local columns");
      const int col = kStateDim * static_cast<int>(it - lc.columns.begin());
      lc.A.block<1, 2>(k, col) = row.blocks[b].transpose();
    }
    lc.d[k] = row.rhs;
  }
  return lc;
}

Eigen::VectorXd DuplicateMap::aggregate(const Eigen::VectorXd& stacked) const {
  require(stacked.size() == static_cast<Eigen::Index>(class_of.size()),
          "aggregate: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(classes());
  for (Eigen::Index k = 0; k < stacked.size(); ++k)
    out[class_of[k]] += stacked[k];
  return out;
}

StackedConstraints assemble_duplicate(const std::vector<LocalConstraints>& local,
                                      int n_agents) {
  int total = 0;
  for (const auto& lc : local) total += static_cast<int>(lc.rows.size());

  StackedConstraints out;
  out.C = Eigen::MatrixXd::Zero(total, kStateDim * n_agents);
  out.d = Eigen::VectorXd::Zero(total);
  out.map.class_of.resize(total);
  out.row_agent.resize(total);

  std::map<std::string, int> class_index;
  int k = 0;
  for (const auto& lc : local) {
    for (const auto& row : lc.rows) {
      for (std::size_t b = 0; b < row.owners.size(); ++b) {
        require(row.owners[b] >= 0 && row.owners[b] < n_agents,
                "row owner out of range");
        out.C.block<1, 2>(k, kStateDim * row.owners[b]) =
            row.blocks[b].transpose();
      }
      out.d[k] = row.rhs;
      out.row_agent[k] = lc.columns[0];

      const std::string key = row_key(out.C.row(k), out.d[k]);
      auto [it, inserted] =
          class_index.try_emplace(key, static_cast<int>(out.map.members.size()));
      if (inserted) {
        out.map.members.emplace_back();
        out.class_rows.push_back(row);
      }
      out.map.class_of[k] = it->second;
      out.map.members[it->second].push_back(k);
      ++k;
    }
  }

  const int classes = out.map.classes();
  out.C_distinct = Eigen::MatrixXd::Zero(classes, kStateDim * n_agents);
  out.d_distinct = Eigen::VectorXd::Zero(classes);
  for (int c = 0; c < classes; ++c) {
    const int rep = out.map.members[c].front();
    out.C_distinct.row(c) = out.C.row(rep);
    out.d_distinct[c] = out.d[rep];
  }
  return out;
}

long centralized_count(int n_agents, int n_obstacles) {
  require(n_agents >= 0 && n_obstacles >= 0, "counts must be nonnegative");
  return static_cast<long>(n_agents) * (n_agents - 1) / 2 +
         static_cast<long>(n_agents) * n_obstacles;
}

}  // namespace dsmc
