#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gridrl/environment.hpp"
#include "gridrl/grid_model.hpp"

namespace gridrl {

inline constexpr int kNodeFeatures = 4;  // P_net, Q_net, V_est, sub cooldown
inline constexpr int kEdgeFeatures = 5;  // rho, P_uv, Q_uv, V_send, line cooldown

inline constexpr double kPowerScale = 1.0 / 100.0;    // MW -> feature units
inline constexpr double kCooldownScale = 1.0 / 12.0;  // steps -> feature units

/// Busbar-level graph: nodes are the fixed (sub, busbar) pairs in
/// `node_index` order; each in-service line contributes the directed pair
/// origin->extremity then extremity->origin.
struct GraphObs {
  int n_nodes = 0;
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<int> edge_line;
  Eigen::MatrixXd node_x;  // n_nodes x 4
  Eigen::MatrixXd edge_e;  // n_edges x 5

  int n_edges() const { return static_cast<int>(src.size()); }
};

/// `standardize = false` keeps MW and step units (used by property checks).
GraphObs build_graph(const Observation& obs, const GridModel& grid, bool standardize = true);

}  // namespace gridrl
