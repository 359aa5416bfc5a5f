#include "gridrl/graph.hpp"

namespace gridrl {

GraphObs build_graph(const Observation& obs, const GridModel& grid, bool standardize) {
  const double power = standardize ? kPowerScale : 1.0;
  const double cooldown = standardize ? kCooldownScale : 1.0;

  GraphObs g;
  g.n_nodes = 2 * grid.n_subs();
  g.node_x = Eigen::MatrixXd::Zero(g.n_nodes, kNodeFeatures);
  const auto node_of = [&](int element) {
    return node_index(grid.element_sub(element), obs.topo.busbar_of_element[element]);
  };
  for (int d = 0; d < grid.n_loads(); ++d) {
    g.node_x(node_of(grid.load_element(d)), 0) -= obs.injections.load_mw[d] * power;
  }
  for (int k = 0; k < grid.n_gens(); ++k) {
    g.node_x(node_of(grid.gen_element(k)), 0) += obs.injections.gen_mw[k] * power;
  }
  // DC model: no reactive power, flat 1.0 p.u. voltage.
  g.node_x.col(2).setOnes();
  for (int s = 0; s < grid.n_subs(); ++s) {
    const double c = obs.sub_cooldown[s] * cooldown;
    g.node_x(node_index(s, 1), 3) = c;
    g.node_x(node_index(s, 2), 3) = c;
  }

  int n_in_service = 0;
  for (int l = 0; l < grid.n_lines(); ++l) n_in_service += obs.topo.line_in_service[l] ? 1 : 0;
  g.edge_e.resize(2 * n_in_service, kEdgeFeatures);
  g.src.reserve(2 * n_in_service);
  g.dst.reserve(2 * n_in_service);
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (!obs.topo.line_in_service[l]) continue;
    const int u = node_of(grid.line_origin_element(l));
    const int v = node_of(grid.line_extremity_element(l));
    const double p = obs.p_flow[l] * power;
    const double c = obs.line_cooldown[l] * cooldown;
    const auto row = static_cast<Eigen::Index>(g.src.size());
    g.edge_e.row(row) << obs.rho[l], p, 0.0, 1.0, c;
    g.edge_e.row(row + 1) << obs.rho[l], -p, 0.0, 1.0, c;
    g.src.insert(g.src.end(), {u, v});
    g.dst.insert(g.dst.end(), {v, u});
    g.edge_line.insert(g.edge_line.end(), {l, l});
  }
  return g;
}

}  // namespace gridrl
