#include "gridrl/powerflow.hpp"

#include <cmath>

#include "gridrl/errors.hpp"

namespace gridrl {

Topology Topology::reference(const GridModel& grid) {
  Topology t;
  t.busbar_of_element.assign(static_cast<std::size_t>(grid.n_elements()), 1);
  t.line_in_service.assign(static_cast<std::size_t>(grid.n_lines()), 1);
  return t;
}

BusPartition electrical_buses(const GridModel& grid, const Topology& topo) {
  const int n_nodes = 2 * grid.n_subs();
  BusPartition p;
  p.node_empty.assign(static_cast<std::size_t>(n_nodes), 1);
  p.bus_of_node.assign(static_cast<std::size_t>(n_nodes), -1);
  for (int e = 0; e < grid.n_elements(); ++e) {
    const int node = node_index(grid.element_sub(e), topo.busbar_of_element[static_cast<std::size_t>(e)]);
    p.node_empty[static_cast<std::size_t>(node)] = 0;
  }
  for (int n = 0; n < n_nodes; ++n) {
    if (!p.node_empty[static_cast<std::size_t>(n)]) {
      p.bus_of_node[static_cast<std::size_t>(n)] = p.n_buses++;
      p.node_of_bus.push_back(n);
    }
  }
  p.bus_of_element.resize(static_cast<std::size_t>(grid.n_elements()));
  for (int e = 0; e < grid.n_elements(); ++e) {
    const int node = node_index(grid.element_sub(e), topo.busbar_of_element[static_cast<std::size_t>(e)]);
    p.bus_of_element[static_cast<std::size_t>(e)] = p.bus_of_node[static_cast<std::size_t>(node)];
  }
  return p;
}

FlowSolution solve_dc(const GridModel& grid, const Topology& topo, const Injections& injections) {
  FlowSolution sol;
  sol.buses = electrical_buses(grid, topo);
  const int nb = sol.buses.n_buses;
  const auto& bus_of = sol.buses.bus_of_element;
  const auto bus_at = [&](int element) { return bus_of[static_cast<std::size_t>(element)]; };

  // Connectivity from the slack bus over in-service lines.
  sol.slack_bus = bus_at(grid.gen_element(grid.slack_generator()));
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(nb));
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (!topo.line_in_service[static_cast<std::size_t>(l)]) continue;
    const int a = bus_at(grid.line_origin_element(l));
    const int b = bus_at(grid.line_extremity_element(l));
    adjacency[static_cast<std::size_t>(a)].push_back(b);
    adjacency[static_cast<std::size_t>(b)].push_back(a);
  }
  sol.islanded.assign(static_cast<std::size_t>(nb), 1);
  std::vector<int> stack{sol.slack_bus};
  sol.islanded[static_cast<std::size_t>(sol.slack_bus)] = 0;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adjacency[static_cast<std::size_t>(u)]) {
      if (sol.islanded[static_cast<std::size_t>(v)]) {
        sol.islanded[static_cast<std::size_t>(v)] = 0;
        stack.push_back(v);
      }
    }
  }

  // Net injections on connected buses; the slack absorbs the imbalance.
  sol.bus_injection = Eigen::VectorXd::Zero(nb);
  for (int d = 0; d < grid.n_loads(); ++d) {
    const int b = bus_at(grid.load_element(d));
    if (!sol.islanded[static_cast<std::size_t>(b)]) sol.bus_injection[b] -= injections.load_mw[d];
  }
  const int slack_gen = grid.slack_generator();
  for (int g = 0; g < grid.n_gens(); ++g) {
    if (g == slack_gen) continue;
    const int b = bus_at(grid.gen_element(g));
    if (!sol.islanded[static_cast<std::size_t>(b)]) sol.bus_injection[b] += injections.gen_mw[g];
  }
  sol.slack_mw = -sol.bus_injection.sum();
  sol.bus_injection[sol.slack_bus] += sol.slack_mw;

  // Reduced system over connected non-slack buses.
  std::vector<int> reduced(static_cast<std::size_t>(nb), -1);
  int n_red = 0;
  for (int b = 0; b < nb; ++b) {
    if (b != sol.slack_bus && !sol.islanded[static_cast<std::size_t>(b)]) reduced[static_cast<std::size_t>(b)] = n_red++;
  }
  sol.theta = Eigen::VectorXd::Zero(nb);
  if (n_red > 0) {
    Eigen::MatrixXd bmat = Eigen::MatrixXd::Zero(n_red, n_red);
    Eigen::VectorXd rhs(n_red);
    for (int l = 0; l < grid.n_lines(); ++l) {
      if (!topo.line_in_service[static_cast<std::size_t>(l)]) continue;
      const int a = bus_at(grid.line_origin_element(l));
      const int b = bus_at(grid.line_extremity_element(l));
      if (sol.islanded[static_cast<std::size_t>(a)]) continue;
      const double y = 1.0 / grid.lines()[static_cast<std::size_t>(l)].reactance;
      const int ra = reduced[static_cast<std::size_t>(a)];
      const int rb = reduced[static_cast<std::size_t>(b)];
      if (ra >= 0) bmat(ra, ra) += y;
      if (rb >= 0) bmat(rb, rb) += y;
      if (ra >= 0 && rb >= 0) {
        bmat(ra, rb) -= y;
        bmat(rb, ra) -= y;
      }
    }
    for (int b = 0; b < nb; ++b) {
      const int r = reduced[static_cast<std::size_t>(b)];
      if (r >= 0) rhs[r] = sol.bus_injection[b] / kBaseMva;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(bmat);
    if (llt.info() != Eigen::Success) {
      throw SingularSystemError("reduced susceptance matrix is singular");
    }
    const Eigen::VectorXd angles = llt.solve(rhs);
    if (!angles.allFinite()) throw SingularSystemError("non-finite angles in DC solve");
    for (int b = 0; b < nb; ++b) {
      const int r = reduced[static_cast<std::size_t>(b)];
      if (r >= 0) sol.theta[b] = angles[r];
    }
  }

  sol.p_flow = Eigen::VectorXd::Zero(grid.n_lines());
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (!topo.line_in_service[static_cast<std::size_t>(l)]) continue;
    const int a = bus_at(grid.line_origin_element(l));
    const int b = bus_at(grid.line_extremity_element(l));
    if (sol.islanded[static_cast<std::size_t>(a)]) continue;
    sol.p_flow[l] = (sol.theta[a] - sol.theta[b]) / grid.lines()[static_cast<std::size_t>(l)].reactance * kBaseMva;
  }
  sol.rho = loading_ratios(sol, grid);
  return sol;
}

Eigen::VectorXd loading_ratios(const FlowSolution& sol, const GridModel& grid) {
  Eigen::VectorXd rho(grid.n_lines());
  for (int l = 0; l < grid.n_lines(); ++l) {
    rho[l] = std::abs(sol.p_flow[l]) / grid.lines()[static_cast<std::size_t>(l)].thermal_limit;
  }
  return rho;
}

bool injection_islanded(const GridModel& grid, const FlowSolution& sol) {
  for (int d = 0; d < grid.n_loads(); ++d) {
    if (sol.element_islanded(grid.load_element(d))) return true;
  }
  for (int g = 0; g < grid.n_gens(); ++g) {
    if (sol.element_islanded(grid.gen_element(g))) return true;
  }
  return false;
}

}  // namespace gridrl
