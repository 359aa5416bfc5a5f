#include <doctest.h>

#include "fixtures.hpp"
#include "gridrl/graph.hpp"

using namespace gridrl;
using doctest::Approx;

TEST_SUITE("graph") {

TEST_CASE("reference topology graph") {
  const GridModel g = builtin_desk14();
  const Episode ep = nominal_episode(g, 4);
  const Simulator sim(g, ep);
  Observation o = sim.reset();
  const GraphObs graph = build_graph(o, g);
  CHECK(graph.n_nodes == 28);
  CHECK(graph.n_edges() == 40);
  CHECK(graph.node_x.rows() == 28);
  CHECK(graph.node_x.cols() == kNodeFeatures);
  CHECK(graph.edge_e.cols() == kEdgeFeatures);

  o.topo.line_in_service[5] = 0;
  const GraphObs cut = build_graph(o, g);
  CHECK(cut.n_edges() == 38);
  for (int line : cut.edge_line) CHECK(line != 5);
}

TEST_CASE("edge pairs mirror each other") {
  const GridModel g = builtin_desk14();
  const Episode ep = generate_episodes(g, 3, 1)[0];
  const Simulator sim(g, ep);
  const Observation o = sim.reset();
  const GraphObs graph = build_graph(o, g, false);
  for (int e = 0; e < graph.n_edges(); e += 2) {
    CHECK(graph.src[e] == graph.dst[e + 1]);
    CHECK(graph.dst[e] == graph.src[e + 1]);
    CHECK(graph.edge_line[e] == graph.edge_line[e + 1]);
    CHECK(graph.edge_e(e, 0) == graph.edge_e(e + 1, 0));
    CHECK(graph.edge_e(e, 1) == -graph.edge_e(e + 1, 1));
    CHECK(graph.edge_e(e, 1) == Approx(o.p_flow[graph.edge_line[e]]));
    CHECK(graph.edge_e(e, 0) == o.rho[graph.edge_line[e]]);
  }
  // Net injections cancel over the network, so node features sum to zero.
  CHECK(graph.node_x.col(0).sum() == Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("empty busbar node") {
  const GridModel g = builtin_desk14();
  const Episode ep = nominal_episode(g, 4);
  const Simulator sim(g, ep);
  Observation o = sim.reset();
  o.sub_cooldown[2] = 2;
  const GraphObs graph = build_graph(o, g, false);
  const int empty = node_index(2, 2);
  CHECK(graph.node_x(empty, 0) == 0.0);
  CHECK(graph.node_x(empty, 3) == 2.0);
  CHECK(graph.node_x(node_index(2, 1), 3) == 2.0);
  for (int e = 0; e < graph.n_edges(); ++e) {
    CHECK(graph.src[e] != empty);
    CHECK(graph.dst[e] != empty);
  }
}

TEST_CASE("busbar split moves edges") {
  const GridModel g = builtin_desk14();
  const Episode ep = nominal_episode(g, 4);
  const Simulator sim(g, ep);
  const ActionLibrary lib = enumerate_actions(g);
  const Observation o = sim.reset();
  std::size_t pick = 0;
  for (std::size_t i = 0; i < lib.size(); ++i) {
    if (lib[i].kind == ActionKind::SetBus && lib[i].sub == 4) pick = i;
  }
  const Observation next = sim.step(o, lib[pick]).obs;
  const GraphObs graph = build_graph(next, g);
  int touching_bus2 = 0;
  for (int e = 0; e < graph.n_edges(); ++e) touching_bus2 += graph.src[e] == node_index(4, 2);
  CHECK(touching_bus2 > 0);
}

}
