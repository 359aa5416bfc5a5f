#include "gridrl/gnn.hpp"

namespace gridrl {

GraphBatch make_batch(std::span<const GraphObs* const> graphs) {
  GraphBatch b;
  b.n_graphs = static_cast<int>(graphs.size());
  int n_edges = 0;
  for (const GraphObs* g : graphs) {
    b.n_nodes += g->n_nodes;
    n_edges += g->n_edges();
  }
  const ad::Index node_cols = graphs.empty() ? kNodeFeatures : graphs[0]->node_x.cols();
  const ad::Index edge_cols = graphs.empty() ? kEdgeFeatures : graphs[0]->edge_e.cols();
  b.node_x.resize(b.n_nodes, node_cols);
  b.edge_e.resize(n_edges, edge_cols);
  b.src.reserve(n_edges);
  b.dst.reserve(n_edges);
  b.graph_of_node.reserve(b.n_nodes);
  b.nodes_per_graph.resize(b.n_graphs, 1);
  int node_offset = 0;
  int edge_offset = 0;
  for (int k = 0; k < b.n_graphs; ++k) {
    const GraphObs& g = *graphs[k];
    b.node_x.middleRows(node_offset, g.n_nodes) = g.node_x;
    if (g.n_edges() > 0) b.edge_e.middleRows(edge_offset, g.n_edges()) = g.edge_e;
    for (int e = 0; e < g.n_edges(); ++e) {
      b.src.push_back(g.src[e] + node_offset);
      b.dst.push_back(g.dst[e] + node_offset);
    }
    b.graph_of_node.insert(b.graph_of_node.end(), g.n_nodes, k);
    b.nodes_per_graph(k, 0) = g.n_nodes;
    node_offset += g.n_nodes;
    edge_offset += g.n_edges();
  }
  return b;
}

GraphBatch make_batch(const GraphObs& graph) {
  const GraphObs* one[] = {&graph};
  return make_batch(std::span<const GraphObs* const>(one));
}

EncoderParams EncoderParams::init(const EncoderConfig& config, std::mt19937_64& rng) {
  EncoderParams p;
  p.config = config;
  const int d = config.hidden;
  const int de = config.edge_features;
  int d_in = config.node_features;
  for (int b = 0; b < config.blocks; ++b) {
    EncoderBlock blk;
    // One draw over the joint fan-in, split by row block.
    const Matrix w1 = ad::glorot_uniform(2 * d_in + de, d, rng);
    blk.msg_w1_src = w1.middleRows(0, d_in);
    blk.msg_w1_dst = w1.middleRows(d_in, d_in);
    blk.msg_w1_edge = w1.middleRows(2 * d_in, de);
    blk.msg_b1 = Matrix::Zero(1, d);
    blk.msg_w2 = ad::glorot_uniform(d, d, rng);
    blk.msg_b2 = Matrix::Zero(1, d);
    for (int h = 0; h < config.heads; ++h) {
      const Matrix a = ad::glorot_uniform(2 * d + de, 1, rng);
      blk.attn_src.push_back(a.middleRows(0, d));
      blk.attn_dst.push_back(a.middleRows(d, d));
      blk.attn_edge.push_back(a.middleRows(2 * d, de));
      blk.head_w.push_back(ad::glorot_uniform(d, d, rng));
    }
    blk.skip = ad::glorot_uniform(d_in, d, rng);
    p.blocks.push_back(std::move(blk));
    d_in = d;
  }
  return p;
}

void EncoderParams::collect(ad::ParamList& out, const std::string& prefix) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    EncoderBlock& blk = blocks[b];
    const std::string base = prefix + ".block" + std::to_string(b) + ".";
    out.push_back({base + "msg_w1_src", &blk.msg_w1_src});
    out.push_back({base + "msg_w1_dst", &blk.msg_w1_dst});
    out.push_back({base + "msg_w1_edge", &blk.msg_w1_edge});
    out.push_back({base + "msg_b1", &blk.msg_b1});
    out.push_back({base + "msg_w2", &blk.msg_w2});
    out.push_back({base + "msg_b2", &blk.msg_b2});
    for (std::size_t h = 0; h < blk.head_w.size(); ++h) {
      const std::string k = std::to_string(h);
      out.push_back({base + "attn_src" + k, &blk.attn_src[h]});
      out.push_back({base + "attn_dst" + k, &blk.attn_dst[h]});
      out.push_back({base + "attn_edge" + k, &blk.attn_edge[h]});
      out.push_back({base + "head_w" + k, &blk.head_w[h]});
    }
    out.push_back({base + "skip", &blk.skip});
  }
}

}  // namespace gridrl
