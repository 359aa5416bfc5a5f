#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "gridrl/autodiff.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/graph.hpp"
#include "gridrl/optim.hpp"

namespace gridrl {

using ad::Matrix;

/// Disjoint union of graphs, so one encoder pass serves a minibatch.
struct GraphBatch {
  int n_graphs = 0;
  int n_nodes = 0;
  std::vector<int> src;
  std::vector<int> dst;
  Matrix node_x;
  Matrix edge_e;
  std::vector<int> graph_of_node;
  Matrix nodes_per_graph;  // n_graphs x 1
};

GraphBatch make_batch(std::span<const GraphObs* const> graphs);
GraphBatch make_batch(const GraphObs& graph);

struct EncoderConfig {
  int node_features = kNodeFeatures;
  int edge_features = kEdgeFeatures;
  int hidden = 32;
  int heads = 2;
  int blocks = 2;
};

/// One message-passing block. Row-vector convention: features are rows,
/// weights map d_in -> d_out as (d_in x d_out).
struct EncoderBlock {
  // First message layer on [x_j, x_i, e_ji], stored as its three row blocks
  // so node terms are projected before being gathered onto edges.
  Matrix msg_w1_src, msg_w1_dst, msg_w1_edge;  // d_in x d, d_in x d, d_edge x d
  Matrix msg_b1;                               // 1 x d
  Matrix msg_w2, msg_b2;                       // d x d, 1 x d
  // Attention vector w_h on [h~_j, h~_i, e_ji], split the same way.
  std::vector<Matrix> attn_src, attn_dst, attn_edge;  // per head: d x 1, d x 1, d_edge x 1
  std::vector<Matrix> head_w;                         // per head: d x d
  Matrix skip;                                        // d_in x d
};

struct EncoderParams {
  EncoderConfig config;
  std::vector<EncoderBlock> blocks;

  static EncoderParams init(const EncoderConfig& config, std::mt19937_64& rng);
  void collect(ad::ParamList& out, const std::string& prefix);
};

/// Attention weights per block and head (edges x 1), for inspection.
struct AttentionTrace {
  std::vector<std::vector<Matrix>> alpha;
};

inline const Matrix& value_of(const Matrix& m) { return m; }
inline const Matrix& value_of(const ad::Var& v) { return v.value(); }

template <class Value>
struct EncoderOutput {
  Value nodes;  // n_nodes x d
  Value z;      // n_graphs x d, mean over each graph's nodes
};

/// Edge-MLP messages summed over incoming edges, edge-aware multi-head
/// attention (heads averaged), learnable skip from the block input; blocks
/// stacked, then mean pooling per graph. Nodes without incoming edges get a
/// zero attention output and keep only the skip term.
template <class Ctx>
EncoderOutput<typename Ctx::Value> encode(const Ctx& ctx, const GraphBatch& batch,
                                          const EncoderParams& params,
                                          AttentionTrace* trace = nullptr) {
  using ad::add;
  using ad::gather_rows;
  using ad::leaky_relu;
  using ad::matmul;
  using ad::mul;
  using ad::scale;
  using ad::scatter_add_rows;
  using ad::segment_softmax;
  using Value = typename Ctx::Value;

  if (batch.node_x.cols() != params.config.node_features ||
      batch.edge_e.cols() != params.config.edge_features) {
    throw ShapeError("graph features do not match encoder configuration");
  }
  const auto n = static_cast<ad::Index>(batch.n_nodes);
  const Value edges = ctx.constant(batch.edge_e);
  Value x = ctx.constant(batch.node_x);
  if (trace) trace->alpha.assign(params.blocks.size(), {});

  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const EncoderBlock& blk = params.blocks[b];
    const Value hidden = leaky_relu(
        add(add(add(gather_rows(matmul(x, ctx.param(blk.msg_w1_src)), batch.src),
                    gather_rows(matmul(x, ctx.param(blk.msg_w1_dst)), batch.dst)),
                matmul(edges, ctx.param(blk.msg_w1_edge))),
            ctx.param(blk.msg_b1)));
    const Value messages = add(matmul(hidden, ctx.param(blk.msg_w2)), ctx.param(blk.msg_b2));
    const Value agg = scatter_add_rows(messages, batch.dst, n);

    Value heads_sum;
    for (std::size_t h = 0; h < blk.head_w.size(); ++h) {
      const Value logits = leaky_relu(
          add(add(gather_rows(matmul(agg, ctx.param(blk.attn_src[h])), batch.src),
                  gather_rows(matmul(agg, ctx.param(blk.attn_dst[h])), batch.dst)),
              matmul(edges, ctx.param(blk.attn_edge[h]))));
      const Value alpha = segment_softmax(logits, batch.dst, n);
      if (trace) trace->alpha[b].push_back(Matrix(value_of(alpha)));
      const Value projected = gather_rows(matmul(agg, ctx.param(blk.head_w[h])), batch.src);
      const Value head = scatter_add_rows(mul(projected, alpha), batch.dst, n);
      heads_sum = h == 0 ? head : add(heads_sum, head);
    }
    const Value attended = scale(heads_sum, 1.0 / static_cast<double>(blk.head_w.size()));
    x = add(attended, matmul(x, ctx.param(blk.skip)));
  }

  const Value pooled = ad::div(scatter_add_rows(x, batch.graph_of_node, batch.n_graphs),
                               ctx.constant(batch.nodes_per_graph));
  return {x, pooled};
}

}  // namespace gridrl
