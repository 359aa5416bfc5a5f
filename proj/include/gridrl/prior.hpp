#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gridrl/environment.hpp"
#include "gridrl/gnn.hpp"
#include "gridrl/graph.hpp"

namespace gridrl {

struct PriorConfig {
  double tau = 0.5;
  int k = 64;
};

struct SurrogateConfig {
  EncoderConfig encoder;
  int action_dim = 16;   // d_a
  int risk_hidden = 64;  // width of the risk MLP's hidden layer
};

/// Frozen after training: encoder phi, one embedding row per library
/// action, and a two-layer risk MLP with an outer ReLU.
struct SurrogateParams {
  EncoderParams encoder;
  Matrix action_embedding;  // |A| x d_a
  // First risk layer on [z, e(a)], kept as its z and e(a) row blocks so the
  // action half can be tabulated once the surrogate is frozen.
  Matrix risk_wz, risk_wa, risk_b1;  // d x hidden, d_a x hidden, 1 x hidden
  Matrix risk_w2, risk_b2;           // hidden x 1, 1 x 1

  static SurrogateParams init(int n_actions, const SurrogateConfig& config, std::mt19937_64& rng);
  int n_actions() const { return static_cast<int>(action_embedding.rows()); }
  void collect(ad::ParamList& out);
};

/// FNV-1a over every surrogate tensor.
std::uint64_t surrogate_checksum(const SurrogateParams& params);

/// e(a) W_a for every action: |A| x hidden.
template <class Ctx>
typename Ctx::Value action_table(const Ctx& ctx, const SurrogateParams& params) {
  return ad::matmul(ctx.param(params.action_embedding), ctx.param(params.risk_wa));
}

/// Predicted next-step risk for (graph_of_query[q], action_of_query[q]),
/// given graph embeddings z (one row per graph) and the action table.
/// Returns queries x 1.
template <class Ctx, class Value = typename Ctx::Value>
Value risk_head(const Ctx& ctx, const SurrogateParams& params, const Value& z, const Value& table,
                std::span<const int> graph_of_query, std::span<const int> action_of_query) {
  const Value hidden = ad::leaky_relu(
      ad::add(ad::add(ad::gather_rows(ad::matmul(z, ctx.param(params.risk_wz)), graph_of_query),
                      ad::gather_rows(table, action_of_query)),
              ctx.param(params.risk_b1)));
  return ad::relu(
      ad::add(ad::matmul(hidden, ctx.param(params.risk_w2)), ctx.param(params.risk_b2)));
}

/// Predicted risks for several actions on one graph (one encoder pass).
/// `table` is an optional precomputed action_table.
Eigen::VectorXd predict_risks(const GraphObs& graph, std::span<const int> actions,
                              const SurrogateParams& params, const Matrix* table = nullptr);
double predict_risk(const GraphObs& graph, int action, const SurrogateParams& params);

/// s = -risk / tau.
double physics_score(double predicted_risk, double tau);

/// Softmax of `scores` over mask; 0 elsewhere. Throws UsageError if the mask is empty.
Eigen::VectorXd gibbs_prior(const Eigen::VectorXd& scores, std::span<const std::uint8_t> mask);

/// Indices of the min(k, |mask|) highest scores among masked entries,
/// descending, ties to the lower index. Throws UsageError on an empty mask.
std::vector<int> select_topk(const Eigen::VectorXd& scores, std::span<const std::uint8_t> mask,
                             int k);

struct CandidateSet {
  std::vector<int> actions;      // descending score
  std::vector<double> scores;    // physics score of each candidate
};

CandidateSet topk_candidates(const GraphObs& graph, std::span<const std::uint8_t> mask,
                             const SurrogateParams& params, const PriorConfig& config,
                             const Matrix* table = nullptr);

// ---------------------------------------------------------------------------
// Supervision for the surrogate.

struct RiskSample {
  int state = 0;  // index into RiskDataset::states
  int action = 0;
  double target = 0.0;
};

struct RiskDataset {
  std::vector<GraphObs> states;
  std::vector<RiskSample> samples;
};

struct CollectConfig {
  int samples_per_state = 32;  // M, NoOp included
  std::uint64_t seed = 0;
  int max_states = 0;          // 0 = no limit
};

/// Rolls each episode with NoOp outside hazards and a uniformly random
/// feasible action at hazards; every hazard state gets M labeled actions.
RiskDataset collect_risk_dataset(const GridModel& grid, std::span<const Episode> episodes,
                                 const ActionLibrary& lib, const EnvConfig& env,
                                 const CollectConfig& config);

void save_dataset(const RiskDataset& data, const std::filesystem::path& path);
RiskDataset load_dataset(const std::filesystem::path& path);

/// Partition by state: roughly `fraction` of the states (and all their
/// samples) go to the second dataset.
std::pair<RiskDataset, RiskDataset> split_by_state(const RiskDataset& data, double fraction,
                                                   std::uint64_t seed);

/// Sets the output bias so the mean pre-activation equals the mean target.
/// Otherwise a random init can leave the outer ReLU at zero for every
/// sample, where it gets no gradient.
void init_output_bias(SurrogateParams& params, const RiskDataset& data);

struct SurrogateTrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

/// L2 regression with Adam. Batches hold whole states (about batch_size
/// samples each) so one encoder pass serves every sample of a state.
/// Returns the mean training loss per epoch.
std::vector<double> train_surrogate(const RiskDataset& data, SurrogateParams& params,
                                    const SurrogateTrainConfig& config,
                                    const std::function<void(int, double)>& on_epoch = {});

/// Mean squared error of predictions on a dataset.
double surrogate_mse(const RiskDataset& data, const SurrogateParams& params);

/// Predictions for every sample, in sample order.
Eigen::VectorXd predict_dataset(const RiskDataset& data, const SurrogateParams& params);

}  // namespace gridrl
