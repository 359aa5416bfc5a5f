#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridrl/environment.hpp"
#include "gridrl/gnn.hpp"
#include "gridrl/graph.hpp"
#include "gridrl/prior.hpp"

namespace gridrl {

struct AgentConfig {
  double gamma = 0.99;
  double beta = 1.0;
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int epochs = 4;
  int segment = 64;  // macro-steps per rollout
  int minibatch = 16;
  double lr = 3e-4;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  int updates = 300;
  std::uint64_t seed = 0;
  /// false: plain PPO baseline (beta = 0, candidates = whole feasible set).
  bool use_prior = true;
  EncoderConfig encoder;
};

/// Policy-value network: its own encoder theta, a linear policy head over
/// the whole library and a linear value head.
struct PolicyParams {
  EncoderParams encoder;
  Matrix pi_w, pi_b;  // d x |A|, 1 x |A|
  Matrix v_w, v_b;    // d x 1, 1 x 1

  static PolicyParams init(int n_actions, const EncoderConfig& config, std::mt19937_64& rng);
  int n_actions() const { return static_cast<int>(pi_w.cols()); }
  void collect(ad::ParamList& out);
};

template <class Value>
struct PolicyOutput {
  Value logits;  // graphs x |A|
  Value value;   // graphs x 1
};

template <class Ctx>
PolicyOutput<typename Ctx::Value> policy_forward(const Ctx& ctx, const GraphBatch& batch,
                                                 const PolicyParams& params) {
  const auto z = encode(ctx, batch, params.encoder).z;
  return {ad::add(ad::matmul(z, ctx.param(params.pi_w)), ctx.param(params.pi_b)),
          ad::add(ad::matmul(z, ctx.param(params.v_w)), ctx.param(params.v_b))};
}

/// Candidate actions and their physics scores at one decision point.
/// Plain PPO uses the whole feasible set with zero scores.
CandidateSet plain_candidates(std::span<const std::uint8_t> mask);

/// softmax(logit + beta * score) over the candidates, as a full-library
/// vector with zeros outside. Throws UsageError on an empty candidate set.
Eigen::VectorXd reweighted_policy(const Eigen::VectorXd& logits, const CandidateSet& candidates,
                                  double beta);

/// Inverse-CDF draw in library index order, so the result does not depend
/// on candidate ordering.
int sample_action(const Eigen::VectorXd& probs, std::mt19937_64& rng);
/// Highest probability, lowest index on ties.
int argmax_action(const Eigen::VectorXd& probs);

// ---------------------------------------------------------------------------
// Semi-MDP rollouts and PPO.

struct MacroTransition {
  GraphObs graph;
  CandidateSet candidates;
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;  // V_theta(G) at collection time
  double macro_reward = 0.0;
  double macro_discount = 1.0;
  int k = 0;
  bool terminal = false;
  double ret = 0.0;
  double advantage = 0.0;
  std::vector<double> micro_rewards;  // r_{t_m} .. r_{t_m + k - 1}
};

/// macro reward sum_j gamma^j r_j and macro discount gamma^k.
std::pair<double, double> macro_reward(std::span<const double> micro_rewards, double gamma);

/// Reverse recursion G_m = R_m (+ Gamma_m G_{m+1} when not terminal), with
/// the tail bootstrapped by `bootstrap_value`; then A_m = G_m - V_m
/// normalized over the batch.
void compute_returns(std::span<MacroTransition> transitions, double bootstrap_value);

/// Decision machinery shared by training and evaluation.
struct PolicyBundle {
  const GridModel* grid = nullptr;
  const ActionLibrary* lib = nullptr;
  const PolicyParams* policy = nullptr;
  const SurrogateParams* surrogate = nullptr;  // unused when !config.use_prior
  PriorConfig prior;
  AgentConfig config;
  double hazard_threshold = 0.95;
  std::shared_ptr<const Matrix> surrogate_table;  // action_table of the frozen surrogate

  /// Tabulates the frozen surrogate's action half; call after filling the fields.
  void prepare();
  CandidateSet candidates(const GraphObs& graph, std::span<const std::uint8_t> mask) const;
  double beta() const { return config.use_prior ? config.beta : 0.0; }
};

/// Persistent environment cursor cycling through training episodes.
class RolloutState {
 public:
  RolloutState(const GridModel& grid, std::vector<Episode> episodes, EnvConfig env,
               std::uint64_t seed);

  /// Advances under NoOp to the next hazard, moving to later episodes as
  /// needed. Throws InvalidEpisodeError if a full pass finds no hazard.
  const Observation& next_hazard();
  StepResult step(const Action& action);
  const Observation& observation() const { return obs_; }
  std::mt19937_64& rng() { return rng_; }
  std::uint64_t micro_steps() const { return micro_steps_; }
  int episodes_started() const { return episodes_started_; }

 private:
  void start_episode();

  const GridModel* grid_;
  std::vector<Episode> episodes_;
  EnvConfig env_;
  std::unique_ptr<Simulator> sim_;
  Observation obs_;
  std::size_t cursor_ = 0;
  bool live_ = false;
  std::mt19937_64 rng_;
  std::uint64_t micro_steps_ = 0;
  int episodes_started_ = 0;
};

struct Rollout {
  std::vector<MacroTransition> transitions;
  std::optional<GraphObs> truncation;  // set when the last macro is not terminal
  double bootstrap_value = 0.0;
};

Rollout run_macro_rollout(RolloutState& state, const PolicyBundle& bundle, int segment);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio_first = 0.0;  // mean ratio on the first minibatch pass
  double clip_fraction = 0.0;
};

UpdateStats ppo_update(std::span<const MacroTransition> batch, PolicyParams& params,
                       const AgentConfig& config, ad::AdamState& adam, std::mt19937_64& rng);

/// Loss of one minibatch on a tape; exposed for the ratio and clipping checks.
struct PpoLoss {
  ad::Var total;
  ad::Var ratio;  // batch x 1
  double policy_term = 0.0;
  double value_term = 0.0;
  double entropy = 0.0;
};
PpoLoss ppo_loss(ad::Tape& tape, std::span<const MacroTransition* const> batch,
                 const PolicyParams& params, const AgentConfig& config);

/// -min(r A, clip(r, 1 - eps, 1 + eps) A) for scalars.
double clipped_objective(double ratio, double advantage, double eps);

struct TrainLogRow {
  int update = 0;
  double mean_macro_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

/// Semi-MDP PPO against a frozen surrogate (ignored for the plain baseline).
PolicyParams train_agent(const GridModel& grid, const ActionLibrary& lib,
                         std::vector<Episode> episodes, const EnvConfig& env,
                         const SurrogateParams* surrogate, const PriorConfig& prior,
                         const AgentConfig& config,
                         const std::function<void(const TrainLogRow&)>& on_update = {});

// ---------------------------------------------------------------------------
// Controllers used by evaluation.

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(const Episode& /*episode*/) {}
  virtual Action act(const Simulator& sim, const Observation& obs) = 0;
};

class NoOpController : public Controller {
 public:
  std::string name() const override { return "NoOp"; }
  Action act(const Simulator&, const Observation&) override { return Action::noop(); }
};

/// Uniform over the whole library at every step, ignoring feasibility.
class RandomController : public Controller {
 public:
  RandomController(const ActionLibrary& lib, std::uint64_t seed) : lib_(&lib), seed_(seed) {}
  std::string name() const override { return "Random"; }
  void begin_episode(const Episode& episode) override;
  Action act(const Simulator& sim, const Observation& obs) override;

 private:
  const ActionLibrary* lib_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
};

/// One-step look-ahead over every feasible action at hazards.
class GreedyOracle : public Controller {
 public:
  GreedyOracle(const ActionLibrary& lib, double hazard_threshold)
      : lib_(&lib), hazard_threshold_(hazard_threshold) {}
  std::string name() const override { return "Greedy"; }
  Action act(const Simulator& sim, const Observation& obs) override;
  /// Index chosen at the last hazard step.
  int last_choice() const { return last_choice_; }

 private:
  const ActionLibrary* lib_;
  double hazard_threshold_;
  int last_choice_ = 0;
};

/// Hazard-gated learned agent; deterministic argmax unless `sample` is set.
class LearnedController : public Controller {
 public:
  LearnedController(std::string name, PolicyBundle bundle, bool sample = false,
                    std::uint64_t seed = 0)
      : name_(std::move(name)), bundle_(std::move(bundle)), sample_(sample), seed_(seed) {}
  std::string name() const override { return name_; }
  void begin_episode(const Episode& episode) override;
  Action act(const Simulator& sim, const Observation& obs) override;

 private:
  std::string name_;
  PolicyBundle bundle_;
  bool sample_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
};

/// Full decision at a hazard state: candidates, probabilities, chosen index.
struct Decision {
  CandidateSet candidates;
  Eigen::VectorXd probs;
  double value = 0.0;
  int action = 0;
  double log_prob = 0.0;
};
Decision decide(const PolicyBundle& bundle, const GraphObs& graph,
                std::span<const std::uint8_t> mask, std::mt19937_64* rng);

}  // namespace gridrl
