#include "gridrl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridrl/errors.hpp"
#include "gridrl/optim.hpp"

namespace gridrl {

PolicyParams PolicyParams::init(int n_actions, const EncoderConfig& config, std::mt19937_64& rng) {
  PolicyParams p;
  p.encoder = EncoderParams::init(config, rng);
  p.pi_w = ad::glorot_uniform(config.hidden, n_actions, rng);
  p.pi_b = Matrix::Zero(1, n_actions);
  p.v_w = ad::glorot_uniform(config.hidden, 1, rng);
  p.v_b = Matrix::Zero(1, 1);
  return p;
}

void PolicyParams::collect(ad::ParamList& out) {
  encoder.collect(out, "policy.encoder");
  out.push_back({"policy.pi_w", &pi_w});
  out.push_back({"policy.pi_b", &pi_b});
  out.push_back({"policy.v_w", &v_w});
  out.push_back({"policy.v_b", &v_b});
}

CandidateSet plain_candidates(std::span<const std::uint8_t> mask) {
  CandidateSet out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    out.actions.push_back(static_cast<int>(i));
    out.scores.push_back(0.0);
  }
  return out;
}

namespace {

// Shifted logits and candidate mask as 1 x |A| rows; the PPO loss builds the
// same rows for a whole minibatch, so both paths share the kernels.
void candidate_row(const CandidateSet& candidates, double beta, Eigen::Index n, Matrix& shift,
                   ad::Mask& mask) {
  shift = Matrix::Zero(1, n);
  mask = ad::Mask::Constant(1, n, false);
  for (std::size_t j = 0; j < candidates.actions.size(); ++j) {
    const int a = candidates.actions[j];
    if (a < 0 || a >= n) throw UsageError("candidate index out of range");
    shift(0, a) = beta * candidates.scores[j];
    mask(0, a) = true;
  }
}

}  // namespace

Eigen::VectorXd reweighted_policy(const Eigen::VectorXd& logits, const CandidateSet& candidates,
                                  double beta) {
  if (candidates.actions.empty()) throw UsageError("reweighted policy needs a candidate");
  Matrix shift;
  ad::Mask mask;
  candidate_row(candidates, beta, logits.size(), shift, mask);
  const Matrix x = ad::add(Matrix(logits.transpose()), shift);
  return ad::masked_softmax(x, mask).row(0).transpose();
}

int sample_action(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cdf = 0.0;
  int last = -1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cdf += probs[i];
    last = static_cast<int>(i);
    if (u < cdf) return last;
  }
  if (last < 0) throw UsageError("cannot sample from an all-zero distribution");
  return last;  // rounding left cdf slightly below 1
}

int argmax_action(const Eigen::VectorXd& probs) {
  int best = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = static_cast<int>(i);
  }
  return best;
}

std::pair<double, double> macro_reward(std::span<const double> micro_rewards, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (double r : micro_rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return {total, std::pow(gamma, static_cast<double>(micro_rewards.size()))};
}

void compute_returns(std::span<MacroTransition> transitions, double bootstrap_value) {
  if (transitions.empty()) return;
  double next = bootstrap_value;
  for (std::size_t i = transitions.size(); i-- > 0;) {
    MacroTransition& tr = transitions[i];
    tr.ret = tr.terminal ? tr.macro_reward : tr.macro_reward + tr.macro_discount * next;
    next = tr.ret;
  }
  double mean = 0.0;
  for (MacroTransition& tr : transitions) {
    tr.advantage = tr.ret - tr.value;
    mean += tr.advantage;
  }
  mean /= static_cast<double>(transitions.size());
  double var = 0.0;
  for (const MacroTransition& tr : transitions) var += (tr.advantage - mean) * (tr.advantage - mean);
  const double sd = std::sqrt(var / static_cast<double>(transitions.size()));
  for (MacroTransition& tr : transitions) tr.advantage = (tr.advantage - mean) / (sd + 1e-8);
}

CandidateSet PolicyBundle::candidates(const GraphObs& graph,
                                      std::span<const std::uint8_t> mask) const {
  if (!config.use_prior) return plain_candidates(mask);
  if (!surrogate) throw UsageError("prior-reweighted policy needs a surrogate");
  return topk_candidates(graph, mask, *surrogate, prior, surrogate_table.get());
}

void PolicyBundle::prepare() {
  if (config.use_prior && surrogate) {
    surrogate_table = std::make_shared<const Matrix>(action_table(ad::EvalContext{}, *surrogate));
  }
}

Decision decide(const PolicyBundle& bundle, const GraphObs& graph,
                std::span<const std::uint8_t> mask, std::mt19937_64* rng) {
  Decision d;
  d.candidates = bundle.candidates(graph, mask);
  const ad::EvalContext ctx;
  const auto out = policy_forward(ctx, make_batch(graph), *bundle.policy);
  d.value = out.value(0, 0);
  Matrix shift;
  ad::Mask row_mask;
  candidate_row(d.candidates, bundle.beta(), out.logits.cols(), shift, row_mask);
  const Matrix x = ad::add(out.logits, shift);
  d.probs = ad::masked_softmax(x, row_mask).row(0).transpose();
  d.action = rng ? sample_action(d.probs, *rng) : argmax_action(d.probs);
  d.log_prob = ad::masked_log_softmax(x, row_mask)(0, d.action);
  return d;
}

// ---------------------------------------------------------------------------

RolloutState::RolloutState(const GridModel& grid, std::vector<Episode> episodes, EnvConfig env,
                           std::uint64_t seed)
    : grid_(&grid), episodes_(std::move(episodes)), env_(env), rng_(seed) {
  if (episodes_.empty()) throw UsageError("rollouts need at least one episode");
}

void RolloutState::start_episode() {
  sim_ = std::make_unique<Simulator>(*grid_, episodes_[cursor_], env_);
  cursor_ = (cursor_ + 1) % episodes_.size();
  obs_ = sim_->reset();
  live_ = true;
  ++episodes_started_;
}

const Observation& RolloutState::next_hazard() {
  std::size_t fruitless = 0;
  for (;;) {
    if (!live_ || obs_.terminal) start_episode();
    while (!obs_.terminal && !hazard(obs_, env_.hazard_threshold)) {
      obs_ = sim_->step(obs_, Action::noop()).obs;
      ++micro_steps_;
    }
    if (!obs_.terminal) return obs_;
    if (++fruitless > episodes_.size()) {
      throw InvalidEpisodeError("no hazard state in any training episode");
    }
  }
}

StepResult RolloutState::step(const Action& action) {
  StepResult r = sim_->step(obs_, action);
  obs_ = r.obs;
  ++micro_steps_;
  return r;
}

Rollout run_macro_rollout(RolloutState& state, const PolicyBundle& bundle, int segment) {
  Rollout out;
  const double gamma = bundle.config.gamma;
  while (static_cast<int>(out.transitions.size()) < segment) {
    const Observation& obs = state.next_hazard();
    MacroTransition tr;
    tr.graph = build_graph(obs, *bundle.grid);
    const auto mask = feasibility_mask(obs, *bundle.lib);
    Decision d = decide(bundle, tr.graph, mask, &state.rng());
    tr.action = d.action;
    tr.log_prob = d.log_prob;
    tr.value = d.value;
    tr.candidates = std::move(d.candidates);

    StepResult r = state.step((*bundle.lib)[static_cast<std::size_t>(tr.action)]);
    tr.micro_rewards.push_back(r.reward);
    while (!r.done && !hazard(r.obs, bundle.hazard_threshold)) {
      r = state.step(Action::noop());
      tr.micro_rewards.push_back(r.reward);
    }
    tr.terminal = r.done;
    tr.k = static_cast<int>(tr.micro_rewards.size());
    std::tie(tr.macro_reward, tr.macro_discount) = macro_reward(tr.micro_rewards, gamma);
    out.transitions.push_back(std::move(tr));
  }
  if (!out.transitions.back().terminal) {
    out.truncation = build_graph(state.observation(), *bundle.grid);
    const ad::EvalContext ctx;
    out.bootstrap_value = policy_forward(ctx, make_batch(*out.truncation), *bundle.policy).value(0, 0);
  }
  return out;
}

double clipped_objective(double ratio, double advantage, double eps) {
  return -std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

PpoLoss ppo_loss(ad::Tape& tape, std::span<const MacroTransition* const> batch,
                 const PolicyParams& params, const AgentConfig& config) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index n = params.n_actions();
  const double beta = config.use_prior ? config.beta : 0.0;

  std::vector<const GraphObs*> graphs;
  Matrix shift(b, n);
  ad::Mask mask(b, n);
  Matrix onehot = Matrix::Zero(b, n);
  Matrix old_logp(b, 1), adv(b, 1), ret(b, 1);
  for (Eigen::Index i = 0; i < b; ++i) {
    const MacroTransition& tr = *batch[static_cast<std::size_t>(i)];
    if (!std::isfinite(tr.log_prob)) throw UsageError("transition lacks a sampling log-probability");
    graphs.push_back(&tr.graph);
    Matrix s;
    ad::Mask m;
    candidate_row(tr.candidates, beta, n, s, m);
    shift.row(i) = s;
    mask.row(i) = m;
    onehot(i, tr.action) = 1.0;
    old_logp(i, 0) = tr.log_prob;
    adv(i, 0) = tr.advantage;
    ret(i, 0) = tr.ret;
  }

  const ad::TapeContext ctx{tape};
  const auto out = policy_forward(ctx, make_batch(graphs), params);
  const ad::Var x = ad::add(out.logits, tape.constant(shift));
  const ad::Var logp = ad::masked_log_softmax(x, mask);
  const ad::Var probs = ad::masked_softmax(x, mask);
  const ad::Var ones = tape.constant(Matrix::Ones(n, 1));
  const ad::Var logp_a = ad::matmul(ad::mul(logp, tape.constant(onehot)), ones);

  PpoLoss loss;
  loss.ratio = ad::exp(ad::sub(logp_a, tape.constant(old_logp)));
  const ad::Var a = tape.constant(adv);
  const ad::Var surrogate = ad::mean(ad::minimum(
      ad::mul(loss.ratio, a), ad::mul(ad::clip(loss.ratio, 1.0 - config.clip, 1.0 + config.clip), a)));
  const ad::Var value_loss = ad::mean(ad::square(ad::sub(out.value, tape.constant(ret))));
  // sum p log p = -entropy
  const ad::Var neg_entropy = ad::mean(ad::matmul(ad::mul(probs, logp), ones));
  loss.total = ad::add(ad::add(ad::scale(surrogate, -1.0), ad::scale(value_loss, config.value_coef)),
                       ad::scale(neg_entropy, config.entropy_coef));
  loss.policy_term = surrogate.value()(0, 0);
  loss.value_term = value_loss.value()(0, 0);
  loss.entropy = -neg_entropy.value()(0, 0);
  return loss;
}

UpdateStats ppo_update(std::span<const MacroTransition> batch, PolicyParams& params,
                       const AgentConfig& config, ad::AdamState& adam, std::mt19937_64& rng) {
  UpdateStats stats;
  if (batch.empty()) return stats;
  ad::ParamList list;
  params.collect(list);
  const auto ptrs = ad::pointers(list);
  const auto cptrs = ad::const_pointers(list);

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  const auto mb = static_cast<std::size_t>(std::max(1, config.minibatch));
  int passes = 0;
  std::size_t first_epoch_count = 0;
  std::size_t clipped = 0;
  std::size_t counted = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += mb) {
      const std::size_t end = std::min(order.size(), begin + mb);
      std::vector<const MacroTransition*> chunk;
      for (std::size_t i = begin; i < end; ++i) chunk.push_back(&batch[order[i]]);

      ad::Tape tape;
      const PpoLoss loss = ppo_loss(tape, chunk, params, config);
      auto grads = ad::grad(tape, loss.total, cptrs);
      if (config.max_grad_norm > 0.0) ad::clip_grad_norm(grads, config.max_grad_norm);
      ad::adam_step(ptrs, grads, adam);

      const Matrix& r = loss.ratio.value();
      if (epoch == 0) {
        stats.mean_ratio_first += r.sum();
        first_epoch_count += static_cast<std::size_t>(r.size());
      }
      for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (std::abs(r(i) - 1.0) > config.clip) ++clipped;
      }
      counted += static_cast<std::size_t>(r.size());
      stats.policy_loss += loss.policy_term;
      stats.value_loss += loss.value_term;
      stats.entropy += loss.entropy;
      ++passes;
    }
  }
  stats.policy_loss /= passes;
  stats.value_loss /= passes;
  stats.entropy /= passes;
  stats.mean_ratio_first /= static_cast<double>(first_epoch_count);
  stats.clip_fraction = static_cast<double>(clipped) / static_cast<double>(counted);
  return stats;
}

PolicyParams train_agent(const GridModel& grid, const ActionLibrary& lib,
                         std::vector<Episode> episodes, const EnvConfig& env,
                         const SurrogateParams* surrogate, const PriorConfig& prior,
                         const AgentConfig& config,
                         const std::function<void(const TrainLogRow&)>& on_update) {
  std::mt19937_64 init_rng(config.seed);
  PolicyParams params = PolicyParams::init(static_cast<int>(lib.size()), config.encoder, init_rng);
  if (config.use_prior && surrogate) {
    if (surrogate->n_actions() != static_cast<int>(lib.size())) {
      throw ShapeError("surrogate was trained for a different action library");
    }
  }
  PolicyBundle bundle{&grid, &lib, &params, surrogate, prior, config, env.hazard_threshold, {}};
  bundle.prepare();
  RolloutState state(grid, std::move(episodes), env, config.seed ^ 0x7f4a7c15ULL);
  std::mt19937_64 update_rng(config.seed + 1);
  ad::AdamState adam;
  adam.lr = config.lr;

  for (int u = 0; u < config.updates; ++u) {
    Rollout rollout = run_macro_rollout(state, bundle, config.segment);
    compute_returns(rollout.transitions, rollout.bootstrap_value);
    const UpdateStats stats = ppo_update(rollout.transitions, params, config, adam, update_rng);
    if (on_update) {
      TrainLogRow row;
      row.update = u;
      for (const auto& tr : rollout.transitions) row.mean_macro_reward += tr.macro_reward;
      row.mean_macro_reward /= static_cast<double>(rollout.transitions.size());
      row.policy_loss = stats.policy_loss;
      row.value_loss = stats.value_loss;
      row.entropy = stats.entropy;
      on_update(row);
    }
  }
  return params;
}

// ---------------------------------------------------------------------------

namespace {

std::mt19937_64 episode_rng(std::uint64_t seed, const Episode& episode) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(episode.index),
                    static_cast<std::uint32_t>(episode.seed), 0xac7U};
  return std::mt19937_64(seq);
}

}  // namespace

void RandomController::begin_episode(const Episode& episode) { rng_ = episode_rng(seed_, episode); }

Action RandomController::act(const Simulator&, const Observation&) {
  std::uniform_int_distribution<std::size_t> pick(0, lib_->size() - 1);
  return (*lib_)[pick(rng_)];
}

Action GreedyOracle::act(const Simulator& sim, const Observation& obs) {
  if (!hazard(obs, hazard_threshold_)) return Action::noop();
  const double cap = sim.config().risk_cap;
  double best_risk = std::numeric_limits<double>::infinity();
  int best = 0;
  for (std::size_t i = 0; i < lib_->size(); ++i) {
    const Action& a = (*lib_)[i];
    if (!is_feasible(obs, a)) continue;
    const StepResult r = sim.simulate_one_step(obs, a);
    const double next = r.info.blackout ? cap : std::min(risk(r.obs), cap);
    if (next < best_risk) {
      best_risk = next;
      best = static_cast<int>(i);
    }
  }
  last_choice_ = best;
  return (*lib_)[static_cast<std::size_t>(best)];
}

void LearnedController::begin_episode(const Episode& episode) { rng_ = episode_rng(seed_, episode); }

Action LearnedController::act(const Simulator&, const Observation& obs) {
  if (!hazard(obs, bundle_.hazard_threshold)) return Action::noop();
  const GraphObs graph = build_graph(obs, *bundle_.grid);
  const auto mask = feasibility_mask(obs, *bundle_.lib);
  const Decision d = decide(bundle_, graph, mask, sample_ ? &rng_ : nullptr);
  return (*bundle_.lib)[static_cast<std::size_t>(d.action)];
}

}  // namespace gridrl
