#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridrl/agent.hpp"
#include "gridrl/environment.hpp"
#include "gridrl/prior.hpp"

namespace gridrl {

/// Invalid run configuration (bad value, unknown key, overlapping seeds).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string grid = "desk14";  // builtin name or path to a grid JSON
  std::filesystem::path out_dir = "runs/desk14";

  EpisodeGenConfig episodes;
  std::uint64_t train_seed = 1;
  int train_episodes = 600;
  std::uint64_t eval_seed = 2;
  int eval_episodes = 5;

  EnvConfig env;
  PriorConfig prior;
  SurrogateConfig surrogate;
  CollectConfig collect;
  SurrogateTrainConfig surrogate_train;
  AgentConfig agent;
  std::vector<std::uint64_t> agent_seeds{0, 1, 2};
  int workers = 1;
};

nlohmann::json config_to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys and bad values throw ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
void validate(const RunConfig& config);

GridModel resolve_grid(const std::string& name_or_path);

struct EpisodeSets {
  std::vector<Episode> train;
  std::vector<Episode> eval;
};
/// Throws ConfigError if the training and evaluation sets share a (seed, index).
EpisodeSets make_episode_sets(const GridModel& grid, const RunConfig& config);

// ---------------------------------------------------------------------------

struct StepTrace {
  Action action;
  double risk_before = 0.0;
  double reward = 0.0;
  std::uint64_t simulations = 0;  // one-step look-aheads inside act
  bool replaced = false;
};

struct EpisodeResult {
  int index = 0;
  double reward = 0.0;
  int steps = 0;
  bool blackout = false;
  double act_ms = 0.0;  // total time spent in act
  std::vector<StepTrace> trace;
};

struct EvalReport {
  std::string method;
  std::vector<EpisodeResult> episodes;
  double avg_reward = 0.0;
  double avg_steps = 0.0;
  double ms_per_step = 0.0;  // all act time over all micro-steps
};

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

/// Runs each episode to termination or horizon, timing every act call.
/// With workers > 1 each worker builds its own controller.
EvalReport evaluate(const ControllerFactory& factory, const GridModel& grid,
                    std::span<const Episode> episodes, const EnvConfig& env, int workers = 1);
EvalReport evaluate(Controller& controller, const GridModel& grid,
                    std::span<const Episode> episodes, const EnvConfig& env);

struct ResultRow {
  std::string method;
  double avg_reward = 0.0;
  double avg_steps = 0.0;
  double ms_per_step = 0.0;
};
std::string results_csv(std::span<const ResultRow> rows);

// ---------------------------------------------------------------------------
// Pipeline stages. Each writes its artifacts under config.out_dir.

struct Artifacts {
  std::filesystem::path dir;
  std::filesystem::path episodes_dir() const { return dir / "episodes"; }
  std::filesystem::path dataset() const { return dir / "risk_dataset.bin"; }
  std::filesystem::path surrogate() const { return dir / "surrogate"; }
  std::filesystem::path surrogate_log() const { return dir / "surrogate_loss.csv"; }
  std::filesystem::path policy(bool use_prior, std::uint64_t seed) const;
  std::filesystem::path train_log(bool use_prior, std::uint64_t seed) const;
  std::filesystem::path results() const { return dir / "results.csv"; }
};

void save_surrogate(const std::filesystem::path& stem, const SurrogateParams& params,
                    const SurrogateConfig& config);
/// Throws MissingArtifactError when absent, ShapeError when built for another library.
SurrogateParams load_surrogate(const std::filesystem::path& stem, int n_actions);
void save_policy(const std::filesystem::path& stem, const PolicyParams& params,
                 const AgentConfig& config);
PolicyParams load_policy(const std::filesystem::path& stem, int n_actions);

/// Writes one CSV per episode; returns the files written.
std::vector<std::filesystem::path> gen_data(const RunConfig& config);

struct PriorRun {
  RiskDataset dataset;
  SurrogateParams params;
  std::vector<double> loss_curve;
};
PriorRun train_prior(const RunConfig& config, std::ostream* log = nullptr);

PolicyParams train_policy(const RunConfig& config, const SurrogateParams* surrogate,
                          bool use_prior, std::uint64_t seed, std::ostream* log = nullptr);

/// Controllers by method name: random, ppo, greedy, ours, noop.
std::unique_ptr<Controller> make_controller(const std::string& method, const RunConfig& config,
                                            const GridModel& grid, const ActionLibrary& lib,
                                            const SurrogateParams* surrogate,
                                            const PolicyParams* policy, std::uint64_t seed);

/// Evaluates Random, PPO, Greedy and Ours from saved artifacts; learned and
/// random methods report the median over agent seeds.
std::vector<ResultRow> compare(const RunConfig& config, std::ostream* log = nullptr);

}  // namespace gridrl
