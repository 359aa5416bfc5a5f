// Command-line driver: data generation, two-stage training, evaluation.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "gridrl/errors.hpp"
#include "gridrl/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kMissingArtifact = 3, kBadConfig = 4, kRuntime = 5 };

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::string> grid;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> eval_seed;
  std::optional<int> episodes;
  std::optional<int> length;
  std::optional<int> epochs;
  std::optional<int> samples_per_state;
  std::optional<int> updates;
  std::optional<double> beta;
  std::optional<int> k;
  std::optional<double> hazard;
  std::vector<std::uint64_t> seeds;
};

gridrl::RunConfig resolve(const Overrides& o) {
  gridrl::RunConfig c = o.config.empty() ? gridrl::RunConfig{} : gridrl::load_config(o.config);
  if (o.out) c.out_dir = *o.out;
  if (o.grid) c.grid = *o.grid;
  if (o.workers) c.workers = *o.workers;
  if (o.seed) c.train_seed = *o.seed;
  if (o.eval_seed) c.eval_seed = *o.eval_seed;
  if (o.episodes) c.train_episodes = *o.episodes;
  if (o.length) c.episodes.length = *o.length;
  if (o.epochs) c.surrogate_train.epochs = *o.epochs;
  if (o.samples_per_state) c.collect.samples_per_state = *o.samples_per_state;
  if (o.updates) c.agent.updates = *o.updates;
  if (o.beta) c.agent.beta = *o.beta;
  if (o.k) c.prior.k = *o.k;
  if (o.hazard) c.env.hazard_threshold = *o.hazard;
  if (!o.seeds.empty()) c.agent_seeds = o.seeds;
  gridrl::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed topology control on a DC grid simulator"};
  app.require_subcommand(1);
  Overrides o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out, "output directory");
    sub->add_option("--grid", o.grid, "builtin grid name or grid JSON path");
    sub->add_option("--workers", o.workers, "parallel evaluation workers");
    sub->add_option("--hazard-threshold", o.hazard, "risk level that triggers the agent");
    sub->add_option("--length", o.length, "micro-steps per episode");
    sub->add_option("--train-episodes", o.episodes, "number of training episodes");
    sub->add_option("--eval-seed", o.eval_seed, "seed of the evaluation episodes");
  };

  auto* gen = app.add_subcommand("gen-data", "write training and evaluation episode CSVs");
  common(gen);
  gen->add_option("--seed", o.seed, "seed of the training episodes");

  auto* prior = app.add_subcommand("train-prior", "collect the risk dataset and fit the surrogate");
  common(prior);
  prior->add_option("--seed", o.seed, "seed of the training episodes");
  prior->add_option("--epochs", o.epochs, "surrogate training epochs");
  prior->add_option("--samples-per-state", o.samples_per_state, "labeled actions per hazard state");

  std::string method = "both";
  auto* agent = app.add_subcommand("train-agent", "semi-MDP PPO against the frozen surrogate");
  common(agent);
  agent->add_option("--seed", o.seed, "seed of the training episodes");
  agent->add_option("--method", method, "ours, ppo or both")
      ->check(CLI::IsMember({"ours", "ppo", "both"}));
  agent->add_option("--seeds", o.seeds, "agent training seeds");
  agent->add_option("--updates", o.updates, "PPO updates per seed");
  agent->add_option("--beta", o.beta, "prior strength");
  agent->add_option("-k,--topk", o.k, "candidate set size");

  std::string eval_method = "ours";
  std::uint64_t eval_agent_seed = 0;
  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "score one agent on the evaluation episodes");
  common(eval);
  eval->add_option("--method", eval_method, "random, ppo, greedy, ours or noop")
      ->check(CLI::IsMember({"random", "ppo", "greedy", "ours", "noop"}));
  eval->add_option("--agent-seed", eval_agent_seed, "which trained seed to load");
  eval->add_option("--checkpoint", checkpoint, "policy checkpoint stem (overrides the run directory)");
  eval->add_option("--beta", o.beta, "prior strength");
  eval->add_option("-k,--topk", o.k, "candidate set size");

  auto* cmp = app.add_subcommand("compare", "evaluate Random, PPO, Greedy and Ours into results.csv");
  common(cmp);
  cmp->add_option("--seeds", o.seeds, "agent seeds to aggregate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const gridrl::RunConfig config = resolve(o);
    if (gen->parsed()) {
      const auto files = gridrl::gen_data(config);
      std::cout << "wrote " << files.size() << " episode files to "
                << (config.out_dir / "episodes").string() << "\n";
    } else if (prior->parsed()) {
      const auto run = gridrl::train_prior(config, &std::cout);
      std::cout << "surrogate checksum " << gridrl::surrogate_checksum(run.params) << "\n";
    } else if (agent->parsed()) {
      const gridrl::GridModel grid = gridrl::resolve_grid(config.grid);
      const auto lib = gridrl::enumerate_actions(grid);
      const gridrl::Artifacts art{config.out_dir};
      std::optional<gridrl::SurrogateParams> surrogate;
      if (method != "ppo") {
        surrogate = gridrl::load_surrogate(art.surrogate(), static_cast<int>(lib.size()));
      }
      for (std::uint64_t seed : config.agent_seeds) {
        if (method != "ppo") gridrl::train_policy(config, &*surrogate, true, seed, &std::cout);
        if (method != "ours") gridrl::train_policy(config, nullptr, false, seed, &std::cout);
      }
    } else if (eval->parsed()) {
      const gridrl::GridModel grid = gridrl::resolve_grid(config.grid);
      const auto lib = gridrl::enumerate_actions(grid);
      const auto sets = gridrl::make_episode_sets(grid, config);
      const gridrl::Artifacts art{config.out_dir};
      const int n = static_cast<int>(lib.size());
      std::optional<gridrl::SurrogateParams> surrogate;
      std::optional<gridrl::PolicyParams> policy;
      if (eval_method == "ours") surrogate = gridrl::load_surrogate(art.surrogate(), n);
      if (eval_method == "ours" || eval_method == "ppo") {
        const auto stem = checkpoint.empty() ? art.policy(eval_method == "ours", eval_agent_seed)
                                             : std::filesystem::path(checkpoint);
        policy = gridrl::load_policy(stem, n);
      }
      const gridrl::ControllerFactory factory = [&] {
        return gridrl::make_controller(eval_method, config, grid, lib,
                                       surrogate ? &*surrogate : nullptr,
                                       policy ? &*policy : nullptr, eval_agent_seed);
      };
      const auto report = gridrl::evaluate(factory, grid, sets.eval, config.env, config.workers);
      const gridrl::ResultRow row{report.method, report.avg_reward, report.avg_steps,
                                  report.ms_per_step};
      std::cout << gridrl::results_csv(std::span<const gridrl::ResultRow>(&row, 1));
    } else if (cmp->parsed()) {
      const auto rows = gridrl::compare(config, &std::cerr);
      std::cout << gridrl::results_csv(rows);
    }
  } catch (const gridrl::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const gridrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const gridrl::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
