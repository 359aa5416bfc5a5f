#include "gridrl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <thread>

#include "gridrl/checkpoint.hpp"
#include "gridrl/errors.hpp"

namespace gridrl {

using nlohmann::json;

namespace {

// Reads known keys of one JSON object and rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for " + where_ + key);
    }
  }

  const json* section(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) throw ConfigError("unknown config key " + where_ + item.key());
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

std::string format_double(double v, const char* fmt = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

json config_to_json(const RunConfig& c) {
  json j;
  j["grid"] = c.grid;
  j["out_dir"] = c.out_dir.string();
  j["workers"] = c.workers;
  j["episodes"] = {{"length", c.episodes.length},
                   {"period", c.episodes.period},
                   {"amplitude", c.episodes.amplitude},
                   {"phase_jitter", c.episodes.phase_jitter},
                   {"noise", c.episodes.noise},
                   {"train_seed", c.train_seed},
                   {"train_count", c.train_episodes},
                   {"eval_seed", c.eval_seed},
                   {"eval_count", c.eval_episodes}};
  j["env"] = {{"hazard_threshold", c.env.hazard_threshold},
              {"sub_cooldown", c.env.sub_cooldown},
              {"line_cooldown", c.env.line_cooldown},
              {"trip_cooldown", c.env.trip_cooldown},
              {"hard_trip_rho", c.env.hard_trip_rho},
              {"soft_trip_rho", c.env.soft_trip_rho},
              {"soft_trip_steps", c.env.soft_trip_steps},
              {"risk_cap", c.env.risk_cap}};
  j["prior"] = {{"tau", c.prior.tau},
                {"k", c.prior.k},
                {"hidden", c.surrogate.encoder.hidden},
                {"heads", c.surrogate.encoder.heads},
                {"blocks", c.surrogate.encoder.blocks},
                {"action_dim", c.surrogate.action_dim},
                {"risk_hidden", c.surrogate.risk_hidden},
                {"samples_per_state", c.collect.samples_per_state},
                {"max_states", c.collect.max_states},
                {"collect_seed", c.collect.seed},
                {"epochs", c.surrogate_train.epochs},
                {"lr", c.surrogate_train.lr},
                {"batch_size", c.surrogate_train.batch_size},
                {"train_seed", c.surrogate_train.seed}};
  j["agent"] = {{"gamma", c.agent.gamma},
                {"beta", c.agent.beta},
                {"clip", c.agent.clip},
                {"value_coef", c.agent.value_coef},
                {"entropy_coef", c.agent.entropy_coef},
                {"epochs", c.agent.epochs},
                {"segment", c.agent.segment},
                {"minibatch", c.agent.minibatch},
                {"lr", c.agent.lr},
                {"max_grad_norm", c.agent.max_grad_norm},
                {"updates", c.agent.updates},
                {"hidden", c.agent.encoder.hidden},
                {"heads", c.agent.encoder.heads},
                {"blocks", c.agent.encoder.blocks},
                {"seeds", c.agent_seeds}};
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Fields top(j, "");
  top.get("grid", c.grid);
  std::string out = c.out_dir.string();
  top.get("out_dir", out);
  c.out_dir = out;
  top.get("workers", c.workers);
  if (const json* s = top.section("episodes")) {
    Fields f(*s, "episodes.");
    f.get("length", c.episodes.length);
    f.get("period", c.episodes.period);
    f.get("amplitude", c.episodes.amplitude);
    f.get("phase_jitter", c.episodes.phase_jitter);
    f.get("noise", c.episodes.noise);
    f.get("train_seed", c.train_seed);
    f.get("train_count", c.train_episodes);
    f.get("eval_seed", c.eval_seed);
    f.get("eval_count", c.eval_episodes);
    f.finish();
  }
  if (const json* s = top.section("env")) {
    Fields f(*s, "env.");
    f.get("hazard_threshold", c.env.hazard_threshold);
    f.get("sub_cooldown", c.env.sub_cooldown);
    f.get("line_cooldown", c.env.line_cooldown);
    f.get("trip_cooldown", c.env.trip_cooldown);
    f.get("hard_trip_rho", c.env.hard_trip_rho);
    f.get("soft_trip_rho", c.env.soft_trip_rho);
    f.get("soft_trip_steps", c.env.soft_trip_steps);
    f.get("risk_cap", c.env.risk_cap);
    f.finish();
  }
  if (const json* s = top.section("prior")) {
    Fields f(*s, "prior.");
    f.get("tau", c.prior.tau);
    f.get("k", c.prior.k);
    f.get("hidden", c.surrogate.encoder.hidden);
    f.get("heads", c.surrogate.encoder.heads);
    f.get("blocks", c.surrogate.encoder.blocks);
    f.get("action_dim", c.surrogate.action_dim);
    f.get("risk_hidden", c.surrogate.risk_hidden);
    f.get("samples_per_state", c.collect.samples_per_state);
    f.get("max_states", c.collect.max_states);
    f.get("collect_seed", c.collect.seed);
    f.get("epochs", c.surrogate_train.epochs);
    f.get("lr", c.surrogate_train.lr);
    f.get("batch_size", c.surrogate_train.batch_size);
    f.get("train_seed", c.surrogate_train.seed);
    f.finish();
  }
  if (const json* s = top.section("agent")) {
    Fields f(*s, "agent.");
    f.get("gamma", c.agent.gamma);
    f.get("beta", c.agent.beta);
    f.get("clip", c.agent.clip);
    f.get("value_coef", c.agent.value_coef);
    f.get("entropy_coef", c.agent.entropy_coef);
    f.get("epochs", c.agent.epochs);
    f.get("segment", c.agent.segment);
    f.get("minibatch", c.agent.minibatch);
    f.get("lr", c.agent.lr);
    f.get("max_grad_norm", c.agent.max_grad_norm);
    f.get("updates", c.agent.updates);
    f.get("hidden", c.agent.encoder.hidden);
    f.get("heads", c.agent.encoder.heads);
    f.get("blocks", c.agent.encoder.blocks);
    f.get("seeds", c.agent_seeds);
    f.finish();
  }
  top.finish();
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("config not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

void validate(const RunConfig& c) {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(!c.grid.empty(), "grid must be set");
  require(c.episodes.length >= 2, "episodes.length must be >= 2");
  require(c.episodes.period > 0, "episodes.period must be positive");
  require(c.episodes.amplitude >= 0 && c.episodes.noise >= 0, "load variation must be >= 0");
  require(c.train_episodes >= 1 && c.eval_episodes >= 1, "episode counts must be >= 1");
  require(c.train_seed != c.eval_seed, "training and evaluation seeds must differ");
  require(c.env.hazard_threshold > 0, "env.hazard_threshold must be positive");
  require(c.env.sub_cooldown >= 0 && c.env.line_cooldown >= 0 && c.env.trip_cooldown >= 0,
          "cooldowns must be >= 0");
  require(c.env.soft_trip_rho > 0 && c.env.hard_trip_rho >= c.env.soft_trip_rho,
          "trip thresholds must satisfy 0 < soft <= hard");
  require(c.env.soft_trip_steps >= 1, "env.soft_trip_steps must be >= 1");
  require(c.env.risk_cap > 0, "env.risk_cap must be positive");
  require(c.prior.tau > 0, "prior.tau must be positive");
  require(c.prior.k >= 1, "prior.k must be >= 1");
  require(c.surrogate.encoder.hidden >= 1 && c.surrogate.encoder.heads >= 1 &&
              c.surrogate.encoder.blocks >= 1 && c.surrogate.action_dim >= 1 &&
              c.surrogate.risk_hidden >= 1,
          "surrogate sizes must be >= 1");
  require(c.collect.samples_per_state >= 1, "prior.samples_per_state must be >= 1");
  require(c.surrogate_train.epochs >= 1 && c.surrogate_train.batch_size >= 1 &&
              c.surrogate_train.lr > 0,
          "surrogate training settings must be positive");
  require(c.agent.gamma > 0 && c.agent.gamma <= 1, "agent.gamma must be in (0, 1]");
  require(c.agent.beta >= 0, "agent.beta must be >= 0");
  require(c.agent.clip > 0, "agent.clip must be positive");
  require(c.agent.epochs >= 1 && c.agent.segment >= 1 && c.agent.minibatch >= 1,
          "agent batch settings must be >= 1");
  require(c.agent.lr > 0, "agent.lr must be positive");
  require(c.agent.updates >= 0, "agent.updates must be >= 0");
  require(c.agent.encoder.hidden >= 1 && c.agent.encoder.heads >= 1 && c.agent.encoder.blocks >= 1,
          "agent encoder sizes must be >= 1");
  require(!c.agent_seeds.empty(), "agent.seeds must not be empty");
  require(c.workers >= 1, "workers must be >= 1");
}

GridModel resolve_grid(const std::string& name_or_path) {
  if (name_or_path == "desk14") return builtin_desk14();
  return load_grid(name_or_path);
}

EpisodeSets make_episode_sets(const GridModel& grid, const RunConfig& config) {
  EpisodeSets sets;
  sets.train = generate_episodes(grid, config.train_seed, config.train_episodes, config.episodes);
  sets.eval = generate_episodes(grid, config.eval_seed, config.eval_episodes, config.episodes);
  std::set<std::pair<std::uint64_t, int>> train_ids;
  for (const Episode& e : sets.train) train_ids.insert({e.seed, e.index});
  for (const Episode& e : sets.eval) {
    if (train_ids.count({e.seed, e.index})) {
      throw ConfigError("evaluation episode also appears in the training set");
    }
  }
  return sets;
}

// ---------------------------------------------------------------------------

namespace {

EpisodeResult run_episode(Controller& controller, const GridModel& grid, const Episode& episode,
                          const EnvConfig& env) {
  using Clock = std::chrono::steady_clock;
  EpisodeResult res;
  res.index = episode.index;
  controller.begin_episode(episode);
  const Simulator sim(grid, episode, env);
  Observation obs = sim.reset();
  Clock::duration spent{};
  while (!obs.terminal) {
    const std::uint64_t before = sim.one_step_simulations();
    const auto t0 = Clock::now();
    const Action action = controller.act(sim, obs);
    spent += Clock::now() - t0;
    StepTrace st;
    st.action = action;
    st.risk_before = risk(obs);
    st.simulations = sim.one_step_simulations() - before;
    StepResult r = sim.step(obs, action);
    st.reward = r.reward;
    st.replaced = r.info.action_replaced;
    res.trace.push_back(std::move(st));
    res.reward += r.reward;
    ++res.steps;
    res.blackout = r.info.blackout;
    obs = std::move(r.obs);
  }
  res.act_ms = std::chrono::duration<double, std::milli>(spent).count();
  return res;
}

void summarize(EvalReport& report) {
  double reward = 0.0, steps = 0.0, ms = 0.0;
  for (const EpisodeResult& e : report.episodes) {
    reward += e.reward;
    steps += e.steps;
    ms += e.act_ms;
  }
  const auto n = static_cast<double>(report.episodes.size());
  report.avg_reward = n > 0 ? reward / n : 0.0;
  report.avg_steps = n > 0 ? steps / n : 0.0;
  report.ms_per_step = steps > 0 ? ms / steps : 0.0;
}

}  // namespace

EvalReport evaluate(Controller& controller, const GridModel& grid,
                    std::span<const Episode> episodes, const EnvConfig& env) {
  EvalReport report;
  report.method = controller.name();
  for (const Episode& ep : episodes) report.episodes.push_back(run_episode(controller, grid, ep, env));
  summarize(report);
  return report;
}

EvalReport evaluate(const ControllerFactory& factory, const GridModel& grid,
                    std::span<const Episode> episodes, const EnvConfig& env, int workers) {
  if (workers <= 1 || episodes.size() <= 1) {
    auto controller = factory();
    return evaluate(*controller, grid, episodes, env);
  }
  EvalReport report;
  report.episodes.resize(episodes.size());
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(workers), episodes.size());
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(n_workers);
  std::vector<std::string> names(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        auto controller = factory();
        names[w] = controller->name();
        for (std::size_t i = w; i < episodes.size(); i += n_workers) {
          report.episodes[i] = run_episode(*controller, grid, episodes[i], env);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  report.method = names[0];
  summarize(report);
  return report;
}

std::string results_csv(std::span<const ResultRow> rows) {
  std::string out = "method,avg_reward,avg_steps,ms_per_step\n";
  for (const ResultRow& r : rows) {
    out += r.method + "," + format_double(r.avg_reward) + "," + format_double(r.avg_steps) + "," +
           format_double(r.ms_per_step) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

std::filesystem::path Artifacts::policy(bool use_prior, std::uint64_t seed) const {
  return dir / ((use_prior ? "policy_ours_s" : "policy_ppo_s") + std::to_string(seed));
}

std::filesystem::path Artifacts::train_log(bool use_prior, std::uint64_t seed) const {
  return dir / ((use_prior ? "train_ours_s" : "train_ppo_s") + std::to_string(seed) + ".csv");
}

void save_surrogate(const std::filesystem::path& stem, const SurrogateParams& params,
                    const SurrogateConfig& config) {
  ad::ParamList list;
  const_cast<SurrogateParams&>(params).collect(list);
  const json meta = {{"kind", "surrogate"},
                     {"n_actions", params.n_actions()},
                     {"hidden", config.encoder.hidden},
                     {"heads", config.encoder.heads},
                     {"blocks", config.encoder.blocks},
                     {"action_dim", config.action_dim},
                     {"risk_hidden", config.risk_hidden},
                     {"checksum", surrogate_checksum(params)}};
  ad::save_checkpoint(stem, list, meta);
}

SurrogateParams load_surrogate(const std::filesystem::path& stem, int n_actions) {
  const json meta = ad::read_checkpoint_meta(stem);
  SurrogateConfig config;
  try {
    if (meta.at("kind") != "surrogate") throw ParseError("checkpoint is not a surrogate");
    if (meta.at("n_actions").get<int>() != n_actions) {
      throw ShapeError("surrogate was trained for a different action library");
    }
    config.encoder.hidden = meta.at("hidden");
    config.encoder.heads = meta.at("heads");
    config.encoder.blocks = meta.at("blocks");
    config.action_dim = meta.at("action_dim");
    config.risk_hidden = meta.at("risk_hidden");
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad surrogate metadata: ") + e.what());
  }
  std::mt19937_64 rng(0);
  SurrogateParams params = SurrogateParams::init(n_actions, config, rng);
  ad::ParamList list;
  params.collect(list);
  ad::load_checkpoint(stem, list);
  return params;
}

void save_policy(const std::filesystem::path& stem, const PolicyParams& params,
                 const AgentConfig& config) {
  ad::ParamList list;
  const_cast<PolicyParams&>(params).collect(list);
  const json meta = {{"kind", "policy"},
                     {"n_actions", params.n_actions()},
                     {"hidden", config.encoder.hidden},
                     {"heads", config.encoder.heads},
                     {"blocks", config.encoder.blocks},
                     {"use_prior", config.use_prior},
                     {"beta", config.beta},
                     {"seed", config.seed}};
  ad::save_checkpoint(stem, list, meta);
}

PolicyParams load_policy(const std::filesystem::path& stem, int n_actions) {
  const json meta = ad::read_checkpoint_meta(stem);
  EncoderConfig config;
  try {
    if (meta.at("kind") != "policy") throw ParseError("checkpoint is not a policy");
    if (meta.at("n_actions").get<int>() != n_actions) {
      throw ShapeError("policy was trained for a different action library");
    }
    config.hidden = meta.at("hidden");
    config.heads = meta.at("heads");
    config.blocks = meta.at("blocks");
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad policy metadata: ") + e.what());
  }
  std::mt19937_64 rng(0);
  PolicyParams params = PolicyParams::init(n_actions, config, rng);
  ad::ParamList list;
  params.collect(list);
  ad::load_checkpoint(stem, list);
  return params;
}

std::vector<std::filesystem::path> gen_data(const RunConfig& config) {
  const GridModel grid = resolve_grid(config.grid);
  const EpisodeSets sets = make_episode_sets(grid, config);
  const Artifacts art{config.out_dir};
  std::filesystem::create_directories(art.episodes_dir());
  std::vector<std::filesystem::path> written;
  const auto emit = [&](const std::vector<Episode>& eps, const char* prefix) {
    for (const Episode& ep : eps) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_%03d.csv", prefix, ep.index);
      const auto path = art.episodes_dir() / name;
      write_episode_csv(ep, path);
      written.push_back(path);
    }
  };
  emit(sets.train, "train");
  emit(sets.eval, "eval");
  return written;
}

PriorRun train_prior(const RunConfig& config, std::ostream* log) {
  const GridModel grid = resolve_grid(config.grid);
  const ActionLibrary lib = enumerate_actions(grid);
  const EpisodeSets sets = make_episode_sets(grid, config);
  const Artifacts art{config.out_dir};
  std::filesystem::create_directories(art.dir);

  PriorRun run;
  run.dataset = collect_risk_dataset(grid, sets.train, lib, config.env, config.collect);
  if (log) {
    *log << "risk dataset: " << run.dataset.states.size() << " hazard states, "
         << run.dataset.samples.size() << " samples\n";
  }
  if (run.dataset.samples.empty()) {
    throw InvalidEpisodeError("training episodes contain no hazard state to learn from");
  }
  save_dataset(run.dataset, art.dataset());

  std::mt19937_64 rng(config.surrogate_train.seed);
  run.params = SurrogateParams::init(static_cast<int>(lib.size()), config.surrogate, rng);
  init_output_bias(run.params, run.dataset);
  run.loss_curve = train_surrogate(run.dataset, run.params, config.surrogate_train,
                                   [&](int epoch, double loss) {
                                     if (log && (epoch % 10 == 0 || epoch + 1 == config.surrogate_train.epochs)) {
                                       *log << "epoch " << epoch << " loss " << loss << "\n";
                                     }
                                   });
  std::ofstream csv(art.surrogate_log(), std::ios::binary);
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < run.loss_curve.size(); ++e) {
    csv << e << "," << format_double(run.loss_curve[e], "%.10g") << "\n";
  }
  save_surrogate(art.surrogate(), run.params, config.surrogate);
  return run;
}

PolicyParams train_policy(const RunConfig& config, const SurrogateParams* surrogate,
                          bool use_prior, std::uint64_t seed, std::ostream* log) {
  const GridModel grid = resolve_grid(config.grid);
  const ActionLibrary lib = enumerate_actions(grid);
  EpisodeSets sets = make_episode_sets(grid, config);
  const Artifacts art{config.out_dir};
  std::filesystem::create_directories(art.dir);

  AgentConfig agent = config.agent;
  agent.seed = seed;
  agent.use_prior = use_prior;
  std::ofstream csv(art.train_log(use_prior, seed), std::ios::binary);
  csv << "update,mean_macro_reward,policy_loss,value_loss,entropy\n";
  const PolicyParams params = train_agent(
      grid, lib, std::move(sets.train), config.env, use_prior ? surrogate : nullptr, config.prior,
      agent, [&](const TrainLogRow& row) {
        csv << row.update << "," << format_double(row.mean_macro_reward, "%.10g") << ","
            << format_double(row.policy_loss, "%.10g") << ","
            << format_double(row.value_loss, "%.10g") << ","
            << format_double(row.entropy, "%.10g") << "\n";
        if (log && (row.update % 10 == 0 || row.update + 1 == agent.updates)) {
          *log << (use_prior ? "ours" : "ppo") << " seed " << seed << " update " << row.update
               << " mean R_m " << row.mean_macro_reward << " entropy " << row.entropy << "\n";
        }
      });
  save_policy(art.policy(use_prior, seed), params, agent);
  return params;
}

std::unique_ptr<Controller> make_controller(const std::string& method, const RunConfig& config,
                                            const GridModel& grid, const ActionLibrary& lib,
                                            const SurrogateParams* surrogate,
                                            const PolicyParams* policy, std::uint64_t seed) {
  if (method == "noop") return std::make_unique<NoOpController>();
  if (method == "random") return std::make_unique<RandomController>(lib, seed);
  if (method == "greedy") return std::make_unique<GreedyOracle>(lib, config.env.hazard_threshold);
  if (method == "ours" || method == "ppo") {
    if (!policy) throw UsageError(method + " needs a trained policy");
    AgentConfig agent = config.agent;
    agent.seed = seed;
    agent.use_prior = method == "ours";
    if (agent.use_prior && !surrogate) throw UsageError("ours needs a trained surrogate");
    PolicyBundle bundle{&grid, &lib, policy, surrogate, config.prior, agent,
                        config.env.hazard_threshold, {}};
    bundle.prepare();
    return std::make_unique<LearnedController>(method == "ours" ? "Ours" : "PPO", bundle);
  }
  throw UsageError("unknown method " + method);
}

std::vector<ResultRow> compare(const RunConfig& config, std::ostream* log) {
  const GridModel grid = resolve_grid(config.grid);
  const ActionLibrary lib = enumerate_actions(grid);
  const EpisodeSets sets = make_episode_sets(grid, config);
  const Artifacts art{config.out_dir};
  const SurrogateParams surrogate = load_surrogate(art.surrogate(), static_cast<int>(lib.size()));
  std::vector<PolicyParams> ours, ppo;
  for (std::uint64_t seed : config.agent_seeds) {
    ours.push_back(load_policy(art.policy(true, seed), static_cast<int>(lib.size())));
    ppo.push_back(load_policy(art.policy(false, seed), static_cast<int>(lib.size())));
  }

  std::string detail = "method,seed,avg_reward,avg_steps,ms_per_step\n";
  const auto run = [&](const std::string& method, const std::string& label,
                       const PolicyParams* policy, std::uint64_t seed) {
    const ControllerFactory factory = [&, policy, seed] {
      return make_controller(method, config, grid, lib, &surrogate, policy, seed);
    };
    const EvalReport r = evaluate(factory, grid, sets.eval, config.env, config.workers);
    detail += label + "," + std::to_string(seed) + "," + format_double(r.avg_reward) + "," +
              format_double(r.avg_steps) + "," + format_double(r.ms_per_step) + "\n";
    if (log) {
      *log << label << " seed " << seed << ": reward " << r.avg_reward << ", steps " << r.avg_steps
           << ", " << r.ms_per_step << " ms/step\n";
    }
    return r;
  };
  const auto median_row = [](const std::string& label, const std::vector<EvalReport>& reports) {
    std::vector<double> reward, steps, ms;
    for (const auto& r : reports) {
      reward.push_back(r.avg_reward);
      steps.push_back(r.avg_steps);
      ms.push_back(r.ms_per_step);
    }
    return ResultRow{label, median(reward), median(steps), median(ms)};
  };

  std::vector<ResultRow> rows;
  std::vector<EvalReport> reports;
  for (std::uint64_t seed : config.agent_seeds) reports.push_back(run("random", "Random", nullptr, seed));
  rows.push_back(median_row("Random", reports));
  reports.clear();
  for (std::size_t i = 0; i < ppo.size(); ++i) reports.push_back(run("ppo", "PPO", &ppo[i], config.agent_seeds[i]));
  rows.push_back(median_row("PPO", reports));
  reports = {run("greedy", "Greedy", nullptr, 0)};
  rows.push_back(median_row("Greedy", reports));
  reports.clear();
  for (std::size_t i = 0; i < ours.size(); ++i) reports.push_back(run("ours", "Ours", &ours[i], config.agent_seeds[i]));
  rows.push_back(median_row("Ours", reports));

  std::filesystem::create_directories(art.dir);
  std::ofstream(art.results(), std::ios::binary) << results_csv(rows);
  std::ofstream(art.dir / "results_detail.csv", std::ios::binary) << detail;
  return rows;
}

}  // namespace gridrl
