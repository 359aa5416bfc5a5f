#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "fixtures.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/harness.hpp"

using namespace gridrl;
namespace fs = std::filesystem;
using doctest::Approx;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gridrl_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& out_file) {
  const std::string cmd = std::string(GRIDRL_CLI) + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Toggles the grid's only line on the fifth step.
class Saboteur : public Controller {
 public:
  std::string name() const override { return "Saboteur"; }
  Action act(const Simulator&, const Observation& obs) override {
    return obs.t == 4 ? Action::toggle_line(0) : Action::noop();
  }
};

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config round trip and validation") {
  RunConfig c;
  c.agent.beta = 0.25;
  c.prior.k = 12;
  c.agent_seeds = {4, 5};
  const RunConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.agent.beta == 0.25);

  nlohmann::json j = config_to_json(c);
  j["agent"]["betta"] = 1.0;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = config_to_json(c);
  j["colour"] = "blue";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = config_to_json(c);
  j["episodes"]["eval_seed"] = j["episodes"]["train_seed"];
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = config_to_json(c);
  j["prior"]["tau"] = -1.0;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = config_to_json(c);
  j["prior"]["k"] = "many";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("episode sets are disjoint") {
  RunConfig c;
  c.train_episodes = 3;
  c.eval_episodes = 2;
  c.episodes.length = 10;
  const auto sets = make_episode_sets(builtin_desk14(), c);
  CHECK(sets.train.size() == 3);
  CHECK(sets.eval.size() == 2);
  CHECK(sets.eval[0].seed != sets.train[0].seed);
}

TEST_CASE("results csv") {
  const std::vector<ResultRow> rows{{"Random", 1.5, 20.0, 0.001}, {"Ours", 100.0, 288.0, 0.1}};
  const std::string csv = results_csv(rows);
  CHECK(csv.rfind("method,avg_reward,avg_steps,ms_per_step\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("evaluation bookkeeping") {
  const GridModel g = fixtures::two_bus();
  const Episode ep = nominal_episode(g, 20);
  Saboteur s;
  const EvalReport r = evaluate(s, g, std::span<const Episode>(&ep, 1), {});
  CHECK(r.avg_steps == 5.0);
  CHECK(r.episodes[0].blackout);

  const GridModel desk = builtin_desk14();
  const Episode calm = nominal_episode(desk, 30);
  NoOpController noop;
  const EvalReport q = evaluate(noop, desk, std::span<const Episode>(&calm, 1), {});
  CHECK(q.episodes[0].steps == 30);
  double total = 0.0;
  const Simulator sim(desk, calm);
  Observation o = sim.reset();
  while (!o.terminal) {
    const StepResult step = sim.step(o, Action::noop());
    total += step.reward;
    o = step.obs;
  }
  CHECK(q.avg_reward == Approx(total).epsilon(1e-12));
  for (const StepTrace& t : q.episodes[0].trace) CHECK(t.simulations == 0);
}

TEST_CASE("gated agent is cheaper without hazards") {
  const GridModel g = builtin_desk14();
  const ActionLibrary lib = enumerate_actions(g);
  std::mt19937_64 rng(0);
  RunConfig c;
  const SurrogateParams sp = SurrogateParams::init(static_cast<int>(lib.size()), c.surrogate, rng);
  const PolicyParams pp = PolicyParams::init(static_cast<int>(lib.size()), c.agent.encoder, rng);
  const Episode calm = nominal_episode(g, 40);
  const auto calm_ctl = make_controller("ours", c, g, lib, &sp, &pp, 0);
  const EvalReport quiet = evaluate(*calm_ctl, g, std::span<const Episode>(&calm, 1), c.env);
  c.env.hazard_threshold = 0.01;  // every step is a hazard
  const auto busy_ctl = make_controller("ours", c, g, lib, &sp, &pp, 0);
  const EvalReport busy = evaluate(*busy_ctl, g, std::span<const Episode>(&calm, 1), c.env);
  CHECK(quiet.ms_per_step < busy.ms_per_step);
}

TEST_CASE("artifacts round trip") {
  const fs::path dir = scratch("artifacts");
  const GridModel g = builtin_desk14();
  const ActionLibrary lib = enumerate_actions(g);
  std::mt19937_64 rng(1);
  RunConfig c;
  const SurrogateParams sp = SurrogateParams::init(static_cast<int>(lib.size()), c.surrogate, rng);
  save_surrogate(dir / "s", sp, c.surrogate);
  CHECK(surrogate_checksum(load_surrogate(dir / "s", static_cast<int>(lib.size()))) ==
        surrogate_checksum(sp));
  CHECK_THROWS_AS(load_surrogate(dir / "s", 10), ShapeError);
  CHECK_THROWS_AS(load_surrogate(dir / "missing", 10), MissingArtifactError);
  CHECK_THROWS_AS(load_policy(dir / "missing", 10), MissingArtifactError);
  fs::remove_all(dir);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  const fs::path out = dir / "stdout.txt";
  CHECK(run_cli("eval --no-such-flag", out) == 2);
  CHECK(run_cli("", out) == 2);

  CHECK(run_cli("eval --method ppo --length 10 --checkpoint " + (dir / "nothing").string() +
                    " -o " + dir.string(),
                out) == 3);
  CHECK(slurp(out).find("method,") == std::string::npos);

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << R"({"agent": {"betta": 2.0}})";
  CHECK(run_cli("gen-data -c " + bad.string(), out) == 4);
  std::ofstream(bad) << R"({"env": {"hazard_threshold": -1}})";
  CHECK(run_cli("gen-data -c " + bad.string(), out) == 4);
  fs::remove_all(dir);
}

TEST_CASE("gen-data is byte-identical across runs") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  const std::string common = " gen-data --seed 7 --train-episodes 3 --length 24";
  REQUIRE(run_cli(common + " -o " + a.string(), a / "log.txt") == 0);
  REQUIRE(run_cli(common + " -o " + b.string(), b / "log.txt") == 0);
  int files = 0;
  for (const auto& entry : fs::directory_iterator(a / "episodes")) {
    const fs::path twin = b / "episodes" / entry.path().filename();
    REQUIRE(fs::exists(twin));
    CHECK(slurp(entry.path()) == slurp(twin));
    ++files;
  }
  CHECK(files == 3 + RunConfig{}.eval_episodes);
  fs::remove_all(a);
  fs::remove_all(b);
}

}
