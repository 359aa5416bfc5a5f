#include <doctest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "gridrl/environment.hpp"
#include "gridrl/errors.hpp"

using namespace gridrl;
using doctest::Approx;

namespace {

Observation with_rho(std::vector<double> rho) {
  Observation o;
  o.rho = Eigen::Map<Eigen::VectorXd>(rho.data(), static_cast<Eigen::Index>(rho.size()));
  o.topo.line_in_service.assign(rho.size(), 1);
  return o;
}

bool same(const Observation& a, const Observation& b) {
  return a.t == b.t && a.topo == b.topo && a.rho == b.rho && a.p_flow == b.p_flow &&
         a.injections.load_mw == b.injections.load_mw && a.injections.gen_mw == b.injections.gen_mw &&
         a.sub_cooldown == b.sub_cooldown && a.line_cooldown == b.line_cooldown &&
         a.overload_age == b.overload_age && a.terminal == b.terminal;
}

}  // namespace

TEST_SUITE("environment") {

TEST_CASE("risk and hazard") {
  CHECK(risk(with_rho({0.3, 0.9, 0.5})) == 0.9);
  CHECK(risk(with_rho({0.0, 0.0})) == 0.0);
  CHECK(risk(with_rho({})) == 0.0);
  CHECK(risk(with_rho({1.2})) == 1.2);
  CHECK_FALSE(hazard(with_rho({0.9}), 0.95));
  CHECK(hazard(with_rho({0.95}), 0.95));
  CHECK(hazard(with_rho({1.3}), 0.95));
}

TEST_CASE("nominal reset") {
  const GridModel g = builtin_desk14();
  const Episode ep = nominal_episode(g, 10);
  const Simulator sim(g, ep);
  const Observation o = sim.reset();
  CHECK(risk(o) == Approx(0.6).epsilon(0.1 / 0.6));
  CHECK(same(o, sim.reset()));
  for (double r : o.rho) CHECK(r < 1.0);
}

TEST_CASE("invalid episodes") {
  const GridModel g = builtin_desk14();
  Episode ep = nominal_episode(g, 10);
  ep.load_mw.row(0) *= 100.0;
  CHECK_THROWS_AS(Simulator(g, ep).reset(), InvalidEpisodeError);
  Episode empty = nominal_episode(g, 10);
  empty.load_mw.resize(1, g.n_loads());
  CHECK_THROWS_AS(Simulator(g, empty).reset(), InvalidEpisodeError);
}

TEST_CASE("NoOp step rewards the margin") {
  const GridModel g = builtin_desk14();
  const Episode ep = nominal_episode(g, 10);
  const Simulator sim(g, ep);
  const StepResult r = sim.step(sim.reset(), Action::noop());
  CHECK(r.info.tripped_lines.empty());
  CHECK_FALSE(r.done);
  double expect = 0.0;
  for (double rho : r.obs.rho) expect += std::max(0.0, 1.0 - rho * rho);
  CHECK(r.reward == Approx(expect / g.n_lines()).epsilon(1e-12));
  CHECK(r.obs.t == 1);
}

TEST_CASE("hard trip") {
  // Two parallel lines sharing 4.6 MW; line 0 is rated 1 MW and sees rho 2.3.
  const GridModel g = fixtures::make_grid(2, {{0, 0, 1, 1.0, 1.0}, {1, 0, 1, 1.0, 100.0}},
                                          {{0, 0, 10.0, 4.6}}, {{0, 1, 4.6}});
  const Episode ep = nominal_episode(g, 5);
  const Simulator sim(g, ep);
  const Observation o = sim.reset();
  CHECK(o.rho[0] == Approx(2.3));
  const StepResult r = sim.step(o, Action::noop());
  REQUIRE(r.info.tripped_lines.size() == 1);
  CHECK(r.info.tripped_lines[0] == 0);
  CHECK(r.obs.topo.line_in_service[0] == 0);
  CHECK(r.obs.line_cooldown[0] == EnvConfig{}.trip_cooldown);
  CHECK(r.obs.rho[1] == Approx(0.046));
  CHECK_FALSE(r.done);
}

TEST_CASE("soft trip after sustained overload") {
  // Line 0 sits at rho 1.2: over the soft limit, under the hard one.
  const GridModel g = fixtures::make_grid(2, {{0, 0, 1, 1.0, 2.0}, {1, 0, 1, 1.0, 100.0}},
                                          {{0, 0, 10.0, 4.8}}, {{0, 1, 4.8}});
  const Episode ep = nominal_episode(g, 6);
  const Simulator sim(g, ep);
  Observation o = sim.reset();
  CHECK(o.rho[0] == Approx(1.2));
  std::vector<int> trips_at;
  for (int t = 0; t < 5 && !o.terminal; ++t) {
    StepResult r = sim.step(o, Action::noop());
    if (!r.info.tripped_lines.empty()) trips_at.push_back(r.obs.t);
    o = r.obs;
  }
  REQUIRE(trips_at.size() == 1);
  CHECK(trips_at[0] == EnvConfig{}.soft_trip_steps);
}

TEST_CASE("disconnecting a radial line blacks out") {
  const GridModel g = fixtures::two_bus();
  const Episode ep = nominal_episode(g, 5);
  const Simulator sim(g, ep);
  const StepResult r = sim.step(sim.reset(), Action::toggle_line(0));
  CHECK(r.done);
  CHECK(r.info.blackout);
  CHECK(r.reward == 0.0);
  CHECK(r.obs.terminal);
  CHECK_THROWS_AS(sim.step(r.obs, Action::noop()), UsageError);
}

TEST_CASE("cooldowns and the feasibility mask") {
  const GridModel g = builtin_desk14();
  const ActionLibrary lib = enumerate_actions(g);
  const Episode ep = nominal_episode(g, 20);
  const Simulator sim(g, ep);
  Observation o = sim.reset();
  auto mask = feasibility_mask(o, lib);
  CHECK(std::count(mask.begin(), mask.end(), 1) == static_cast<long>(lib.size()));

  std::size_t pick = 0;
  for (std::size_t i = 0; i < lib.size(); ++i) {
    if (lib[i].kind == ActionKind::SetBus && lib[i].sub == 3) {
      pick = i;
      break;
    }
  }
  REQUIRE(pick > 0);
  o = sim.step(o, lib[pick]).obs;
  for (int k = 0; k < 3; ++k) {
    mask = feasibility_mask(o, lib);
    CHECK(mask[0] == 1);
    for (std::size_t i = 0; i < lib.size(); ++i) {
      if (lib[i].kind == ActionKind::SetBus && lib[i].sub == 3) CHECK(mask[i] == 0);
      if (lib[i].kind == ActionKind::SetBus && lib[i].sub == 4) CHECK(mask[i] == 1);
    }
    const StepResult r = sim.step(o, lib[pick]);
    CHECK(r.info.action_replaced);
    o = r.obs;
  }
  mask = feasibility_mask(o, lib);
  CHECK(mask[pick] == 1);
}

TEST_CASE("one-step simulation is pure and counted") {
  const GridModel g = builtin_desk14();
  const ActionLibrary lib = enumerate_actions(g);
  const Episode ep = generate_episodes(g, 5, 1)[0];
  const Simulator sim(g, ep);
  const Observation o = sim.reset();
  const Observation copy = o;
  const StepResult a = sim.simulate_one_step(o, lib[30]);
  const StepResult b = sim.step(o, lib[30]);
  CHECK(same(a.obs, b.obs));
  CHECK(a.reward == b.reward);
  CHECK(a.info.tripped_lines == b.info.tripped_lines);
  CHECK(same(o, copy));
  CHECK(sim.one_step_simulations() == 1);
  CHECK(risk(sim.simulate_one_step(o, Action::noop()).obs) == risk(sim.step(o, Action::noop()).obs));
  CHECK(sim.one_step_simulations() == 2);
  sim.reset_simulation_count();
  CHECK(sim.one_step_simulations() == 0);
}

TEST_CASE("episode generation") {
  const GridModel g = builtin_desk14();
  const auto a = generate_episodes(g, 3, 40);
  const auto b = generate_episodes(g, 3, 40);
  REQUIRE(a.size() == 40);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].index == static_cast<int>(i));
    CHECK(a[i].load_mw == b[i].load_mw);
    CHECK(a[i].gen_mw == b[i].gen_mw);
    CHECK(a[i].length() == 288);
  }
  CHECK(a[0].load_mw != a[1].load_mw);
  CHECK(generate_episodes(g, 4, 1)[0].load_mw != a[0].load_mw);
}

TEST_CASE("NoOp sees enough hazards") {
  const GridModel g = builtin_desk14();
  const auto eps = generate_episodes(g, 1, 20);
  long hazardous = 0, steps = 0;
  for (const Episode& ep : eps) {
    Environment env(g, ep);
    env.reset();
    while (!env.done()) {
      hazardous += hazard(env.observation(), 0.95);
      ++steps;
      const StepResult r = env.step(Action::noop());
      CHECK(r.reward >= 0.0);
      CHECK(r.reward <= 1.0);
    }
  }
  CHECK(static_cast<double>(hazardous) / static_cast<double>(steps) >= 0.10);
}

TEST_CASE("episode csv round trip") {
  const GridModel g = builtin_desk14();
  EpisodeGenConfig cfg;
  cfg.length = 12;
  const Episode ep = generate_episodes(g, 9, 1, cfg)[0];
  const auto path = std::filesystem::temp_directory_path() / "gridrl_episode_test.csv";
  write_episode_csv(ep, path);
  const Episode back = read_episode_csv(g, path);
  CHECK(episode_csv(back) == episode_csv(ep));
  CHECK((back.load_mw - ep.load_mw).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(episode_csv(ep).rfind("t,load_0,", 0) == 0);
  std::filesystem::remove(path);
}

}
