#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/grid_model.hpp"

using namespace gridrl;

TEST_SUITE("grid_model") {

TEST_CASE("builtin grid has the desk14 shape") {
  const GridModel g = builtin_desk14();
  CHECK(g.n_subs() == 14);
  CHECK(g.n_lines() == 20);
  CHECK(g.n_gens() == 6);
  CHECK(g.n_loads() == 11);
  CHECK(g == builtin_desk14());
  bool slack_has_gen = false;
  for (const Generator& gen : g.generators()) slack_has_gen |= gen.sub == g.slack_sub();
  CHECK(slack_has_gen);
  CHECK(g.generators()[g.slack_generator()].sub == g.slack_sub());
}

TEST_CASE("element index space") {
  const GridModel g = builtin_desk14();
  CHECK(g.n_elements() == 11 + 6 + 40);
  CHECK(g.element(g.gen_element(0)).kind == ElementKind::Generator);
  CHECK(g.element(g.line_extremity_element(3)).kind == ElementKind::LineExtremity);
  CHECK(g.element(g.line_extremity_element(3)).index == 3);
  int attached = 0;
  for (int s = 0; s < g.n_subs(); ++s) {
    CHECK(static_cast<int>(g.sub_elements(s).size()) == g.substations()[s].n_elements);
    for (int e : g.sub_elements(s)) CHECK(g.element_sub(e) == s);
    attached += static_cast<int>(g.sub_elements(s).size());
  }
  CHECK(attached == g.n_elements());
}

TEST_CASE("library size on small grids") {
  // One substation with a generator and two loads, no lines.
  const GridModel one = fixtures::make_grid(1, {}, {{0, 0, 10.0, 1.0}}, {{0, 0, 0.5}, {1, 0, 0.5}});
  CHECK(enumerate_actions(one).size() == 4);

  // Two lines and a lone generator; every substation holds one element.
  const GridModel two = fixtures::make_grid(
      5, {{0, 1, 2, 0.5, 10.0}, {1, 3, 4, 0.5, 10.0}}, {{0, 0, 10.0, 0.0}}, {}, 0);
  const ActionLibrary lib = enumerate_actions(two);
  CHECK(lib.size() == 3);
  CHECK(lib[1] == Action::toggle_line(0));
  CHECK(lib[2] == Action::toggle_line(1));
}

TEST_CASE("desk14 library") {
  const GridModel g = builtin_desk14();
  const ActionLibrary lib = enumerate_actions(g);
  CHECK(lib.size() == 209);
  CHECK(lib[0].is_noop());
  const auto counts = lib.set_bus_counts(g.n_subs());
  for (int s = 0; s < g.n_subs(); ++s) {
    const int n = g.substations()[s].n_elements;
    CHECK(counts[s] == (1 << (n - 1)) - 1);
  }
  std::set<std::string> seen;
  for (const Action& a : lib) seen.insert(a.describe());
  CHECK(seen.size() == lib.size());
  for (const Action& a : lib) {
    if (a.kind != ActionKind::SetBus) continue;
    CHECK(a.assignment.front() == 1);
    bool split = false;
    for (auto b : a.assignment) split |= b == 2;
    CHECK(split);
  }
  CHECK(enumerate_actions(g).size() == lib.size());
}

TEST_CASE("validation errors") {
  nlohmann::json j = grid_to_json(builtin_desk14());
  SUBCASE("dangling substation") {
    j["lines"][0]["to_sub"] = 99;
    CHECK_THROWS_AS(grid_from_json(j), ValidationError);
  }
  SUBCASE("zero reactance") {
    j["lines"][0]["reactance"] = 0.0;
    CHECK_THROWS_AS(grid_from_json(j), ValidationError);
  }
  SUBCASE("slot count mismatch") {
    j["substations"][3]["n_elements"] = 1;
    CHECK_THROWS_AS(grid_from_json(j), ValidationError);
  }
  SUBCASE("missing field") {
    j["lines"][0].erase("reactance");
    CHECK_THROWS_AS(grid_from_json(j), ParseError);
  }
  CHECK_THROWS_AS(parse_grid("{ not json"), ParseError);
}

TEST_CASE("json round trip and shipped file") {
  const GridModel g = builtin_desk14();
  CHECK(parse_grid(canonical_grid_json(g)) == g);
  std::ifstream in(std::string(GRIDRL_DATA_DIR) + "/desk14.json", std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == canonical_grid_json(g));
}

}
