#include "gridrl/grid_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "gridrl/errors.hpp"

namespace gridrl {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

template <class T>
void require_contiguous_ids(const std::vector<T>& items, const char* kind) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    require(items[i].id == static_cast<int>(i),
            std::string(kind) + " ids must be 0..n-1 in order (entry " + std::to_string(i) +
                " has id " + std::to_string(items[i].id) + ")");
  }
}

}  // namespace

GridModel::GridModel(std::vector<Substation> substations, std::vector<Line> lines,
                     std::vector<Generator> generators, std::vector<Load> loads,
                     int slack_sub, int n_busbars_per_sub)
    : substations_(std::move(substations)),
      lines_(std::move(lines)),
      generators_(std::move(generators)),
      loads_(std::move(loads)),
      slack_sub_(slack_sub),
      n_busbars_(n_busbars_per_sub) {
  require(n_busbars_ == 2, "n_busbars_per_sub must be 2");
  require(!substations_.empty(), "grid has no substations");
  require_contiguous_ids(substations_, "substation");
  require_contiguous_ids(lines_, "line");
  require_contiguous_ids(generators_, "generator");
  require_contiguous_ids(loads_, "load");

  const auto valid_sub = [&](int s) { return s >= 0 && s < n_subs(); };
  for (const Line& l : lines_) {
    const std::string tag = "line " + std::to_string(l.id);
    require(valid_sub(l.from_sub), tag + " references unknown substation " + std::to_string(l.from_sub));
    require(valid_sub(l.to_sub), tag + " references unknown substation " + std::to_string(l.to_sub));
    require(l.from_sub != l.to_sub, tag + " connects a substation to itself");
    require(std::isfinite(l.reactance) && l.reactance > 0.0, tag + " reactance must be > 0");
    require(std::isfinite(l.thermal_limit) && l.thermal_limit > 0.0,
            tag + " thermal_limit must be > 0");
  }
  for (const Generator& g : generators_) {
    const std::string tag = "generator " + std::to_string(g.id);
    require(valid_sub(g.sub), tag + " references unknown substation " + std::to_string(g.sub));
    require(std::isfinite(g.p_max) && g.p_max > 0.0, tag + " p_max must be > 0");
    require(std::isfinite(g.p_nominal) && g.p_nominal >= 0.0, tag + " p_nominal must be >= 0");
  }
  for (const Load& d : loads_) {
    const std::string tag = "load " + std::to_string(d.id);
    require(valid_sub(d.sub), tag + " references unknown substation " + std::to_string(d.sub));
    require(std::isfinite(d.p_nominal) && d.p_nominal >= 0.0, tag + " p_nominal must be >= 0");
  }
  require(valid_sub(slack_sub_), "slack_sub references unknown substation");

  build_index();

  require(slack_gen_ >= 0, "slack_sub hosts no generator");
  for (const Substation& s : substations_) {
    require(s.n_elements == static_cast<int>(sub_elements(s.id).size()),
            "substation " + std::to_string(s.id) + " declares " + std::to_string(s.n_elements) +
                " element slots but has " + std::to_string(sub_elements(s.id).size()) +
                " attached elements");
  }
}

void GridModel::build_index() {
  element_sub_.assign(static_cast<std::size_t>(n_elements()), -1);
  sub_elements_.assign(substations_.size(), {});
  for (int e = 0; e < n_elements(); ++e) {
    const ElementRef ref = element(e);
    int sub = 0;
    switch (ref.kind) {
      case ElementKind::Load: sub = loads_[ref.index].sub; break;
      case ElementKind::Generator: sub = generators_[ref.index].sub; break;
      case ElementKind::LineOrigin: sub = lines_[ref.index].from_sub; break;
      case ElementKind::LineExtremity: sub = lines_[ref.index].to_sub; break;
    }
    element_sub_[static_cast<std::size_t>(e)] = sub;
    sub_elements_[static_cast<std::size_t>(sub)].push_back(e);
  }
  slack_gen_ = -1;
  for (const Generator& g : generators_) {
    if (g.sub == slack_sub_) {
      slack_gen_ = g.id;
      break;
    }
  }
}

ElementRef GridModel::element(int e) const {
  if (e < n_loads()) return {ElementKind::Load, e};
  e -= n_loads();
  if (e < n_gens()) return {ElementKind::Generator, e};
  e -= n_gens();
  if (e < n_lines()) return {ElementKind::LineOrigin, e};
  return {ElementKind::LineExtremity, e - n_lines()};
}

bool GridModel::operator==(const GridModel& other) const {
  return canonical_grid_json(*this) == canonical_grid_json(other);
}

GridModel builtin_desk14() {
  // IEEE 14-bus branch reactances; buses renumbered from 0.
  struct Branch {
    int from, to;
    double x, limit;
  };
  static constexpr Branch kBranches[] = {
      {0, 1, 0.05917, 100.2}, {0, 4, 0.22304, 58.2},  {1, 2, 0.19797, 66.3},
      {1, 3, 0.17632, 54.7},  {1, 4, 0.17388, 40.5},  {2, 3, 0.17103, 20.4},
      {3, 4, 0.04211, 61.6},  {3, 6, 0.20912, 20.0},  {3, 8, 0.55618, 20.0},
      {4, 5, 0.25202, 24.9},  {5, 10, 0.19890, 20.0}, {5, 11, 0.25581, 20.0},
      {5, 12, 0.13027, 29.0}, {6, 7, 0.17615, 48.0},  {6, 8, 0.11001, 54.3},
      {8, 9, 0.08450, 20.0},  {8, 13, 0.27038, 20.0}, {9, 10, 0.19207, 20.0},
      {11, 12, 0.19988, 20.0}, {12, 13, 0.34802, 20.0},
  };
  static constexpr std::pair<int, double> kLoads[] = {
      {1, 21.7}, {2, 94.2}, {3, 47.8},  {4, 7.6},   {5, 11.2}, {8, 29.5},
      {9, 9.0},  {10, 3.5}, {11, 6.1}, {12, 13.5}, {13, 14.9},
  };
  struct Unit {
    int sub;
    double p_max, p_nominal;
  };
  // Unit 0 is the slack; its nominal output balances the base case.
  static constexpr Unit kUnits[] = {
      {0, 300.0, 99.0}, {1, 140.0, 40.0}, {2, 100.0, 40.0},
      {5, 100.0, 30.0}, {7, 100.0, 30.0}, {1, 60.0, 20.0},
  };

  std::vector<Line> lines;
  for (const Branch& b : kBranches) {
    lines.push_back({static_cast<int>(lines.size()), b.from, b.to, b.x, b.limit});
  }
  std::vector<Load> loads;
  for (const auto& [sub, p] : kLoads) loads.push_back({static_cast<int>(loads.size()), sub, p});
  std::vector<Generator> gens;
  for (const Unit& u : kUnits) {
    gens.push_back({static_cast<int>(gens.size()), u.sub, u.p_max, u.p_nominal});
  }

  std::vector<int> counts(14, 0);
  for (const Line& l : lines) {
    ++counts[l.from_sub];
    ++counts[l.to_sub];
  }
  for (const Load& d : loads) ++counts[d.sub];
  for (const Generator& g : gens) ++counts[g.sub];
  std::vector<Substation> subs;
  for (int s = 0; s < 14; ++s) subs.push_back({s, counts[s]});

  return GridModel(std::move(subs), std::move(lines), std::move(gens), std::move(loads), 0, 2);
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json grid_to_json(const GridModel& grid) {
  using nlohmann::json;
  json j;
  j["n_busbars_per_sub"] = grid.n_busbars_per_sub();
  j["slack_sub"] = grid.slack_sub();
  j["substations"] = json::array();
  for (const Substation& s : grid.substations()) {
    j["substations"].push_back({{"id", s.id}, {"n_elements", s.n_elements}});
  }
  j["lines"] = json::array();
  for (const Line& l : grid.lines()) {
    j["lines"].push_back({{"id", l.id},
                          {"from_sub", l.from_sub},
                          {"to_sub", l.to_sub},
                          {"reactance", l.reactance},
                          {"thermal_limit", l.thermal_limit}});
  }
  j["generators"] = json::array();
  for (const Generator& g : grid.generators()) {
    j["generators"].push_back(
        {{"id", g.id}, {"sub", g.sub}, {"p_max", g.p_max}, {"p_nominal", g.p_nominal}});
  }
  j["loads"] = json::array();
  for (const Load& d : grid.loads()) {
    j["loads"].push_back({{"id", d.id}, {"sub", d.sub}, {"p_nominal", d.p_nominal}});
  }
  return j;
}

GridModel grid_from_json(const nlohmann::json& j) {
  try {
    std::vector<Substation> subs;
    for (const auto& s : j.at("substations")) {
      subs.push_back({s.at("id").get<int>(), s.at("n_elements").get<int>()});
    }
    std::vector<Line> lines;
    for (const auto& l : j.at("lines")) {
      lines.push_back({l.at("id").get<int>(), l.at("from_sub").get<int>(),
                       l.at("to_sub").get<int>(), l.at("reactance").get<double>(),
                       l.at("thermal_limit").get<double>()});
    }
    std::vector<Generator> gens;
    for (const auto& g : j.at("generators")) {
      gens.push_back({g.at("id").get<int>(), g.at("sub").get<int>(), g.at("p_max").get<double>(),
                      g.value("p_nominal", 0.0)});
    }
    std::vector<Load> loads;
    for (const auto& d : j.at("loads")) {
      loads.push_back({d.at("id").get<int>(), d.at("sub").get<int>(), d.value("p_nominal", 0.0)});
    }
    const int slack = j.at("slack_sub").get<int>();
    const int busbars = j.at("n_busbars_per_sub").get<int>();
    return GridModel(std::move(subs), std::move(lines), std::move(gens), std::move(loads), slack,
                     busbars);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("grid file: ") + e.what());
  }
}

std::string canonical_grid_json(const GridModel& grid) { return grid_to_json(grid).dump(2) + "\n"; }

GridModel parse_grid(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("grid file: ") + e.what());
  }
  return grid_from_json(j);
}

GridModel load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open grid file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str());
}

void save_grid(const GridModel& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << canonical_grid_json(grid);
}

// ---------------------------------------------------------------------------
// Actions

Action Action::set_bus(int sub, std::vector<std::uint8_t> assignment) {
  Action a;
  a.kind = ActionKind::SetBus;
  a.sub = sub;
  a.assignment = std::move(assignment);
  return a;
}

Action Action::toggle_line(int line) {
  Action a;
  a.kind = ActionKind::ToggleLine;
  a.line = line;
  return a;
}

std::string Action::describe() const {
  switch (kind) {
    case ActionKind::NoOp: return "noop";
    case ActionKind::ToggleLine: return "toggle_line(" + std::to_string(line) + ")";
    case ActionKind::SetBus: {
      std::string s = "set_bus(" + std::to_string(sub) + ",";
      for (auto b : assignment) s += static_cast<char>('0' + b);
      return s + ")";
    }
  }
  return "?";
}

ActionLibrary::ActionLibrary(std::vector<Action> actions) : actions_(std::move(actions)) {
  if (actions_.empty() || !actions_.front().is_noop()) {
    throw ValidationError("action library must start with NoOp");
  }
}

std::vector<int> ActionLibrary::set_bus_counts(int n_subs) const {
  std::vector<int> counts(static_cast<std::size_t>(n_subs), 0);
  for (const Action& a : actions_) {
    if (a.kind == ActionKind::SetBus) ++counts[static_cast<std::size_t>(a.sub)];
  }
  return counts;
}

ActionLibrary enumerate_actions(const GridModel& grid) {
  std::vector<Action> actions;
  actions.push_back(Action::noop());
  for (const Line& l : grid.lines()) actions.push_back(Action::toggle_line(l.id));
  for (const Substation& s : grid.substations()) {
    const auto n = grid.sub_elements(s.id).size();
    if (n < 2) continue;
    const std::uint64_t count = std::uint64_t{1} << (n - 1);
    for (std::uint64_t mask = 1; mask < count; ++mask) {
      std::vector<std::uint8_t> assignment(n, 1);
      for (std::size_t k = 1; k < n; ++k) {
        if ((mask >> (k - 1)) & 1U) assignment[k] = 2;
      }
      actions.push_back(Action::set_bus(s.id, std::move(assignment)));
    }
  }
  return ActionLibrary(std::move(actions));
}

}  // namespace gridrl
