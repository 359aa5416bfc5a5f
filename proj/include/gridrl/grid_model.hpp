#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace gridrl {

struct Substation {
  int id = 0;
  int n_elements = 0;  // element slots; must equal the number of attached elements
};

struct Line {
  int id = 0;
  int from_sub = 0;
  int to_sub = 0;
  double reactance = 0.0;      // p.u. on the 100 MVA base
  double thermal_limit = 0.0;  // MW
};

struct Generator {
  int id = 0;
  int sub = 0;
  double p_max = 0.0;      // MW
  double p_nominal = 0.0;  // MW, base-case dispatch
};

struct Load {
  int id = 0;
  int sub = 0;
  double p_nominal = 0.0;  // MW consumed in the base case
};

enum class ElementKind { Load, Generator, LineOrigin, LineExtremity };

struct ElementRef {
  ElementKind kind;
  int index;
};

inline constexpr double kBaseMva = 100.0;

/// Static network description. Elements (loads, generators, line ends) share
/// one global index space: loads first, then generators, line origins, line
/// extremities. Immutable after construction.
class GridModel {
 public:
  GridModel() = default;
  /// Validates and indexes; throws ValidationError naming the first violated invariant.
  GridModel(std::vector<Substation> substations, std::vector<Line> lines,
            std::vector<Generator> generators, std::vector<Load> loads,
            int slack_sub, int n_busbars_per_sub = 2);

  const std::vector<Substation>& substations() const { return substations_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<Generator>& generators() const { return generators_; }
  const std::vector<Load>& loads() const { return loads_; }
  int slack_sub() const { return slack_sub_; }
  int n_busbars_per_sub() const { return n_busbars_; }

  int n_subs() const { return static_cast<int>(substations_.size()); }
  int n_lines() const { return static_cast<int>(lines_.size()); }
  int n_gens() const { return static_cast<int>(generators_.size()); }
  int n_loads() const { return static_cast<int>(loads_.size()); }
  int n_elements() const { return n_loads() + n_gens() + 2 * n_lines(); }

  int load_element(int load) const { return load; }
  int gen_element(int gen) const { return n_loads() + gen; }
  int line_origin_element(int line) const { return n_loads() + n_gens() + line; }
  int line_extremity_element(int line) const { return n_loads() + n_gens() + n_lines() + line; }

  ElementRef element(int e) const;
  int element_sub(int e) const { return element_sub_[static_cast<std::size_t>(e)]; }
  /// Elements attached to a substation, ascending global index.
  const std::vector<int>& sub_elements(int sub) const {
    return sub_elements_[static_cast<std::size_t>(sub)];
  }
  /// Lowest-indexed generator at the slack substation.
  int slack_generator() const { return slack_gen_; }

  bool operator==(const GridModel& other) const;

 private:
  void build_index();

  std::vector<Substation> substations_;
  std::vector<Line> lines_;
  std::vector<Generator> generators_;
  std::vector<Load> loads_;
  int slack_sub_ = 0;
  int n_busbars_ = 2;

  std::vector<int> element_sub_;
  std::vector<std::vector<int>> sub_elements_;
  int slack_gen_ = -1;
};

/// IEEE 14-bus derived grid: 14 substations, 20 lines, 6 generators, 11 loads.
/// Thermal limits are 1.6x the base-case DC flow magnitude (floor 20 MW).
GridModel builtin_desk14();

nlohmann::json grid_to_json(const GridModel& grid);
GridModel grid_from_json(const nlohmann::json& j);
/// Sorted keys, two-space indent, trailing LF.
std::string canonical_grid_json(const GridModel& grid);
GridModel parse_grid(const std::string& text);
GridModel load_grid(const std::filesystem::path& path);
void save_grid(const GridModel& grid, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Actions

enum class ActionKind { NoOp, SetBus, ToggleLine };

/// A unitary action: touches at most one substation or one line.
struct Action {
  ActionKind kind = ActionKind::NoOp;
  int sub = -1;
  /// Busbar (1 or 2) per element of `sub`, in `GridModel::sub_elements` order.
  std::vector<std::uint8_t> assignment;
  int line = -1;

  static Action noop() { return {}; }
  static Action set_bus(int sub, std::vector<std::uint8_t> assignment);
  static Action toggle_line(int line);

  bool is_noop() const { return kind == ActionKind::NoOp; }
  std::string describe() const;
  bool operator==(const Action&) const = default;
};

class ActionLibrary {
 public:
  ActionLibrary() = default;
  explicit ActionLibrary(std::vector<Action> actions);

  std::size_t size() const { return actions_.size(); }
  const Action& operator[](std::size_t i) const { return actions_[i]; }
  auto begin() const { return actions_.begin(); }
  auto end() const { return actions_.end(); }

  /// Number of SetBus actions per substation.
  std::vector<int> set_bus_counts(int n_subs) const;

 private:
  std::vector<Action> actions_;
};

/// [NoOp] ++ ToggleLine per line ++ SetBus assignments per substation with
/// the first element pinned to busbar 1 and the identity assignment removed.
ActionLibrary enumerate_actions(const GridModel& grid);

}  // namespace gridrl
