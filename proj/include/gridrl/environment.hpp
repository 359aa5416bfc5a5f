#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "gridrl/grid_model.hpp"
#include "gridrl/powerflow.hpp"

namespace gridrl {

struct EnvConfig {
  double hazard_threshold = 0.95;  // delta_h
  int sub_cooldown = 3;
  int line_cooldown = 3;
  int trip_cooldown = 12;  // before a tripped line may be reconnected
  double hard_trip_rho = 2.0;
  double soft_trip_rho = 1.0;
  int soft_trip_steps = 3;
  double risk_cap = 3.0;  // risk assigned to one-step outcomes that black out
};

/// Injection profile for snapshots t = 0..T. An episode of length T has T
/// micro-steps and T + 1 snapshots.
struct Episode {
  std::uint64_t seed = 0;
  int index = 0;
  Eigen::MatrixXd load_mw;  // (T+1) x n_loads
  Eigen::MatrixXd gen_mw;   // (T+1) x n_gens; slack column is its schedule before balancing

  int length() const { return static_cast<int>(load_mw.rows()) - 1; }
  Injections at(int t) const;
};

struct Observation {
  int t = 0;
  Topology topo;
  Eigen::VectorXd rho;
  Eigen::VectorXd p_flow;
  Injections injections;  // slack generator entry holds its balanced output
  std::vector<int> sub_cooldown;
  std::vector<int> line_cooldown;
  std::vector<int> overload_age;
  bool terminal = false;
};

struct StepInfo {
  bool action_replaced = false;
  std::vector<int> tripped_lines;
  bool blackout = false;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// max over lines of rho; 0 when no line carries flow.
double risk(const Observation& obs);
/// 1 iff risk(obs) >= delta_h.
bool hazard(const Observation& obs, double delta_h);

bool is_feasible(const Observation& obs, const Action& action);
/// NoOp always; SetBus needs a cold substation; ToggleLine a cold line
/// (which covers the post-trip reconnection delay).
std::vector<std::uint8_t> feasibility_mask(const Observation& obs, const ActionLibrary& lib);

/// (1/|L|) sum over in-service lines of max(0, 1 - rho^2).
double margin_reward(const Observation& obs);

/// Micro-step dynamics for one episode. Holds references: the grid and the
/// episode must outlive it. `step` is a pure function of its arguments.
/// Single-threaded; use one instance per worker.
class Simulator {
 public:
  Simulator(const GridModel& grid, const Episode& episode, EnvConfig config = {});

  Observation reset() const;
  StepResult step(const Observation& obs, const Action& action) const;
  /// Same contract as `step`; counted so callers can audit look-ahead cost.
  StepResult simulate_one_step(const Observation& obs, const Action& action) const;

  std::uint64_t one_step_simulations() const { return sims_; }
  void reset_simulation_count() const { sims_ = 0; }

  const GridModel& grid() const { return *grid_; }
  const Episode& episode() const { return *episode_; }
  const EnvConfig& config() const { return config_; }

 private:
  void apply_action(Observation& obs, const Action& action) const;

  const GridModel* grid_;
  const Episode* episode_;
  EnvConfig config_;
  mutable std::uint64_t sims_ = 0;
};

/// Stateful wrapper: one live trajectory over a Simulator.
class Environment {
 public:
  Environment(const GridModel& grid, const Episode& episode, EnvConfig config = {})
      : sim_(grid, episode, config) {}

  const Observation& reset() {
    obs_ = sim_.reset();
    return obs_;
  }
  StepResult step(const Action& action) {
    StepResult r = sim_.step(obs_, action);
    obs_ = r.obs;
    return r;
  }
  const Observation& observation() const { return obs_; }
  bool done() const { return obs_.terminal; }
  const Simulator& simulator() const { return sim_; }

 private:
  Simulator sim_;
  Observation obs_;
};

struct EpisodeGenConfig {
  int length = 288;          // T micro-steps
  int period = 288;          // steps per load cycle (one day at 5 minutes)
  double amplitude = 0.3;    // relative swing of each load
  double phase_jitter = 1.0; // rad, per-load offset around the episode phase
  double noise = 0.1;        // uniform(-noise, noise) relative per step
};

/// Seeded load/generation profiles; deterministic per (seed, index).
std::vector<Episode> generate_episodes(const GridModel& grid, std::uint64_t seed, int count,
                                       const EpisodeGenConfig& config = {},
                                       int first_index = 0);
/// Constant base-case injections.
Episode nominal_episode(const GridModel& grid, int length);

/// CSV with header `t,load_<id>...,gen_<id>...`, one row per snapshot, LF newlines.
void write_episode_csv(const Episode& episode, const std::filesystem::path& path);
std::string episode_csv(const Episode& episode);
Episode read_episode_csv(const GridModel& grid, const std::filesystem::path& path);

}  // namespace gridrl
