#include "gridrl/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gridrl/errors.hpp"

namespace gridrl {

Injections Episode::at(int t) const {
  return {load_mw.row(t).transpose(), gen_mw.row(t).transpose()};
}

double risk(const Observation& obs) { return obs.rho.size() == 0 ? 0.0 : obs.rho.maxCoeff(); }

bool hazard(const Observation& obs, double delta_h) { return risk(obs) >= delta_h; }

bool is_feasible(const Observation& obs, const Action& action) {
  switch (action.kind) {
    case ActionKind::NoOp: return true;
    case ActionKind::SetBus: return obs.sub_cooldown[action.sub] == 0;
    case ActionKind::ToggleLine: return obs.line_cooldown[action.line] == 0;
  }
  return false;
}

std::vector<std::uint8_t> feasibility_mask(const Observation& obs, const ActionLibrary& lib) {
  std::vector<std::uint8_t> mask(lib.size());
  for (std::size_t i = 0; i < lib.size(); ++i) mask[i] = is_feasible(obs, lib[i]) ? 1 : 0;
  return mask;
}

double margin_reward(const Observation& obs) {
  const auto n = obs.rho.size();
  if (n == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index l = 0; l < n; ++l) {
    if (obs.topo.line_in_service[l]) total += std::max(0.0, 1.0 - obs.rho[l] * obs.rho[l]);
  }
  return total / static_cast<double>(n);
}

Simulator::Simulator(const GridModel& grid, const Episode& episode, EnvConfig config)
    : grid_(&grid), episode_(&episode), config_(config) {}

Observation Simulator::reset() const {
  const GridModel& g = *grid_;
  if (episode_->length() < 1) throw InvalidEpisodeError("episode has no micro-steps");
  if (episode_->load_mw.cols() != g.n_loads() || episode_->gen_mw.cols() != g.n_gens()) {
    throw InvalidEpisodeError("episode columns do not match the grid");
  }
  Observation obs;
  obs.t = 0;
  obs.topo = Topology::reference(g);
  obs.injections = episode_->at(0);
  double capacity = 0.0;
  for (const Generator& gen : g.generators()) capacity += gen.p_max;
  if (obs.injections.load_mw.sum() > capacity) {
    throw InvalidEpisodeError("load at t=0 exceeds total generation capacity");
  }
  FlowSolution sol;
  try {
    sol = solve_dc(g, obs.topo, obs.injections);
  } catch (const SingularSystemError& e) {
    throw InvalidEpisodeError(std::string("power flow fails at t=0: ") + e.what());
  }
  if (injection_islanded(g, sol)) throw InvalidEpisodeError("islanded injection at t=0");
  obs.injections.gen_mw[g.slack_generator()] = sol.slack_mw;
  obs.rho = sol.rho;
  obs.p_flow = sol.p_flow;
  obs.sub_cooldown.assign(g.n_subs(), 0);
  obs.line_cooldown.assign(g.n_lines(), 0);
  obs.overload_age.assign(g.n_lines(), 0);
  obs.terminal = false;
  return obs;
}

void Simulator::apply_action(Observation& obs, const Action& action) const {
  switch (action.kind) {
    case ActionKind::NoOp: break;
    case ActionKind::SetBus: {
      const auto& elements = grid_->sub_elements(action.sub);
      if (action.assignment.size() != elements.size()) {
        throw UsageError("SetBus assignment does not cover the substation's elements");
      }
      for (std::size_t k = 0; k < elements.size(); ++k) {
        obs.topo.busbar_of_element[elements[k]] = action.assignment[k];
      }
      obs.sub_cooldown[action.sub] = config_.sub_cooldown;
      break;
    }
    case ActionKind::ToggleLine: {
      auto& status = obs.topo.line_in_service[action.line];
      status = status ? 0 : 1;
      obs.overload_age[action.line] = 0;
      obs.line_cooldown[action.line] = config_.line_cooldown;
      break;
    }
  }
}

StepResult Simulator::step(const Observation& obs, const Action& action) const {
  if (obs.terminal) throw UsageError("step called on a terminal observation");
  const GridModel& g = *grid_;
  StepResult result;
  Observation& next = result.obs;
  next = obs;

  for (int& c : next.sub_cooldown) c = std::max(0, c - 1);
  for (int& c : next.line_cooldown) c = std::max(0, c - 1);

  if (is_feasible(obs, action)) {
    apply_action(next, action);
  } else {
    result.info.action_replaced = true;
  }

  next.t = obs.t + 1;
  next.injections = episode_->at(next.t);

  const auto blackout = [&]() -> StepResult& {
    result.info.blackout = true;
    result.done = true;
    result.reward = 0.0;
    next.terminal = true;
    return result;
  };

  FlowSolution sol;
  try {
    sol = solve_dc(g, next.topo, next.injections);
  } catch (const SingularSystemError&) {
    next.rho.setZero();
    next.p_flow.setZero();
    return blackout();
  }

  // Protection: hard trips at once, soft trips after sustained overload.
  for (int l = 0; l < g.n_lines(); ++l) {
    if (!next.topo.line_in_service[l]) {
      next.overload_age[l] = 0;
      continue;
    }
    const double rho = sol.rho[l];
    bool trip = false;
    if (rho >= config_.hard_trip_rho) {
      trip = true;
    } else if (rho > config_.soft_trip_rho) {
      trip = ++next.overload_age[l] >= config_.soft_trip_steps;
    } else {
      next.overload_age[l] = 0;
    }
    if (trip) {
      next.topo.line_in_service[l] = 0;
      next.overload_age[l] = 0;
      next.line_cooldown[l] = config_.trip_cooldown;
      result.info.tripped_lines.push_back(l);
    }
  }
  if (!result.info.tripped_lines.empty()) {
    try {
      sol = solve_dc(g, next.topo, next.injections);
    } catch (const SingularSystemError&) {
      next.rho.setZero();
      next.p_flow.setZero();
      return blackout();
    }
  }

  next.rho = sol.rho;
  next.p_flow = sol.p_flow;
  next.injections.gen_mw[g.slack_generator()] = sol.slack_mw;
  if (injection_islanded(g, sol)) return blackout();

  result.reward = margin_reward(next);
  if (next.t >= episode_->length()) {
    next.terminal = true;
    result.done = true;
  }
  return result;
}

StepResult Simulator::simulate_one_step(const Observation& obs, const Action& action) const {
  ++sims_;
  return step(obs, action);
}

// ---------------------------------------------------------------------------

std::vector<Episode> generate_episodes(const GridModel& grid, std::uint64_t seed, int count,
                                       const EpisodeGenConfig& config, int first_index) {
  if (config.length < 2) throw UsageError("episode length must be >= 2");
  double base_total = 0.0;
  for (const Load& d : grid.loads()) base_total += d.p_nominal;

  std::vector<Episode> episodes;
  episodes.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const int index = first_index + k;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), 0x9e3779b9U};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Episode ep;
    ep.seed = seed;
    ep.index = index;
    const int rows = config.length + 1;
    ep.load_mw.resize(rows, grid.n_loads());
    ep.gen_mw.resize(rows, grid.n_gens());

    const double episode_phase = 2.0 * std::numbers::pi * unit(rng);
    std::vector<double> phase(grid.loads().size());
    for (double& p : phase) p = episode_phase + config.phase_jitter * (2.0 * unit(rng) - 1.0);

    for (int t = 0; t < rows; ++t) {
      const double angle = 2.0 * std::numbers::pi * t / config.period;
      for (int d = 0; d < grid.n_loads(); ++d) {
        const double eps = config.noise * (2.0 * unit(rng) - 1.0);
        const double factor = 1.0 + config.amplitude * std::sin(angle + phase[d]) + eps;
        ep.load_mw(t, d) = grid.loads()[d].p_nominal * std::max(0.0, factor);
      }
      const double scale = base_total > 0.0 ? ep.load_mw.row(t).sum() / base_total : 1.0;
      for (int gi = 0; gi < grid.n_gens(); ++gi) {
        ep.gen_mw(t, gi) = grid.generators()[gi].p_nominal * scale;
      }
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

Episode nominal_episode(const GridModel& grid, int length) {
  Episode ep;
  ep.load_mw.resize(length + 1, grid.n_loads());
  ep.gen_mw.resize(length + 1, grid.n_gens());
  for (int d = 0; d < grid.n_loads(); ++d) ep.load_mw.col(d).setConstant(grid.loads()[d].p_nominal);
  for (int g = 0; g < grid.n_gens(); ++g) ep.gen_mw.col(g).setConstant(grid.generators()[g].p_nominal);
  return ep;
}

}  // namespace gridrl
