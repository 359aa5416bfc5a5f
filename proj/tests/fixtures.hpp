#pragma once

#include <random>
#include <vector>

#include "gridrl/environment.hpp"
#include "gridrl/grid_model.hpp"

namespace fixtures {

using namespace gridrl;

// Substation element counts must match what is attached, so derive them.
inline GridModel make_grid(int n_subs, std::vector<Line> lines, std::vector<Generator> gens,
                           std::vector<Load> loads, int slack = 0) {
  std::vector<Substation> subs(static_cast<std::size_t>(n_subs));
  for (int s = 0; s < n_subs; ++s) subs[s].id = s;
  for (const Line& l : lines) {
    ++subs[l.from_sub].n_elements;
    ++subs[l.to_sub].n_elements;
  }
  for (const Generator& g : gens) ++subs[g.sub].n_elements;
  for (const Load& d : loads) ++subs[d.sub].n_elements;
  return GridModel(std::move(subs), std::move(lines), std::move(gens), std::move(loads), slack);
}

// Two buses, one line x = 0.5 p.u., slack generator at 0, load at 1.
inline GridModel two_bus() {
  return make_grid(2, {{0, 0, 1, 0.5, 100.0}}, {{0, 0, 10.0, 1.0}}, {{0, 1, 1.0}});
}

inline Injections injections_for(const GridModel& grid, std::vector<double> loads,
                                 std::vector<double> gens) {
  Injections inj;
  inj.load_mw = Eigen::Map<const Eigen::VectorXd>(loads.data(), static_cast<Eigen::Index>(loads.size()));
  inj.gen_mw = Eigen::Map<const Eigen::VectorXd>(gens.data(), static_cast<Eigen::Index>(gens.size()));
  (void)grid;
  return inj;
}

/// Random connected network: spanning tree plus extra lines, x in [0.1, 2].
inline GridModel random_network(std::mt19937_64& rng, int n_subs) {
  std::uniform_real_distribution<double> x(0.1, 2.0);
  std::uniform_real_distribution<double> mw(1.0, 50.0);
  std::vector<Line> lines;
  for (int s = 1; s < n_subs; ++s) {
    std::uniform_int_distribution<int> parent(0, s - 1);
    lines.push_back({static_cast<int>(lines.size()), parent(rng), s, x(rng), 100.0});
  }
  std::uniform_int_distribution<int> sub(0, n_subs - 1);
  std::uniform_int_distribution<int> extra(0, n_subs);
  for (int k = extra(rng); k > 0; --k) {
    const int a = sub(rng), b = sub(rng);
    if (a != b) lines.push_back({static_cast<int>(lines.size()), a, b, x(rng), 100.0});
  }
  std::vector<Generator> gens{{0, 0, 1000.0, 0.0}};
  std::vector<Load> loads;
  for (int s = 1; s < n_subs; ++s) {
    if (rng() % 3 == 0) gens.push_back({static_cast<int>(gens.size()), s, 100.0, mw(rng)});
    loads.push_back({static_cast<int>(loads.size()), s, mw(rng)});
  }
  return make_grid(n_subs, std::move(lines), std::move(gens), std::move(loads));
}

/// Base-case injections with the slack scheduled to zero (the solver balances it).
inline Injections nominal_injections(const GridModel& grid) {
  Injections inj;
  inj.load_mw.resize(grid.n_loads());
  inj.gen_mw.resize(grid.n_gens());
  for (int d = 0; d < grid.n_loads(); ++d) inj.load_mw[d] = grid.loads()[d].p_nominal;
  for (int g = 0; g < grid.n_gens(); ++g) inj.gen_mw[g] = grid.generators()[g].p_nominal;
  return inj;
}

/// Episode whose every snapshot repeats the nominal injections.
inline Episode flat_episode(const GridModel& grid, int length, double load_scale = 1.0) {
  Episode ep = nominal_episode(grid, length);
  ep.load_mw *= load_scale;
  ep.gen_mw *= load_scale;
  return ep;
}

}  // namespace fixtures
