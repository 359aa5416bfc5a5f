#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridrl/environment.hpp"
#include "gridrl/errors.hpp"

namespace gridrl {

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

std::string episode_csv(const Episode& episode) {
  std::string out = "t";
  for (Eigen::Index d = 0; d < episode.load_mw.cols(); ++d) out += ",load_" + std::to_string(d);
  for (Eigen::Index g = 0; g < episode.gen_mw.cols(); ++g) out += ",gen_" + std::to_string(g);
  out += '\n';
  for (Eigen::Index t = 0; t < episode.load_mw.rows(); ++t) {
    out += std::to_string(t);
    for (Eigen::Index d = 0; d < episode.load_mw.cols(); ++d) {
      out += ',';
      append_number(out, episode.load_mw(t, d));
    }
    for (Eigen::Index g = 0; g < episode.gen_mw.cols(); ++g) {
      out += ',';
      append_number(out, episode.gen_mw(t, g));
    }
    out += '\n';
  }
  return out;
}

void write_episode_csv(const Episode& episode, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << episode_csv(episode);
}

Episode read_episode_csv(const GridModel& grid, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open episode file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("episode file is empty: " + path.string());
  const auto header = split(line);
  const std::size_t expected = 1 + static_cast<std::size_t>(grid.n_loads() + grid.n_gens());
  if (header.size() != expected || header[0] != "t") {
    throw ParseError("episode header does not match the grid: " + path.string());
  }
  for (int d = 0; d < grid.n_loads(); ++d) {
    if (header[1 + d] != "load_" + std::to_string(d)) throw ParseError("bad column " + header[1 + d]);
  }
  for (int g = 0; g < grid.n_gens(); ++g) {
    const auto& name = header[1 + grid.n_loads() + g];
    if (name != "gen_" + std::to_string(g)) throw ParseError("bad column " + name);
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != expected) throw ParseError("ragged row in " + path.string());
    std::vector<double> values(cells.size() - 1);
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        std::size_t used = 0;
        values[i - 1] = std::stod(cells[i], &used);
        if (used != cells[i].size()) throw std::invalid_argument(cells[i]);
      } catch (const std::exception&) {
        throw ParseError("non-numeric cell '" + cells[i] + "' in " + path.string());
      }
    }
    rows.push_back(std::move(values));
  }
  if (rows.size() < 2) throw ParseError("episode needs at least two snapshots: " + path.string());

  Episode ep;
  const auto n = static_cast<Eigen::Index>(rows.size());
  ep.load_mw.resize(n, grid.n_loads());
  ep.gen_mw.resize(n, grid.n_gens());
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int d = 0; d < grid.n_loads(); ++d) ep.load_mw(t, d) = rows[t][d];
    for (int g = 0; g < grid.n_gens(); ++g) ep.gen_mw(t, g) = rows[t][grid.n_loads() + g];
  }
  return ep;
}

}  // namespace gridrl
