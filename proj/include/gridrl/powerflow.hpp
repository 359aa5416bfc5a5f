#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gridrl/grid_model.hpp"

namespace gridrl {

struct Topology {
  std::vector<std::uint8_t> busbar_of_element;  // 1 or 2 per element
  std::vector<std::uint8_t> line_in_service;    // 0/1 per line

  /// Every element on busbar 1, every line in service.
  static Topology reference(const GridModel& grid);
  bool operator==(const Topology&) const = default;
};

/// Active power per generator and load. Loads are consumption (positive MW).
struct Injections {
  Eigen::VectorXd load_mw;
  Eigen::VectorXd gen_mw;
};

/// Busbar-level node index of (sub, busbar in {1,2}).
inline int node_index(int sub, int busbar) { return 2 * sub + busbar - 1; }

struct BusPartition {
  int n_buses = 0;
  std::vector<int> bus_of_element;  // element -> electrical bus
  std::vector<int> bus_of_node;     // busbar node -> electrical bus, -1 if empty
  std::vector<int> node_of_bus;
  std::vector<std::uint8_t> node_empty;  // all 2*n_sub nodes, flagging empty ones
};

BusPartition electrical_buses(const GridModel& grid, const Topology& topo);

struct FlowSolution {
  BusPartition buses;
  int slack_bus = -1;
  Eigen::VectorXd theta;          // rad per bus; 0 on islanded buses
  Eigen::VectorXd bus_injection;  // MW per bus, including the slack residual
  Eigen::VectorXd p_flow;         // MW per line, origin -> extremity; 0 when out of service
  Eigen::VectorXd rho;            // per line
  std::vector<std::uint8_t> islanded;  // per bus
  double slack_mw = 0.0;          // output of the slack generator after balancing

  bool element_islanded(int element) const {
    return islanded[static_cast<std::size_t>(buses.bus_of_element[static_cast<std::size_t>(element)])] != 0;
  }
};

/// DC power flow on the slack component with theta_slack = 0. Buses outside
/// the slack component are flagged islanded and their injections dropped.
/// Throws SingularSystemError if the reduced susceptance matrix cannot be factorized.
FlowSolution solve_dc(const GridModel& grid, const Topology& topo, const Injections& injections);

/// |p_flow| / thermal_limit; lines out of service carry no flow and get 0.
Eigen::VectorXd loading_ratios(const FlowSolution& sol, const GridModel& grid);

/// True if any load or generator sits on an islanded bus.
bool injection_islanded(const GridModel& grid, const FlowSolution& sol);

}  // namespace gridrl
