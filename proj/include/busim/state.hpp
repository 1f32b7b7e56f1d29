// state.hpp - the system snapshot taken by the engine at each critical time
// point and handed to the holding strategies.
#pragma once

#include <vector>

#include "busim/headway.hpp"

namespace busim {

// Snapshot of the line at a CTP: per-bus target stop and time to activation,
// per-stop latest arrival time, and the clock. The bus whose CTP triggered
// the snapshot has time_to_activation_s exactly 0; every other bus is kept
// strictly positive so the activation argmin is unambiguous.
struct SystemState {
  double clock_s = 0.0;
  int ctp_bus_id = 0;
  std::vector<int> bus_id;                   // per bus index
  std::vector<int> target_stop;              // per bus index
  std::vector<double> time_to_activation_s;  // per bus index, >= 0
  std::vector<double> latest_arrival_s;      // per stop index, absolute time

  int bus_count() const { return static_cast<int>(target_stop.size()); }

  int index_of_bus(int id) const {
    for (std::size_t b = 0; b < bus_id.size(); ++b)
      if (bus_id[b] == id) return static_cast<int>(b);
    return -1;
  }

  std::vector<BusPoint> bus_points() const {
    std::vector<BusPoint> points(target_stop.size());
    for (std::size_t b = 0; b < target_stop.size(); ++b)
      points[b] = {target_stop[b], time_to_activation_s[b]};
    return points;
  }
};

}  // namespace busim
