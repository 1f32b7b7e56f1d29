// headway.hpp - the measurement geometry. Every loop position is mapped to a
// virtual time coordinate (cumulative expected traversal time from stop 1's
// departure point); bus progress and forward headways are differences on that
// circle of circumference C.
#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "busim/scenario.hpp"

namespace busim {

class SaturationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExpectedDwellTable {
  std::vector<double> dwell_s;  // expected dwell per stop, index id-1
  double esh_s = 0.0;           // expected system headway
};

// Closed form of the boarder-dominated dwell fixed point:
//   H = (X/v + sum_i w_i) / (n_B - per_boarder * sum_e r_e / 60)
// with per-stop expected dwell per_boarder * r_e * H / 60. Throws
// SaturationError when the denominator is not positive (demand exceeds what
// the fleet can absorb).
ExpectedDwellTable expected_dwell_fixed_point(const Scenario& s);

struct VirtualCoordinateMap {
  std::vector<double> stop_arrival_v;    // V at the arrival point of each stop
  std::vector<double> stop_departure_v;  // V(e): scheduled-departure coordinate
  std::vector<double> intersection_v;
  double cycle_length_s = 0.0;           // C: expected time around the loop
};

VirtualCoordinateMap build_virtual_map(const Scenario& s,
                                       std::span<const double> expected_dwell_s);

// A bus reduced to the two features headways are computed from.
struct BusPoint {
  int target_stop = 0;
  double time_to_activation_s = 0.0;
};

// Position on the virtual timeline, in [0, C): the bus sits
// time_to_activation_s behind its target stop's departure point.
double progress_of(const BusPoint& p, const VirtualCoordinateMap& map);

struct HeadwaySnapshot {
  double time_s = 0.0;
  std::vector<double> headway_s;  // forward headway per bus, input order
  double target_s = 0.0;          // H(t): mean of all headways
  double sigma_s = 0.0;           // pseudo standard deviation (divide by n_B)

  double min_headway_s() const;
};

// Forward headway of each bus to its nearest leader on the virtual circle.
// Buses with equal progress are ordered by index (lower index behind), which
// matches the engine's no-overtaking queueing.
HeadwaySnapshot headway_snapshot(double time_s, std::span<const BusPoint> buses,
                                 const VirtualCoordinateMap& map);

}  // namespace busim
