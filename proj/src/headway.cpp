#include "busim/headway.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "busim/engine.hpp"

namespace busim {

ExpectedDwellTable expected_dwell_fixed_point(const Scenario& s) {
  const double cruise_s = s.loop_length_m() / s.cruise_speed_mps;
  double signal_s = 0.0;
  for (const auto& x : s.intersections) signal_s += expected_signal_delay(x);

  const double boarder_load = s.dwell.per_boarder_s * s.total_arrival_rate_per_min() / 60.0;
  const double denominator = s.bus_count() - boarder_load;
  if (denominator <= 0.0)
    throw SaturationError(
        "expected dwell fixed point diverges: demand too high for the fleet "
        "(n_B <= per_boarder_s * total rate / 60)");

  ExpectedDwellTable table;
  table.esh_s = (cruise_s + signal_s) / denominator;
  table.dwell_s.reserve(s.stops.size());
  for (const auto& e : s.stops)
    table.dwell_s.push_back(s.dwell.per_boarder_s * e.rate_per_min * table.esh_s / 60.0);
  return table;
}

VirtualCoordinateMap build_virtual_map(const Scenario& s,
                                       std::span<const double> expected_dwell_s) {
  const int n = s.stop_count();
  VirtualCoordinateMap map;
  map.stop_arrival_v.resize(n, 0.0);
  map.stop_departure_v.resize(n, 0.0);
  map.intersection_v.resize(s.intersections.size(), 0.0);

  double v = 0.0;  // stop 1 departure point
  for (int from = 1; from <= n; ++from) {
    const BusLineSegment& g = s.segment_from_stop(from);
    for (const BlsElement& el : g.ordered_elements) {
      if (el.kind == BlsElement::Kind::road) {
        v += s.road_by_id(el.id)->length_m / s.cruise_speed_mps;
      } else {
        map.intersection_v[el.id - 1] = v;
        v += expected_signal_delay(s.intersections[el.id - 1]);
      }
    }
    const int to = g.to_stop;
    const double dwell = to - 1 < static_cast<int>(expected_dwell_s.size())
                             ? expected_dwell_s[to - 1]
                             : 0.0;
    if (to == 1) {
      map.stop_arrival_v[0] = v;
      map.cycle_length_s = v + dwell;
    } else {
      map.stop_arrival_v[to - 1] = v;
      v += dwell;
      map.stop_departure_v[to - 1] = v;
    }
  }
  return map;
}

double progress_of(const BusPoint& p, const VirtualCoordinateMap& map) {
  const double c = map.cycle_length_s;
  double x = std::fmod(map.stop_departure_v[p.target_stop - 1] - p.time_to_activation_s, c);
  if (x < 0.0) x += c;
  return x;
}

double HeadwaySnapshot::min_headway_s() const {
  return *std::min_element(headway_s.begin(), headway_s.end());
}

HeadwaySnapshot headway_snapshot(double time_s, std::span<const BusPoint> buses,
                                 const VirtualCoordinateMap& map) {
  const std::size_t n = buses.size();
  HeadwaySnapshot snap;
  snap.time_s = time_s;
  snap.headway_s.resize(n, 0.0);

  std::vector<double> progress(n);
  for (std::size_t b = 0; b < n; ++b) progress[b] = progress_of(buses[b], map);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return progress[a] != progress[b] ? progress[a] < progress[b] : a < b;
  });

  // Forward gap to the next bus in circular order; the gaps telescope to C.
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t b = order[k];
    const std::size_t leader = order[(k + 1) % n];
    double gap = progress[leader] - progress[b];
    if (k + 1 == n) gap += map.cycle_length_s;
    snap.headway_s[b] = gap;
  }

  double mean = 0.0;
  for (double h : snap.headway_s) mean += h;
  mean /= static_cast<double>(n);
  snap.target_s = mean;

  double sq = 0.0;
  for (double h : snap.headway_s) sq += (h - mean) * (h - mean);
  snap.sigma_s = std::sqrt(sq / static_cast<double>(n));
  return snap;
}

}  // namespace busim
