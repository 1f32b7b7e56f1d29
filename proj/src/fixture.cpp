// fixture.cpp - the built-in "he2019" test line: a 17.95 km circular route
// with 30 stops, 13 signalized intersections and a fleet of 9 buses.
#include "busim/scenario.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace busim {

namespace {

struct BusRow {
  int capacity;
  int initial_stop;
  double rtba_s;
};

constexpr std::array<BusRow, 9> kBuses = {{
    {72, 1, 20},
    {70, 4, 0},
    {80, 8, 40},
    {60, 11, 30},
    {72, 15, 50},
    {60, 18, 10},
    {72, 21, 30},
    {80, 25, 35},
    {60, 28, 25},
}};

// Road segments of each bus line segment, in traversal order. An intersection
// sits between every two consecutive road segments of the same bus line
// segment (critical points split the route into road segments).
constexpr std::array<std::array<double, 3>, 30> kSegmentLengths = {{
    {200, 400, 0},    // 1
    {500, 0, 0},      // 2
    {600, 0, 0},      // 3
    {260, 350, 0},    // 4
    {530, 0, 0},      // 5
    {560, 0, 0},      // 6
    {600, 0, 0},      // 7
    {300, 500, 0},    // 8
    {600, 0, 0},      // 9
    {300, 350, 0},    // 10
    {600, 0, 0},      // 11
    {300, 400, 0},    // 12
    {300, 320, 0},    // 13
    {500, 0, 0},      // 14
    {450, 0, 0},      // 15
    {200, 250, 100},  // 16
    {570, 0, 0},      // 17
    {610, 0, 0},      // 18
    {600, 0, 0},      // 19
    {300, 350, 0},    // 20
    {200, 400, 0},    // 21
    {500, 0, 0},      // 22
    {600, 0, 0},      // 23
    {260, 350, 0},    // 24
    {530, 0, 0},      // 25
    {560, 0, 0},      // 26
    {600, 0, 0},      // 27
    {300, 500, 0},    // 28
    {600, 0, 0},      // 29
    {300, 350, 0},    // 30
}};

struct IntersectionRow {
  double red_s;
  double green_s;
  double initial_remaining_s;
  SignalPhase initial_phase;
  int host_segment;
};

constexpr std::array<IntersectionRow, 13> kIntersections = {{
    {40, 50, 20, SignalPhase::green, 1},
    {40, 30, 20, SignalPhase::red, 4},
    {40, 35, 20, SignalPhase::red, 8},
    {30, 45, 20, SignalPhase::green, 10},
    {30, 30, 20, SignalPhase::green, 12},
    {40, 30, 20, SignalPhase::red, 13},
    {40, 45, 30, SignalPhase::green, 16},
    {30, 35, 20, SignalPhase::green, 16},
    {30, 45, 20, SignalPhase::green, 20},
    {40, 50, 10, SignalPhase::green, 21},
    {40, 30, 20, SignalPhase::red, 24},
    {40, 35, 10, SignalPhase::red, 28},
    {30, 45, 20, SignalPhase::green, 30},
}};

constexpr std::array<double, 30> kArrivalRates = {
    2, 1, 2, 1, 2, 1, 2, 1, 3, 2,  // stops 1..10
    3, 2, 1, 2, 2, 1, 1, 2, 1, 4,  // stops 11..20
    2, 2, 2, 1, 2, 1, 3, 1, 3, 4,  // stops 21..30
};

constexpr std::array<int, 8> kSeriesOneStops = {1, 7, 10, 13, 20, 21, 27, 30};

// The printed series-1 probabilities sum to 0.9999; they are normalized so
// the distribution is exact while staying within rounding of the table.
constexpr std::array<double, 13> kSeriesOne = {
    0.0135, 0.0270, 0.0541, 0.0811, 0.1081, 0.1351, 0.1351,
    0.1216, 0.1216, 0.0811, 0.0541, 0.0405, 0.0270,
};

constexpr std::array<double, 10> kSeriesTwo = {
    0.0345, 0.0862, 0.1207, 0.1552, 0.1724,
    0.1552, 0.1207, 0.0862, 0.0517, 0.0172,
};

}  // namespace

Scenario builtin_fixture(std::string_view name) {
  if (name != "he2019")
    throw ValidationError("unknown builtin fixture: " + std::string(name));

  Scenario s;
  s.cruise_speed_mps = 36.0 / 3.6;  // 36 km/h
  s.observation_period_s = 14400.0;

  for (int e = 1; e <= 30; ++e) {
    Stop stop;
    stop.id = e;
    stop.rate_per_min = kArrivalRates[e - 1];
    const bool series_one =
        std::find(kSeriesOneStops.begin(), kSeriesOneStops.end(), e) != kSeriesOneStops.end();
    stop.destination_series_id = series_one ? 1 : 2;
    s.stops.push_back(stop);
  }

  int road_id = 0;
  int intersection_id = 0;
  for (int g = 1; g <= 30; ++g) {
    BusLineSegment seg;
    seg.id = g;
    seg.from_stop = g;
    for (double length : kSegmentLengths[g - 1]) {
      if (length == 0.0) break;
      if (!seg.ordered_elements.empty()) {
        ++intersection_id;
        seg.ordered_elements.push_back({BlsElement::Kind::intersection, intersection_id});
      }
      ++road_id;
      s.road_segments.push_back({road_id, length, 0.005 * length});
      seg.ordered_elements.push_back({BlsElement::Kind::road, road_id});
    }
    s.bus_line_segments.push_back(std::move(seg));
  }

  for (std::size_t i = 0; i < kIntersections.size(); ++i) {
    const IntersectionRow& row = kIntersections[i];
    Intersection x;
    x.id = static_cast<int>(i) + 1;
    x.red_s = row.red_s;
    x.green_s = row.green_s;
    x.cycle_s = row.red_s + row.green_s;
    x.initial_phase = row.initial_phase;
    x.initial_phase_remaining_s = row.initial_remaining_s;
    x.host_bus_line_segment = row.host_segment;
    s.intersections.push_back(x);
  }

  for (std::size_t i = 0; i < kBuses.size(); ++i)
    s.buses.push_back({static_cast<int>(i) + 1, kBuses[i].capacity,
                       kBuses[i].initial_stop, kBuses[i].rtba_s});

  {
    DestinationSeries one;
    one.id = 1;
    double sum = 0.0;
    for (double p : kSeriesOne) sum += p;
    for (double p : kSeriesOne) one.probabilities.push_back(p / sum);
    s.destination_series.push_back(std::move(one));

    DestinationSeries two;
    two.id = 2;
    two.probabilities.assign(kSeriesTwo.begin(), kSeriesTwo.end());
    s.destination_series.push_back(std::move(two));
  }

  s.action_sets.push_back({1, {0, 2, 4, 6, 8, 10}});

  // Every stop is a control point by default; the holding totals this line
  // produces only add up with line-wide control. Sparse control-point sets
  // are exercised by the table11 sweep.
  s.control.strategy = "nsla";
  s.control.stages = 3;
  s.control.gamma = 0.5;
  for (int e = 1; e <= 30; ++e) s.control.control_stops.push_back(e);
  s.control.action_set = 1;

  finalize_scenario(s);
  return s;
}

}  // namespace busim
