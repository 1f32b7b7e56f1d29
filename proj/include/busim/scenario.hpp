// scenario.hpp - the bus-line world description: stops, intersections, road
// and bus-line segments, buses, demand, action sets and experiment knobs.
// A Scenario is immutable after load and safe to share across replications.
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace busim {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SignalPhase { red, green };

struct Stop {
  int id = 0;                        // 1-based ordinal position on the loop
  double rate_per_min = 0.0;         // passenger arrival rate r_e
  int destination_series_id = 0;
  bool controllable = false;
  int action_set_id = 0;             // non-control stops reference the {0} set

  bool operator==(const Stop&) const = default;
};

struct Intersection {
  int id = 0;
  double red_s = 0.0;
  double green_s = 0.0;
  double cycle_s = 0.0;              // always red_s + green_s
  SignalPhase initial_phase = SignalPhase::green;
  double initial_phase_remaining_s = 0.0;
  int host_bus_line_segment = 0;     // derived from placement

  bool operator==(const Intersection&) const = default;
};

struct RoadSegment {
  int id = 0;
  double length_m = 0.0;
  double noise_sd_s = 0.0;           // travel-time noise, 0.005 * length_m on load

  bool operator==(const RoadSegment&) const = default;
};

struct BlsElement {
  enum class Kind { road, intersection };
  Kind kind = Kind::road;
  int id = 0;

  bool operator==(const BlsElement&) const = default;
};

struct BusLineSegment {
  int id = 0;                        // equals from_stop; loop order
  int from_stop = 0;
  int to_stop = 0;                   // derived: next stop on the loop
  std::vector<BlsElement> ordered_elements;

  bool operator==(const BusLineSegment&) const = default;
};

struct BusSpec {
  int id = 0;
  int capacity = 0;
  int initial_target_stop = 0;
  double rtba_s = 0.0;               // remaining time to be activated at t=0

  bool operator==(const BusSpec&) const = default;
};

struct ActionSet {
  int id = 0;
  std::vector<double> holding_times_s;  // strictly increasing, starts at 0

  bool operator==(const ActionSet&) const = default;
};

struct DestinationSeries {
  int id = 0;
  std::vector<double> probabilities;  // p_n for the n-th downstream stop

  bool operator==(const DestinationSeries&) const = default;
};

struct DwellParams {
  enum class Mode { board_at_release, gate_at_arrival };
  double per_boarder_s = 1.0;
  double per_alighter_s = 0.5;
  Mode mode = Mode::board_at_release;

  bool operator==(const DwellParams&) const = default;
};

struct BunchingParams {
  double threshold_frac = 0.15;
  int window_ctps = 20;

  bool operator==(const BunchingParams&) const = default;
};

struct ControlConfig {
  std::string strategy = "none";     // none | tshs | nsla
  int stages = 3;                    // N, look-ahead depth
  double gamma = 0.5;                // discount in (0, 1]
  std::vector<int> control_stops;    // controllable stops (terminals for tshs)
  int action_set = 0;                // set used at control stops

  bool operator==(const ControlConfig&) const = default;
};

// Reserved id of the synthetic singleton {0} action set that all non-control
// stops reference. Never serialized.
inline constexpr int kZeroActionSetId = 0;

struct Scenario {
  std::vector<Stop> stops;                          // sorted by id == 1..n
  std::vector<Intersection> intersections;          // sorted by id
  std::vector<RoadSegment> road_segments;           // sorted by id
  std::vector<BusLineSegment> bus_line_segments;    // sorted by id == 1..n
  std::vector<BusSpec> buses;                       // sorted by id
  std::vector<DestinationSeries> destination_series;
  std::vector<ActionSet> action_sets;               // includes the {0} set
  double cruise_speed_mps = 10.0;
  double observation_period_s = 14400.0;
  bool no_overtaking = true;  // queue buses at occupied critical points
  ControlConfig control;
  DwellParams dwell;
  BunchingParams bunching;

  bool operator==(const Scenario&) const = default;

  int stop_count() const { return static_cast<int>(stops.size()); }
  int bus_count() const { return static_cast<int>(buses.size()); }
  const Stop& stop(int id) const { return stops[id - 1]; }
  int next_stop_id(int id) const { return id % stop_count() + 1; }
  const BusLineSegment& segment_from_stop(int stop_id) const {
    return bus_line_segments[stop_id - 1];
  }
  const Intersection* intersection_by_id(int id) const;
  const RoadSegment* road_by_id(int id) const;
  const ActionSet* action_set_by_id(int id) const;
  const DestinationSeries* series_by_id(int id) const;
  const ActionSet& action_set_of_stop(int stop_id) const;
  double loop_length_m() const;
  double total_arrival_rate_per_min() const;
};

// Re-derives to_stop/host fields, attaches action sets to stops, sorts by id
// and checks every invariant. Throws ValidationError naming the offending
// entity. Both the loader and the built-in fixture funnel through this.
void finalize_scenario(Scenario& s);

Scenario load_scenario(const nlohmann::json& doc);
Scenario load_scenario_file(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& s);

// Registered fixtures: "he2019" (the 9-bus / 30-stop / 13-intersection test
// line). Throws ValidationError for unknown names.
Scenario builtin_fixture(std::string_view name);

// --- derived loop geometry -------------------------------------------------

struct CriticalPointRef {
  enum class Kind { stop, intersection };
  Kind kind = Kind::stop;
  int id = 0;

  bool operator==(const CriticalPointRef&) const = default;
};

// One road segment of travel ending at a critical point.
struct Leg {
  int road_id = 0;
  double length_m = 0.0;
  double noise_sd_s = 0.0;
  CriticalPointRef to;
};

struct LineLayout {
  std::vector<std::vector<Leg>> legs_from_stop;   // index: from_stop - 1
  std::vector<double> stop_position_m;            // meters from stop 1
  std::vector<double> intersection_position_m;    // by intersection index
  double loop_length_m = 0.0;

  double position_of(const CriticalPointRef& p) const {
    return p.kind == CriticalPointRef::Kind::stop ? stop_position_m[p.id - 1]
                                                  : intersection_position_m[p.id - 1];
  }
};

LineLayout build_layout(const Scenario& s);

}  // namespace busim
