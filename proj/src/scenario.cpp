#include "busim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace busim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

template <typename T>
std::string entity(const char* kind, const T& id) {
  std::ostringstream os;
  os << kind << " " << id;
  return os.str();
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + ": missing field '" + key + "'");
  return *it;
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  try {
    return require(obj, key, where).get<T>();
  } catch (const json::exception& e) {
    fail(where + ": bad value for '" + std::string(key) + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& obj, const char* key, T def) {
  auto it = obj.find(key);
  if (it == obj.end()) return def;
  return it->get<T>();
}

}  // namespace

const Intersection* Scenario::intersection_by_id(int id) const {
  for (const auto& x : intersections)
    if (x.id == id) return &x;
  return nullptr;
}

const RoadSegment* Scenario::road_by_id(int id) const {
  for (const auto& r : road_segments)
    if (r.id == id) return &r;
  return nullptr;
}

const ActionSet* Scenario::action_set_by_id(int id) const {
  for (const auto& a : action_sets)
    if (a.id == id) return &a;
  return nullptr;
}

const DestinationSeries* Scenario::series_by_id(int id) const {
  for (const auto& s : destination_series)
    if (s.id == id) return &s;
  return nullptr;
}

const ActionSet& Scenario::action_set_of_stop(int stop_id) const {
  const ActionSet* a = action_set_by_id(stop(stop_id).action_set_id);
  if (!a) fail(entity("stop", stop_id) + ": dangling action set reference");
  return *a;
}

double Scenario::loop_length_m() const {
  double total = 0.0;
  for (const auto& r : road_segments) total += r.length_m;
  return total;
}

double Scenario::total_arrival_rate_per_min() const {
  double total = 0.0;
  for (const auto& e : stops) total += e.rate_per_min;
  return total;
}

void finalize_scenario(Scenario& s) {
  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::sort(s.stops.begin(), s.stops.end(), by_id);
  std::sort(s.intersections.begin(), s.intersections.end(), by_id);
  std::sort(s.road_segments.begin(), s.road_segments.end(), by_id);
  std::sort(s.bus_line_segments.begin(), s.bus_line_segments.end(), by_id);
  std::sort(s.buses.begin(), s.buses.end(), by_id);
  std::sort(s.destination_series.begin(), s.destination_series.end(), by_id);
  std::sort(s.action_sets.begin(), s.action_sets.end(), by_id);

  if (s.stops.empty()) fail("scenario has no stops");
  if (s.buses.empty()) fail("scenario has no buses");
  if (s.cruise_speed_mps <= 0.0) fail("line: cruise speed must be positive");
  if (s.observation_period_s < 0.0) fail("line: observation period must be >= 0");

  const int n = s.stop_count();
  for (int i = 0; i < n; ++i)
    if (s.stops[i].id != i + 1)
      fail(entity("stop", s.stops[i].id) + ": stop ids must be exactly 1..n");

  for (std::size_t i = 0; i < s.intersections.size(); ++i)
    if (s.intersections[i].id != static_cast<int>(i) + 1)
      fail(entity("intersection", s.intersections[i].id) +
           ": intersection ids must be exactly 1..n");

  for (std::size_t i = 1; i < s.road_segments.size(); ++i)
    if (s.road_segments[i].id == s.road_segments[i - 1].id)
      fail(entity("road segment", s.road_segments[i].id) + ": duplicate id");

  for (const auto& r : s.road_segments) {
    if (r.length_m <= 0.0) fail(entity("road segment", r.id) + ": length must be positive");
    if (r.noise_sd_s < 0.0) fail(entity("road segment", r.id) + ": negative noise sd");
  }

  // Bus line segments must walk the loop stop by stop.
  if (static_cast<int>(s.bus_line_segments.size()) != n)
    fail("bus line segments must partition the loop: expected one per stop");
  for (int i = 0; i < n; ++i) {
    BusLineSegment& g = s.bus_line_segments[i];
    if (g.id != i + 1) fail(entity("bus line segment", g.id) + ": ids must be exactly 1..n");
    if (g.from_stop != g.id)
      fail(entity("bus line segment", g.id) + ": from_stop must equal the segment id");
    g.to_stop = s.next_stop_id(g.from_stop);
  }

  // Each road segment and each intersection appears exactly once, and within
  // a segment the elements alternate road / intersection, road first and last.
  std::set<int> roads_seen;
  std::set<int> intersections_seen;
  for (auto& g : s.bus_line_segments) {
    if (g.ordered_elements.empty())
      fail(entity("bus line segment", g.id) + ": no elements");
    for (std::size_t k = 0; k < g.ordered_elements.size(); ++k) {
      const BlsElement& el = g.ordered_elements[k];
      const bool expect_road = k % 2 == 0;
      if (expect_road != (el.kind == BlsElement::Kind::road))
        fail(entity("bus line segment", g.id) +
             ": elements must alternate road/intersection starting with a road");
      if (el.kind == BlsElement::Kind::road) {
        if (!s.road_by_id(el.id))
          fail(entity("bus line segment", g.id) + ": unknown road segment " +
               std::to_string(el.id));
        if (!roads_seen.insert(el.id).second)
          fail(entity("road segment", el.id) + ": used by more than one bus line segment");
      } else {
        if (el.id < 1 || el.id > static_cast<int>(s.intersections.size()))
          fail(entity("bus line segment", g.id) + ": unknown intersection " +
               std::to_string(el.id));
        if (!intersections_seen.insert(el.id).second)
          fail(entity("intersection", el.id) + ": appears in more than one bus line segment");
        s.intersections[el.id - 1].host_bus_line_segment = g.id;
      }
    }
    if (g.ordered_elements.back().kind != BlsElement::Kind::road)
      fail(entity("bus line segment", g.id) + ": must end with a road segment");
  }
  if (roads_seen.size() != s.road_segments.size())
    fail("road segments must partition the loop: some are unused");
  if (intersections_seen.size() != s.intersections.size())
    fail("every intersection must appear in exactly one bus line segment");

  for (auto& x : s.intersections) {
    if (x.red_s < 0.0 || x.green_s < 0.0)
      fail(entity("intersection", x.id) + ": negative phase duration");
    const double cycle = x.red_s + x.green_s;
    if (cycle <= 0.0) fail(entity("intersection", x.id) + ": zero cycle");
    if (x.cycle_s == 0.0) x.cycle_s = cycle;
    if (std::abs(x.cycle_s - cycle) > 1e-9)
      fail(entity("intersection", x.id) + ": cycle_s must equal red_s + green_s");
    const double initial =
        x.initial_phase == SignalPhase::red ? x.red_s : x.green_s;
    if (x.initial_phase_remaining_s <= 0.0 || x.initial_phase_remaining_s > initial)
      fail(entity("intersection", x.id) +
           ": initial_phase_remaining_s must lie in (0, initial phase duration]");
  }

  // Action sets: ensure the synthetic {0} set exists, then validate all.
  if (!s.action_set_by_id(kZeroActionSetId))
    s.action_sets.insert(s.action_sets.begin(),
                         ActionSet{kZeroActionSetId, {0.0}});
  for (std::size_t i = 1; i < s.action_sets.size(); ++i)
    if (s.action_sets[i].id == s.action_sets[i - 1].id)
      fail(entity("action set", s.action_sets[i].id) + ": duplicate id");
  for (const auto& a : s.action_sets) {
    if (a.holding_times_s.empty() || a.holding_times_s.front() != 0.0)
      fail(entity("action set", a.id) + ": first holding time must be 0");
    for (std::size_t k = 1; k < a.holding_times_s.size(); ++k)
      if (a.holding_times_s[k] <= a.holding_times_s[k - 1])
        fail(entity("action set", a.id) + ": holding times must be strictly increasing");
  }
  const ActionSet& zero = *s.action_set_by_id(kZeroActionSetId);
  if (zero.holding_times_s != std::vector<double>{0.0})
    fail("action set 0 is reserved for the singleton {0}");

  for (std::size_t i = 1; i < s.destination_series.size(); ++i)
    if (s.destination_series[i].id == s.destination_series[i - 1].id)
      fail(entity("destination series", s.destination_series[i].id) + ": duplicate id");
  for (const auto& ds : s.destination_series) {
    if (ds.probabilities.empty())
      fail(entity("destination series", ds.id) + ": empty");
    if (static_cast<int>(ds.probabilities.size()) > n - 1)
      fail(entity("destination series", ds.id) +
           ": series longer than the number of downstream stops");
    double sum = 0.0;
    for (double p : ds.probabilities) {
      if (p < 0.0) fail(entity("destination series", ds.id) + ": negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      fail(entity("destination series", ds.id) + ": probabilities sum to " +
           std::to_string(sum) + ", expected 1");
  }

  // Control config, then per-stop wiring.
  if (s.control.strategy != "none" && s.control.strategy != "tshs" &&
      s.control.strategy != "nsla")
    fail("control: unknown strategy '" + s.control.strategy + "'");
  if (s.control.strategy == "nsla" && s.control.stages < 1)
    fail("control: stages must be >= 1");
  if (!(s.control.gamma > 0.0 && s.control.gamma <= 1.0))
    fail("control: gamma must lie in (0, 1]");
  {
    std::set<int> seen;
    for (int e : s.control.control_stops) {
      if (e < 1 || e > n) fail("control: control stop " + std::to_string(e) + " does not exist");
      if (!seen.insert(e).second)
        fail("control: duplicate control stop " + std::to_string(e));
    }
  }
  if (!s.control.control_stops.empty()) {
    for (auto& e : s.stops)
      e.controllable = std::find(s.control.control_stops.begin(),
                                 s.control.control_stops.end(),
                                 e.id) != s.control.control_stops.end();
  }
  if (s.control.action_set == kZeroActionSetId) {
    // Pick the first non-reserved set when the document left it unset.
    for (const auto& a : s.action_sets)
      if (a.id != kZeroActionSetId) {
        s.control.action_set = a.id;
        break;
      }
  }
  if (!s.action_set_by_id(s.control.action_set))
    fail("control: unknown action set " + std::to_string(s.control.action_set));

  for (auto& e : s.stops) {
    if (e.rate_per_min < 0.0) fail(entity("stop", e.id) + ": negative arrival rate");
    if (!s.series_by_id(e.destination_series_id))
      fail(entity("stop", e.id) + ": unknown destination series " +
           std::to_string(e.destination_series_id));
    e.action_set_id = e.controllable ? s.control.action_set : kZeroActionSetId;
  }

  std::set<int> bus_ids;
  std::set<int> initial_stops;
  for (const auto& b : s.buses) {
    if (!bus_ids.insert(b.id).second) fail(entity("bus", b.id) + ": duplicate id");
    if (b.capacity <= 0) fail(entity("bus", b.id) + ": capacity must be positive");
    if (b.rtba_s < 0.0) fail(entity("bus", b.id) + ": rtba_s must be >= 0");
    if (b.initial_target_stop < 1 || b.initial_target_stop > n)
      fail(entity("bus", b.id) + ": initial stop " +
           std::to_string(b.initial_target_stop) + " does not exist");
    if (!initial_stops.insert(b.initial_target_stop).second)
      fail(entity("bus", b.id) + ": initial stop shared with another bus");
  }

  if (s.dwell.per_boarder_s < 0.0 || s.dwell.per_alighter_s < 0.0)
    fail("dwell: parameters must be >= 0");
  if (s.bunching.threshold_frac <= 0.0) fail("bunching: threshold_frac must be positive");
  if (s.bunching.window_ctps < 1) fail("bunching: window_ctps must be >= 1");
}

// --- JSON I/O ---------------------------------------------------------------

namespace {

SignalPhase parse_phase(const std::string& v, const std::string& where) {
  if (v == "red") return SignalPhase::red;
  if (v == "green") return SignalPhase::green;
  fail(where + ": initial_phase must be 'red' or 'green'");
}

DwellParams::Mode parse_dwell_mode(const std::string& v) {
  if (v == "board_at_release") return DwellParams::Mode::board_at_release;
  if (v == "gate_at_arrival") return DwellParams::Mode::gate_at_arrival;
  fail("dwell: mode must be 'board_at_release' or 'gate_at_arrival'");
}

}  // namespace

Scenario load_scenario(const json& doc) {
  if (!doc.is_object()) fail("scenario document must be an object");
  Scenario s;

  const json& line = require(doc, "line", "scenario");
  s.cruise_speed_mps = field<double>(line, "cruise_speed_kmh", "line") / 3.6;
  s.observation_period_s = field<double>(line, "observation_period_s", "line");
  s.no_overtaking = field_or<bool>(line, "no_overtaking", true);

  for (const json& j : require(doc, "stops", "scenario")) {
    Stop e;
    e.id = field<int>(j, "id", "stop");
    const std::string where = entity("stop", e.id);
    e.rate_per_min = field<double>(j, "rate_per_min", where);
    e.destination_series_id = field<int>(j, "series", where);
    e.controllable = field_or<bool>(j, "controllable", false);
    s.stops.push_back(e);
  }

  for (const json& j : require(doc, "road_segments", "scenario")) {
    RoadSegment r;
    r.id = field<int>(j, "id", "road segment");
    r.length_m = field<double>(j, "length_m", entity("road segment", r.id));
    // noise defaults to the 0.005 * length rule; writable for custom lines
    r.noise_sd_s = field_or<double>(j, "noise_sd_s", 0.005 * r.length_m);
    s.road_segments.push_back(r);
  }

  for (const json& j : require(doc, "bus_line_segments", "scenario")) {
    BusLineSegment g;
    g.id = field<int>(j, "id", "bus line segment");
    const std::string where = entity("bus line segment", g.id);
    g.from_stop = field<int>(j, "from_stop", where);
    for (const json& el : require(j, "elements", where)) {
      if (el.contains("road"))
        g.ordered_elements.push_back({BlsElement::Kind::road, el["road"].get<int>()});
      else if (el.contains("intersection"))
        g.ordered_elements.push_back(
            {BlsElement::Kind::intersection, el["intersection"].get<int>()});
      else
        fail(where + ": element must be tagged 'road' or 'intersection'");
    }
    s.bus_line_segments.push_back(g);
  }

  for (const json& j : require(doc, "intersections", "scenario")) {
    Intersection x;
    x.id = field<int>(j, "id", "intersection");
    const std::string where = entity("intersection", x.id);
    x.red_s = field<double>(j, "red_s", where);
    x.green_s = field<double>(j, "green_s", where);
    x.cycle_s = field_or<double>(j, "cycle_s", 0.0);  // optional; must match red+green
    x.initial_phase = parse_phase(field<std::string>(j, "initial_phase", where), where);
    x.initial_phase_remaining_s = field<double>(j, "initial_phase_remaining_s", where);
    s.intersections.push_back(x);
  }

  for (const json& j : require(doc, "buses", "scenario")) {
    BusSpec b;
    b.id = field<int>(j, "id", "bus");
    const std::string where = entity("bus", b.id);
    b.capacity = field<int>(j, "capacity", where);
    b.initial_target_stop = field<int>(j, "initial_stop", where);
    b.rtba_s = field<double>(j, "rtba_s", where);
    s.buses.push_back(b);
  }

  for (const json& j : require(doc, "series", "scenario")) {
    DestinationSeries ds;
    ds.id = field<int>(j, "id", "destination series");
    ds.probabilities =
        field<std::vector<double>>(j, "probabilities", entity("destination series", ds.id));
    s.destination_series.push_back(ds);
  }

  for (const json& j : require(doc, "action_sets", "scenario")) {
    ActionSet a;
    a.id = field<int>(j, "id", "action set");
    a.holding_times_s =
        field<std::vector<double>>(j, "holding_times_s", entity("action set", a.id));
    s.action_sets.push_back(a);
  }

  const json& control = require(doc, "control", "scenario");
  s.control.strategy = field<std::string>(control, "strategy", "control");
  s.control.stages = field_or<int>(control, "stages", 3);
  s.control.gamma = field_or<double>(control, "gamma", 0.5);
  s.control.control_stops = field_or<std::vector<int>>(control, "control_stops", {});
  s.control.action_set = field_or<int>(control, "action_set", kZeroActionSetId);

  if (doc.contains("dwell")) {
    const json& dwell = doc["dwell"];
    s.dwell.per_boarder_s = field_or<double>(dwell, "per_boarder_s", 1.0);
    s.dwell.per_alighter_s = field_or<double>(dwell, "per_alighter_s", 0.5);
    s.dwell.mode = parse_dwell_mode(field_or<std::string>(dwell, "mode", "board_at_release"));
  }
  if (doc.contains("bunching")) {
    const json& bunching = doc["bunching"];
    s.bunching.threshold_frac = field_or<double>(bunching, "threshold_frac", 0.15);
    s.bunching.window_ctps = field_or<int>(bunching, "window_ctps", 20);
  }

  finalize_scenario(s);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open scenario file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail("cannot parse " + path + ": " + e.what());
  }
  return load_scenario(doc);
}

nlohmann::json scenario_to_json(const Scenario& s) {
  json doc;
  doc["line"] = {{"cruise_speed_kmh", s.cruise_speed_mps * 3.6},
                 {"observation_period_s", s.observation_period_s}};
  if (!s.no_overtaking) doc["line"]["no_overtaking"] = false;

  json stops = json::array();
  for (const auto& e : s.stops)
    stops.push_back({{"id", e.id},
                     {"rate_per_min", e.rate_per_min},
                     {"series", e.destination_series_id},
                     {"controllable", e.controllable}});
  doc["stops"] = std::move(stops);

  json roads = json::array();
  for (const auto& r : s.road_segments) {
    json entry = {{"id", r.id}, {"length_m", r.length_m}};
    if (r.noise_sd_s != 0.005 * r.length_m) entry["noise_sd_s"] = r.noise_sd_s;
    roads.push_back(std::move(entry));
  }
  doc["road_segments"] = std::move(roads);

  json segments = json::array();
  for (const auto& g : s.bus_line_segments) {
    json elements = json::array();
    for (const auto& el : g.ordered_elements) {
      if (el.kind == BlsElement::Kind::road)
        elements.push_back({{"road", el.id}});
      else
        elements.push_back({{"intersection", el.id}});
    }
    segments.push_back(
        {{"id", g.id}, {"from_stop", g.from_stop}, {"elements", std::move(elements)}});
  }
  doc["bus_line_segments"] = std::move(segments);

  json intersections = json::array();
  for (const auto& x : s.intersections)
    intersections.push_back(
        {{"id", x.id},
         {"red_s", x.red_s},
         {"green_s", x.green_s},
         {"initial_phase", x.initial_phase == SignalPhase::red ? "red" : "green"},
         {"initial_phase_remaining_s", x.initial_phase_remaining_s}});
  doc["intersections"] = std::move(intersections);

  json buses = json::array();
  for (const auto& b : s.buses)
    buses.push_back({{"id", b.id},
                     {"capacity", b.capacity},
                     {"initial_stop", b.initial_target_stop},
                     {"rtba_s", b.rtba_s}});
  doc["buses"] = std::move(buses);

  json series = json::array();
  for (const auto& ds : s.destination_series)
    series.push_back({{"id", ds.id}, {"probabilities", ds.probabilities}});
  doc["series"] = std::move(series);

  json sets = json::array();
  for (const auto& a : s.action_sets)
    if (a.id != kZeroActionSetId)
      sets.push_back({{"id", a.id}, {"holding_times_s", a.holding_times_s}});
  doc["action_sets"] = std::move(sets);

  doc["control"] = {{"strategy", s.control.strategy},
                    {"stages", s.control.stages},
                    {"gamma", s.control.gamma},
                    {"control_stops", s.control.control_stops},
                    {"action_set", s.control.action_set}};
  doc["dwell"] = {{"per_boarder_s", s.dwell.per_boarder_s},
                  {"per_alighter_s", s.dwell.per_alighter_s},
                  {"mode", s.dwell.mode == DwellParams::Mode::board_at_release
                               ? "board_at_release"
                               : "gate_at_arrival"}};
  doc["bunching"] = {{"threshold_frac", s.bunching.threshold_frac},
                     {"window_ctps", s.bunching.window_ctps}};
  return doc;
}

LineLayout build_layout(const Scenario& s) {
  LineLayout layout;
  const int n = s.stop_count();
  layout.legs_from_stop.resize(n);
  layout.stop_position_m.resize(n, 0.0);
  layout.intersection_position_m.resize(s.intersections.size(), 0.0);

  double pos = 0.0;
  for (int from = 1; from <= n; ++from) {
    const BusLineSegment& g = s.segment_from_stop(from);
    auto& legs = layout.legs_from_stop[from - 1];
    for (std::size_t k = 0; k < g.ordered_elements.size(); ++k) {
      const BlsElement& el = g.ordered_elements[k];
      if (el.kind != BlsElement::Kind::road) continue;
      const RoadSegment& r = *s.road_by_id(el.id);
      Leg leg;
      leg.road_id = r.id;
      leg.length_m = r.length_m;
      leg.noise_sd_s = r.noise_sd_s;
      pos += r.length_m;
      if (k + 1 < g.ordered_elements.size()) {
        leg.to = {CriticalPointRef::Kind::intersection, g.ordered_elements[k + 1].id};
        layout.intersection_position_m[g.ordered_elements[k + 1].id - 1] = pos;
      } else {
        leg.to = {CriticalPointRef::Kind::stop, g.to_stop};
        if (g.to_stop != 1) layout.stop_position_m[g.to_stop - 1] = pos;
      }
      legs.push_back(leg);
    }
  }
  layout.loop_length_m = pos;
  return layout;
}

}  // namespace busim
