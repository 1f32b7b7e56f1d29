#include "busim/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "busim/engine.hpp"

namespace busim {

ExpectedModels build_expected_models(const Scenario& s) {
  ExpectedModels m;
  m.dwell = expected_dwell_fixed_point(s);
  m.map = build_virtual_map(s, m.dwell.dwell_s);
  m.n_stops = s.stop_count();
  m.per_boarder_s = s.dwell.per_boarder_s;

  m.segment_travel_s.resize(m.n_stops, 0.0);
  for (int from = 1; from <= m.n_stops; ++from) {
    double t = 0.0;
    for (const BlsElement& el : s.segment_from_stop(from).ordered_elements) {
      if (el.kind == BlsElement::Kind::road)
        t += s.road_by_id(el.id)->length_m / s.cruise_speed_mps;
      else
        t += expected_signal_delay(s.intersections[el.id - 1]);
    }
    m.segment_travel_s[from - 1] = t;
  }

  m.rate_per_min.reserve(s.stops.size());
  m.stop_actions.reserve(s.stops.size());
  m.stop_controllable.reserve(s.stops.size());
  for (const auto& e : s.stops) {
    m.rate_per_min.push_back(e.rate_per_min);
    m.stop_actions.push_back(s.action_set_of_stop(e.id).holding_times_s);
    m.stop_controllable.push_back(e.controllable);
  }
  return m;
}

LookaheadState lookahead_from_state(const SystemState& state) {
  LookaheadState look;
  look.target_stop = state.target_stop;
  look.activation_in_s = state.time_to_activation_s;
  look.latest_arrival_rel_s.reserve(state.latest_arrival_s.size());
  for (double t : state.latest_arrival_s)
    look.latest_arrival_rel_s.push_back(t - state.clock_s);
  return look;
}

int activated_bus(const LookaheadState& state) {
  int best = 0;
  for (int b = 1; b < state.bus_count(); ++b)
    if (state.activation_in_s[b] < state.activation_in_s[best]) best = b;
  return best;
}

double decide_no_control(const SystemState&) { return 0.0; }

double decide_tshs(const SystemState& state, const VirtualCoordinateMap& map,
                   double esh_s, std::span<const int> terminal_stops) {
  const int ctp_index = state.index_of_bus(state.ctp_bus_id);
  if (ctp_index < 0) throw ContractViolation("tshs: state has no CTP bus");

  const int stop = state.target_stop[ctp_index];
  if (std::find(terminal_stops.begin(), terminal_stops.end(), stop) == terminal_stops.end())
    return 0.0;

  const auto points = state.bus_points();
  const HeadwaySnapshot snap = headway_snapshot(state.clock_s, points, map);
  const double h = snap.headway_s[ctp_index];
  return h >= esh_s ? 0.0 : esh_s - h;
}

namespace {

double action_cost(const LookaheadState& state, const ExpectedModels& models,
                   double frozen_target_s) {
  const auto points = state.bus_points();
  const HeadwaySnapshot snap = headway_snapshot(0.0, points, models.map);
  double cost = 0.0;
  for (double h : snap.headway_s) {
    const double d = h - frozen_target_s;
    cost += d * d;
  }
  return cost;
}

}  // namespace

std::pair<LookaheadState, double> roll_forward_one_level(const LookaheadState& state,
                                                         int bus_index, double action_s,
                                                         const ExpectedModels& models,
                                                         double frozen_target_s) {
  if (bus_index != activated_bus(state))
    throw ContractViolation("roll_forward_one_level: bus is not the activation argmin");
  const int from = state.target_stop[bus_index];
  const auto& actions = models.stop_actions[from - 1];
  if (std::find(actions.begin(), actions.end(), action_s) == actions.end())
    throw ContractViolation("roll_forward_one_level: action not in the stop's action set");

  LookaheadState next = state;
  const int to = models.next_stop(from);
  const double arrival = state.activation_in_s[bus_index] + action_s +
                         models.segment_travel_s[from - 1];
  const double dwell =
      models.predicted_dwell_s(to, arrival - state.latest_arrival_rel_s[to - 1]);

  next.target_stop[bus_index] = to;
  next.activation_in_s[bus_index] = arrival + dwell;
  next.latest_arrival_rel_s[to - 1] = arrival;

  return {std::move(next), action_cost(next, models, frozen_target_s)};
}

namespace {

struct NslaSearch {
  const ExpectedModels& models;
  int stages;
  double gamma;
  double frozen_target;

  // Minimal discounted cost from level k given the current state; fills
  // path with the buses activated along the best branch.
  double best_value(const LookaheadState& state, int level, std::vector<int>* path) {
    const int bus = activated_bus(state);
    const auto& actions = models.stop_actions[state.target_stop[bus] - 1];

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_tail;
    for (double a : actions) {
      auto [next, cost] = roll_forward_one_level(state, bus, a, models, frozen_target);
      double value = cost;
      std::vector<int> tail;
      if (level < stages) value += gamma * best_value(next, level + 1, path ? &tail : nullptr);
      if (value < best) {
        best = value;
        best_tail = std::move(tail);
      }
    }
    if (path) {
      path->push_back(bus);
      path->insert(path->end(), best_tail.begin(), best_tail.end());
    }
    return best;
  }
};

}  // namespace

std::pair<double, DecisionRecord> decide_nsla(const SystemState& state, int stages,
                                              double gamma, const ExpectedModels& models) {
  if (stages < 1) throw ContractViolation("decide_nsla: stages must be >= 1");

  LookaheadState look = lookahead_from_state(state);
  const int bus = activated_bus(look);
  const int stop = look.target_stop[bus];

  DecisionRecord record;
  record.time_s = state.clock_s;
  record.bus_id = state.ctp_bus_id;
  record.stop_id = stop;
  record.activated_bus_ids.push_back(state.bus_id[bus]);

  // Non-controllable target stop: dispatch at once, no search.
  if (!models.stop_controllable[stop - 1]) {
    record.chosen_holding_s = 0.0;
    return {0.0, record};
  }

  const auto points = look.bus_points();
  const HeadwaySnapshot pre = headway_snapshot(state.clock_s, points, models.map);
  NslaSearch search{models, stages, gamma, pre.target_s};

  const auto& actions = models.stop_actions[stop - 1];
  double best = std::numeric_limits<double>::infinity();
  double best_action = 0.0;
  std::vector<int> best_path;
  for (double a : actions) {
    auto [next, cost] = roll_forward_one_level(look, bus, a, models, search.frozen_target);
    double value = cost;
    std::vector<int> tail;
    if (stages > 1) value += gamma * search.best_value(next, 2, &tail);
    record.action_costs.emplace_back(a, value);
    if (value < best) {  // actions ascend, so ties keep the smaller hold
      best = value;
      best_action = a;
      best_path = std::move(tail);
    }
  }

  record.chosen_holding_s = best_action;
  for (int b : best_path) record.activated_bus_ids.push_back(state.bus_id[b]);
  return {best_action, record};
}

double NoControlStrategy::decide(const SystemState& state, DecisionRecord* record) const {
  const double a = decide_no_control(state);
  if (record) {
    *record = DecisionRecord{};
    record->time_s = state.clock_s;
    record->bus_id = state.ctp_bus_id;
    record->chosen_holding_s = a;
  }
  return a;
}

double TshsStrategy::decide(const SystemState& state, DecisionRecord* record) const {
  const double a = decide_tshs(state, models_.map, models_.dwell.esh_s, terminal_stops_);
  if (record) {
    *record = DecisionRecord{};
    record->time_s = state.clock_s;
    record->bus_id = state.ctp_bus_id;
    record->chosen_holding_s = a;
  }
  return a;
}

double NslaStrategy::decide(const SystemState& state, DecisionRecord* record) const {
  auto [a, rec] = decide_nsla(state, stages_, gamma_, models_);
  if (record) *record = std::move(rec);
  return a;
}

std::unique_ptr<Strategy> make_strategy(const Scenario& s, const ExpectedModels& models) {
  if (s.control.strategy == "none") return std::make_unique<NoControlStrategy>();
  if (s.control.strategy == "tshs")
    return std::make_unique<TshsStrategy>(models, s.control.control_stops);
  if (s.control.strategy == "nsla")
    return std::make_unique<NslaStrategy>(models, s.control.stages, s.control.gamma);
  throw ValidationError("unknown strategy: " + s.control.strategy);
}

}  // namespace busim
