// control.hpp - the strategy layer. A uniform decision interface invoked at
// each CTP, with three implementations: no control, terminal station holding
// (TSHS), and the N-stage look-ahead strategy (nSLA) that rolls the system
// forward on expected values and minimizes discounted action cost.
#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "busim/headway.hpp"
#include "busim/scenario.hpp"
#include "busim/state.hpp"

namespace busim {

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Everything the look-ahead needs that is fixed per scenario: the virtual
// map, expected segment traversal times (cruise plus expected signal delays),
// arrival rates and resolved per-stop action sets. Immutable and shared.
struct ExpectedModels {
  VirtualCoordinateMap map;
  ExpectedDwellTable dwell;
  std::vector<double> segment_travel_s;           // per from-stop index
  std::vector<double> rate_per_min;               // per stop index
  std::vector<std::vector<double>> stop_actions;  // per stop index; {0} if non-control
  std::vector<bool> stop_controllable;
  double per_boarder_s = 1.0;
  int n_stops = 0;

  int next_stop(int stop_id) const { return stop_id % n_stops + 1; }

  // Predicted boarder dwell from the gap between a predicted arrival and the
  // stop's latest recorded arrival; negative gaps clamp to zero.
  double predicted_dwell_s(int stop_id, double arrival_gap_s) const {
    const double gap = arrival_gap_s > 0.0 ? arrival_gap_s : 0.0;
    return per_boarder_s * rate_per_min[stop_id - 1] * gap / 60.0;
  }
};

ExpectedModels build_expected_models(const Scenario& s);

// Roll-forward state, all times relative to the decision instant. Latest
// arrivals may be negative (they happened before the decision).
struct LookaheadState {
  std::vector<int> target_stop;              // e_b, per bus index
  std::vector<double> activation_in_s;       // t_b^D, per bus index
  std::vector<double> latest_arrival_rel_s;  // t_e^la, per stop index

  int bus_count() const { return static_cast<int>(target_stop.size()); }

  std::vector<BusPoint> bus_points() const {
    std::vector<BusPoint> points(target_stop.size());
    for (std::size_t b = 0; b < target_stop.size(); ++b)
      points[b] = {target_stop[b], activation_in_s[b]};
    return points;
  }
};

LookaheadState lookahead_from_state(const SystemState& state);

// Index of the next bus to activate: argmin of activation_in_s, ties to the
// lower index.
int activated_bus(const LookaheadState& state);

struct DecisionRecord {
  double time_s = 0.0;
  int bus_id = 0;
  int stop_id = 0;
  double chosen_holding_s = 0.0;
  // (a, discounted cost of taking a at the first level), in action order.
  std::vector<std::pair<double, double>> action_costs;
  std::vector<int> activated_bus_ids;  // b^1..b^N along the optimal path
};

double decide_no_control(const SystemState& state);

// Terminal station holding: outside terminal stops return 0; at a terminal,
// top a short forward headway up to the expected system headway. Continuous,
// not restricted to the stop's action set.
double decide_tshs(const SystemState& state, const VirtualCoordinateMap& map,
                   double esh_s, std::span<const int> terminal_stops);

// One level of the expected-value roll-forward: advance the activated bus to
// its next stop under action_s and return the new state together with the
// action cost  c(a) = sum_b (h_b - frozen_target_s)^2  evaluated on the
// post-assignment state. Throws ContractViolation if bus_index is not the
// activation argmin or action_s is not in the target stop's action set.
std::pair<LookaheadState, double> roll_forward_one_level(const LookaheadState& state,
                                                         int bus_index, double action_s,
                                                         const ExpectedModels& models,
                                                         double frozen_target_s);

// The N-stage look-ahead decision at a CTP snapshot. Returns the chosen
// holding time and the full decision record. Pure: the snapshot is never
// mutated and identical inputs give identical records.
std::pair<double, DecisionRecord> decide_nsla(const SystemState& state, int stages,
                                              double gamma, const ExpectedModels& models);

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;
  // Continuous strategies may return any non-negative hold; the rest must
  // pick from the deciding stop's action set.
  virtual bool continuous() const { return false; }
  virtual double decide(const SystemState& state, DecisionRecord* record) const = 0;
};

class NoControlStrategy final : public Strategy {
 public:
  std::string name() const override { return "none"; }
  double decide(const SystemState& state, DecisionRecord* record) const override;
};

class TshsStrategy final : public Strategy {
 public:
  TshsStrategy(const ExpectedModels& models, std::vector<int> terminal_stops)
      : models_(models), terminal_stops_(std::move(terminal_stops)) {}
  std::string name() const override { return "tshs"; }
  bool continuous() const override { return true; }
  double decide(const SystemState& state, DecisionRecord* record) const override;

 private:
  const ExpectedModels& models_;
  std::vector<int> terminal_stops_;
};

class NslaStrategy final : public Strategy {
 public:
  NslaStrategy(const ExpectedModels& models, int stages, double gamma)
      : models_(models), stages_(stages), gamma_(gamma) {}
  std::string name() const override { return std::to_string(stages_) + "sla"; }
  double decide(const SystemState& state, DecisionRecord* record) const override;

 private:
  const ExpectedModels& models_;
  int stages_;
  double gamma_;
};

// Builds the strategy named by scenario.control. For "tshs" the control_stops
// list is used as the terminal stops.
std::unique_ptr<Strategy> make_strategy(const Scenario& s, const ExpectedModels& models);

}  // namespace busim
