// engine.hpp - the discrete-event simulation: bus motion over road segments
// and signalized intersections, Monte-Carlo passenger demand, dwells and
// holds, and the stream of critical time points the strategies decide at.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "busim/control.hpp"
#include "busim/rng.hpp"
#include "busim/scenario.hpp"
#include "busim/state.hpp"

namespace busim {

struct Passenger {
  std::int64_t id = 0;
  int origin_stop = 0;
  int destination_stop = 0;
  double created_at_s = 0.0;
  std::optional<double> boarded_at_s;
  std::optional<double> alighted_at_s;
};

enum class EventKind {
  arrive_stop,
  depart_stop,
  arrive_intersection,
  depart_intersection,
  hold_start,
  hold_end,
};

const char* to_string(EventKind kind);

struct EventRecord {
  double time_s = 0.0;
  int bus_id = 0;
  EventKind kind = EventKind::arrive_stop;
  CriticalPointRef location;
  int lap = 0;  // completed loops, for trajectory unwrapping
};

struct EventLog {
  std::vector<EventRecord> records;
};

std::string serialize_event_log(const EventLog& log);

// One record per arrive/depart event: time_s, bus_id, cumulative_distance_m
// (unwrapped by lap * loop length), tab separated, in time order.
void write_trajectory(std::ostream& out, const EventLog& log, const LineLayout& layout);

// --- elementary stochastic pieces -------------------------------------------

// Expected travel plus a normal noise draw, clamped below at a tenth of the
// expected time so durations stay positive.
double sample_travel_time(const RoadSegment& road, double cruise_speed_mps, RngStream& rng);

// Remaining red time at the arrival instant, 0 when green. The initial phase
// occupies [0, initial_phase_remaining_s), then phases alternate with their
// full durations.
double signal_delay_at(const Intersection& x, double arrival_time_s);

// red^2 / (2 * cycle).
double expected_signal_delay(const Intersection& x);

// Poisson arrivals over [t1, t2) with destinations drawn from the stop's
// series (the n-th downstream stop, wrapping circularly).
std::vector<Passenger> generate_passengers(const Stop& stop, const DestinationSeries& series,
                                           int n_stops, double t1, double t2,
                                           RngStream& arrivals_rng, RngStream& dest_rng,
                                           std::int64_t first_id = 0);

double dwell_time(int boarders, int alighters, const DwellParams& params);

// --- replication -------------------------------------------------------------

struct CtpRecord {
  double time_s = 0.0;
  int bus_id = 0;
  int stop_id = 0;
  double sigma_s = 0.0;         // pseudo standard deviation of headways
  double min_headway_s = 0.0;
  double holding_s = 0.0;       // chosen action (0 at non-control CTPs)
  double decision_seconds = 0.0;
  std::vector<double> headway_s;
};

struct ReplicationResult {
  EventLog log;
  std::vector<CtpRecord> ctps;
  std::vector<DecisionRecord> decisions;
  std::vector<Passenger> passengers;
  double wall_seconds = 0.0;
};

class Simulation {
 public:
  Simulation(const Scenario& scenario, const ExpectedModels& models,
             std::uint64_t master_seed, std::uint64_t replication_index,
             double observation_period_s);
  ~Simulation();

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  struct Step {
    SystemState state;       // snapshot before the hold is applied
    double holding_s = 0.0;
    double decision_seconds = 0.0;
    DecisionRecord decision;
  };

  // Advances events until the next bus finishes boarding and alighting,
  // invokes the strategy and applies the hold. Returns nullopt once the
  // observation period is exhausted. Throws ContractViolation when the
  // strategy returns a hold outside the stop's action set.
  std::optional<Step> step_to_next_ctp(const Strategy& strategy);

  // Draws the remaining passenger arrivals up to the observation horizon and
  // hands over the run artifacts. Call once, after stepping is done.
  ReplicationResult finish();

  double clock_s() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Runs a full replication: steps to every CTP before the observation period
// ends, recording headway snapshots, chosen holds and decision timings.
// Deterministic: identical (scenario, strategy, seeds) give identical output.
ReplicationResult run_replication(const Scenario& scenario, const ExpectedModels& models,
                                  const Strategy& strategy, std::uint64_t master_seed,
                                  std::uint64_t replication_index,
                                  double observation_period_s);

}  // namespace busim
