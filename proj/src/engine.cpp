#include "busim/engine.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <queue>

namespace busim {

namespace {

constexpr double kActivationEps = 1e-6;  // keeps the CTP bus the unique argmin

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::arrive_stop: return "arrive_stop";
    case EventKind::depart_stop: return "depart_stop";
    case EventKind::arrive_intersection: return "arrive_intersection";
    case EventKind::depart_intersection: return "depart_intersection";
    case EventKind::hold_start: return "hold_start";
    case EventKind::hold_end: return "hold_end";
  }
  return "?";
}

std::string serialize_event_log(const EventLog& log) {
  std::string out;
  out.reserve(log.records.size() * 48);
  char line[128];
  for (const EventRecord& r : log.records) {
    const char tag = r.location.kind == CriticalPointRef::Kind::stop ? 's' : 'i';
    std::snprintf(line, sizeof(line), "%.9f\t%d\t%s\t%c%d\t%d\n", r.time_s, r.bus_id,
                  to_string(r.kind), tag, r.location.id, r.lap);
    out += line;
  }
  return out;
}

void write_trajectory(std::ostream& out, const EventLog& log, const LineLayout& layout) {
  char line[96];
  for (const EventRecord& r : log.records) {
    switch (r.kind) {
      case EventKind::arrive_stop:
      case EventKind::depart_stop:
      case EventKind::arrive_intersection:
      case EventKind::depart_intersection:
        break;
      default:
        continue;
    }
    const double distance = r.lap * layout.loop_length_m + layout.position_of(r.location);
    std::snprintf(line, sizeof(line), "%.6f\t%d\t%.3f\n", r.time_s, r.bus_id, distance);
    out << line;
  }
}

double sample_travel_time(const RoadSegment& road, double cruise_speed_mps, RngStream& rng) {
  const double mean = road.length_m / cruise_speed_mps;
  const double draw = rng.normal(mean, road.noise_sd_s);
  return std::max(draw, 0.1 * mean);
}

double signal_delay_at(const Intersection& x, double arrival_time_s) {
  const double initial = x.initial_phase_remaining_s;
  if (arrival_time_s < initial)
    return x.initial_phase == SignalPhase::red ? initial - arrival_time_s : 0.0;

  // After the initial phase the signal alternates with full durations,
  // starting with the opposite phase.
  const double u = std::fmod(arrival_time_s - initial, x.cycle_s);
  const bool first_is_red = x.initial_phase == SignalPhase::green;
  const double first = first_is_red ? x.red_s : x.green_s;
  if (u < first) return first_is_red ? first - u : 0.0;
  return first_is_red ? 0.0 : x.cycle_s - u;
}

double expected_signal_delay(const Intersection& x) {
  return x.red_s * x.red_s / (2.0 * x.cycle_s);
}

std::vector<Passenger> generate_passengers(const Stop& stop, const DestinationSeries& series,
                                           int n_stops, double t1, double t2,
                                           RngStream& arrivals_rng, RngStream& dest_rng,
                                           std::int64_t first_id) {
  std::vector<Passenger> out;
  if (stop.rate_per_min <= 0.0) return out;
  const double rate_per_s = stop.rate_per_min / 60.0;
  double t = t1 + arrivals_rng.exponential(rate_per_s);
  while (t < t2) {
    Passenger p;
    p.id = first_id++;
    p.origin_stop = stop.id;
    const int offset = dest_rng.discrete(series.probabilities) + 1;
    p.destination_stop = (stop.id - 1 + offset) % n_stops + 1;
    p.created_at_s = t;
    out.push_back(p);
    t += arrivals_rng.exponential(rate_per_s);
  }
  return out;
}

double dwell_time(int boarders, int alighters, const DwellParams& params) {
  return std::max(params.per_boarder_s * boarders, params.per_alighter_s * alighters);
}

// --- simulation internals ----------------------------------------------------

namespace {

enum class EvType { arrive, service_done, depart };

struct Ev {
  double time;
  int bus;  // bus index; buses are sorted by id so index order is id order
  std::uint64_t seq;
  EvType type;
};

struct EvLater {
  bool operator()(const Ev& a, const Ev& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.bus != b.bus) return a.bus > b.bus;
    return a.seq > b.seq;
  }
};

// Occupancy of one critical point. A bus that would reach an occupied point
// queues here and is released one second after its leader departs.
struct PointRuntime {
  bool occupied = false;
  std::deque<int> blocked;
};

struct StopRuntime {
  PointRuntime point;
  std::deque<std::int64_t> waiting;  // passenger indices, FIFO
  double next_arrival_s = std::numeric_limits<double>::infinity();
  double latest_arrival_s = 0.0;
  RngStream arrivals;
  RngStream destinations;
};

struct BusRuntime {
  int id = 0;
  int capacity = 0;
  std::vector<std::vector<std::int64_t>> onboard_by_dest;  // per stop index
  int onboard_count = 0;

  int target_stop = 0;             // e_b: stop the bus dwells at or heads to
  double next_activation_s = 0.0;  // predicted absolute time of the next CTP
  int lap = 0;

  enum class Pos { dwelling, held, en_route } pos = Pos::dwelling;
  int route_from_stop = 0;      // legs being traversed while en_route
  std::size_t leg_index = 0;
  double applied_hold_s = 0.0;  // hold in progress, for hold_end logging
  RngStream noise;
};

}  // namespace

struct Simulation::Impl {
  const Scenario& scenario;
  const ExpectedModels& models;
  LineLayout layout;
  double horizon_s;
  double clock = 0.0;
  bool finished = false;
  std::uint64_t next_seq = 0;

  std::priority_queue<Ev, std::vector<Ev>, EvLater> events;
  std::vector<StopRuntime> stops;
  std::vector<PointRuntime> intersections;
  std::vector<BusRuntime> buses;
  std::vector<Passenger> passengers;
  EventLog log;

  // Expected time from starting leg j of a segment (exclusive of the leg
  // itself) to arriving at the segment's target stop, and the expected wait
  // at each leg's endpoint. Time-to-activation predictions are refined with
  // realized draws as legs and signal delays resolve.
  std::vector<std::vector<double>> leg_tail_s;  // [stop-1][j], size legs+1
  std::vector<std::vector<double>> leg_wait_s;  // [stop-1][j]

  Impl(const Scenario& sc, const ExpectedModels& mo, std::uint64_t master_seed,
       std::uint64_t replication, double horizon)
      : scenario(sc), models(mo), layout(build_layout(sc)), horizon_s(horizon) {
    leg_tail_s.resize(sc.stop_count());
    leg_wait_s.resize(sc.stop_count());
    for (int e = 1; e <= sc.stop_count(); ++e) {
      const auto& legs = layout.legs_from_stop[e - 1];
      auto& tail = leg_tail_s[e - 1];
      auto& wait = leg_wait_s[e - 1];
      tail.assign(legs.size() + 1, 0.0);
      wait.assign(legs.size(), 0.0);
      for (std::size_t j = legs.size(); j-- > 0;) {
        if (legs[j].to.kind == CriticalPointRef::Kind::intersection)
          wait[j] = expected_signal_delay(sc.intersections[legs[j].to.id - 1]);
        tail[j] = legs[j].length_m / sc.cruise_speed_mps + wait[j] + tail[j + 1];
      }
    }
    stops.resize(sc.stop_count());
    for (int e = 1; e <= sc.stop_count(); ++e) {
      StopRuntime& sr = stops[e - 1];
      sr.arrivals = make_stream(master_seed, replication, "pax-arrivals", e);
      sr.destinations = make_stream(master_seed, replication, "pax-destinations", e);
      sr.latest_arrival_s = -mo.dwell.esh_s;  // one expected headway in the past
      const double rate = sc.stop(e).rate_per_min / 60.0;
      if (rate > 0.0) sr.next_arrival_s = sr.arrivals.exponential(rate);
    }

    intersections.resize(sc.intersections.size());

    buses.reserve(sc.buses.size());
    for (std::size_t i = 0; i < sc.buses.size(); ++i) {
      const BusSpec& spec = sc.buses[i];
      BusRuntime br;
      br.id = spec.id;
      br.capacity = spec.capacity;
      br.onboard_by_dest.resize(sc.stop_count());
      br.target_stop = spec.initial_target_stop;
      br.next_activation_s = spec.rtba_s;
      br.noise = make_stream(master_seed, replication, "travel-noise", spec.id);
      buses.push_back(std::move(br));
    }

    if (horizon_s <= 0.0) {
      finished = true;
      return;
    }

    // Buses start dwelling at their initial target stops with empty loads;
    // the RTBA is the time until their first departure decision.
    for (std::size_t i = 0; i < buses.size(); ++i) {
      BusRuntime& br = buses[i];
      stops[br.target_stop - 1].point.occupied = true;
      stops[br.target_stop - 1].latest_arrival_s = 0.0;
      record(0.0, br, EventKind::arrive_stop,
             {CriticalPointRef::Kind::stop, br.target_stop});
      schedule(br.next_activation_s, static_cast<int>(i), EvType::service_done);
    }
  }

  void schedule(double t, int bus, EvType type) { events.push({t, bus, next_seq++, type}); }

  void record(double t, const BusRuntime& br, EventKind kind, CriticalPointRef where) {
    log.records.push_back({t, br.id, kind, where, br.lap});
  }

  // Draw passenger arrivals at stop e up to (but excluding) the given time,
  // clamped to the observation horizon.
  void materialize_arrivals(int stop_id, double upto) {
    StopRuntime& sr = stops[stop_id - 1];
    const Stop& spec = scenario.stop(stop_id);
    if (spec.rate_per_min <= 0.0) return;
    const double rate = spec.rate_per_min / 60.0;
    const double limit = std::min(upto, horizon_s);
    const DestinationSeries& series = *scenario.series_by_id(spec.destination_series_id);
    while (sr.next_arrival_s < limit) {
      Passenger p;
      p.id = static_cast<std::int64_t>(passengers.size());
      p.origin_stop = stop_id;
      const int offset = sr.destinations.discrete(series.probabilities) + 1;
      p.destination_stop = (stop_id - 1 + offset) % scenario.stop_count() + 1;
      p.created_at_s = sr.next_arrival_s;
      sr.waiting.push_back(p.id);
      passengers.push_back(p);
      sr.next_arrival_s += sr.arrivals.exponential(rate);
    }
  }

  int board_waiting(BusRuntime& br, int stop_id, double t) {
    StopRuntime& sr = stops[stop_id - 1];
    int boarders = 0;
    while (!sr.waiting.empty() && br.onboard_count < br.capacity) {
      const std::int64_t pid = sr.waiting.front();
      sr.waiting.pop_front();
      Passenger& p = passengers[pid];
      p.boarded_at_s = t;
      br.onboard_by_dest[p.destination_stop - 1].push_back(pid);
      ++br.onboard_count;
      ++boarders;
    }
    return boarders;
  }

  PointRuntime& point_runtime(const CriticalPointRef& p) {
    return p.kind == CriticalPointRef::Kind::stop ? stops[p.id - 1].point
                                                  : intersections[p.id - 1];
  }

  const Leg& current_leg(const BusRuntime& br) const {
    return layout.legs_from_stop[br.route_from_stop - 1][br.leg_index];
  }

  // next_activation = predicted arrival at the target stop plus the boarder
  // dwell expected from the arrival gap there.
  void predict_activation(BusRuntime& br, double predicted_arrival) {
    const int target = br.target_stop;
    br.next_activation_s =
        predicted_arrival + models.predicted_dwell_s(
                                target, predicted_arrival - stops[target - 1].latest_arrival_s);
  }

  void start_leg(BusRuntime& br, int bus, double t) {
    const Leg& leg = current_leg(br);
    RoadSegment road{leg.road_id, leg.length_m, leg.noise_sd_s};
    const double travel = sample_travel_time(road, scenario.cruise_speed_mps, br.noise);
    const std::size_t j = br.leg_index;
    predict_activation(br, t + travel + leg_wait_s[br.route_from_stop - 1][j] +
                               leg_tail_s[br.route_from_stop - 1][j + 1]);
    schedule(t + travel, bus, EvType::arrive);
  }

  void handle_arrive(int bus, double t) {
    BusRuntime& br = buses[bus];
    const CriticalPointRef where = current_leg(br).to;
    PointRuntime& pr = point_runtime(where);

    if (scenario.no_overtaking) {
      if (!pr.occupied && !pr.blocked.empty() && pr.blocked.front() == bus) {
        pr.blocked.pop_front();  // queued earlier, released by the leader
      } else if (pr.occupied || !pr.blocked.empty()) {
        pr.blocked.push_back(bus);  // wait for the leader to depart
        return;
      }
    }
    pr.occupied = true;

    if (where.kind == CriticalPointRef::Kind::intersection) {
      record(t, br, EventKind::arrive_intersection, where);
      const double delay = signal_delay_at(scenario.intersections[where.id - 1], t);
      predict_activation(br, t + delay + leg_tail_s[br.route_from_stop - 1][br.leg_index + 1]);
      schedule(t + delay, bus, EvType::depart);
      return;
    }

    const int stop_id = where.id;
    if (stop_id == 1) ++br.lap;
    record(t, br, EventKind::arrive_stop, where);
    stops[stop_id - 1].latest_arrival_s = t;

    auto& alight_bucket = br.onboard_by_dest[stop_id - 1];
    const int alighters = static_cast<int>(alight_bucket.size());
    for (std::int64_t pid : alight_bucket) passengers[pid].alighted_at_s = t;
    br.onboard_count -= alighters;
    alight_bucket.clear();

    materialize_arrivals(stop_id, t);
    const int boarders = board_waiting(br, stop_id, t);

    const double dwell = dwell_time(boarders, alighters, scenario.dwell);
    br.pos = BusRuntime::Pos::dwelling;
    br.target_stop = stop_id;
    br.next_activation_s = t + dwell;
    schedule(t + dwell, bus, EvType::service_done);
  }

  void handle_depart(int bus, double t) {
    BusRuntime& br = buses[bus];

    // An activated bus already targets the next stop but still stands at the
    // previous one.
    if (br.pos == BusRuntime::Pos::held) {
      const int n = scenario.stop_count();
      const int standing_at = (br.target_stop + n - 2) % n + 1;
      depart_from_stop(br, bus, standing_at, t);
      return;
    }

    // Leaving an intersection: resume the current bus line segment.
    const CriticalPointRef where = current_leg(br).to;
    record(t, br, EventKind::depart_intersection, where);
    release_point(point_runtime(where), t);
    ++br.leg_index;
    start_leg(br, bus, t);
  }

  void depart_from_stop(BusRuntime& br, int bus, int stop_id, double t) {
    const CriticalPointRef where{CriticalPointRef::Kind::stop, stop_id};
    if (br.applied_hold_s > 0.0) {
      record(t, br, EventKind::hold_end, where);
      br.applied_hold_s = 0.0;
    }
    if (scenario.dwell.mode == DwellParams::Mode::board_at_release) {
      materialize_arrivals(stop_id, t);
      board_waiting(br, stop_id, t);  // latecomers board at release, no extra dwell
    }
    record(t, br, EventKind::depart_stop, where);
    release_point(stops[stop_id - 1].point, t);

    br.pos = BusRuntime::Pos::en_route;
    br.route_from_stop = stop_id;
    br.leg_index = 0;
    start_leg(br, bus, t);
  }

  void release_point(PointRuntime& pr, double t) {
    pr.occupied = false;
    if (!pr.blocked.empty())
      schedule(t + 1.0, pr.blocked.front(), EvType::arrive);  // no overtaking
  }

  SystemState snapshot(int ctp_bus, double t) const {
    SystemState st;
    st.clock_s = t;
    st.ctp_bus_id = buses[ctp_bus].id;
    st.bus_id.resize(buses.size());
    st.target_stop.resize(buses.size());
    st.time_to_activation_s.resize(buses.size());
    for (std::size_t b = 0; b < buses.size(); ++b) {
      st.bus_id[b] = buses[b].id;
      st.target_stop[b] = buses[b].target_stop;
      st.time_to_activation_s[b] =
          static_cast<int>(b) == ctp_bus
              ? 0.0
              : std::max(buses[b].next_activation_s - t, kActivationEps);
    }
    st.latest_arrival_s.reserve(stops.size());
    for (const StopRuntime& sr : stops) st.latest_arrival_s.push_back(sr.latest_arrival_s);
    return st;
  }

  std::optional<Simulation::Step> step(const Strategy& strategy) {
    while (!finished && !events.empty()) {
      const Ev ev = events.top();
      events.pop();
      clock = ev.time;
      switch (ev.type) {
        case EvType::arrive:
          handle_arrive(ev.bus, ev.time);
          break;
        case EvType::depart:
          handle_depart(ev.bus, ev.time);
          break;
        case EvType::service_done: {
          if (ev.time >= horizon_s) {
            finished = true;
            return std::nullopt;
          }
          return decide_and_hold(ev.bus, ev.time, strategy);
        }
      }
    }
    return std::nullopt;
  }

  Simulation::Step decide_and_hold(int bus, double t, const Strategy& strategy) {
    BusRuntime& br = buses[bus];
    const int stop_id = br.target_stop;

    Simulation::Step step;
    step.state = snapshot(bus, t);

    const double t0 = now_seconds();
    const double hold = strategy.decide(step.state, &step.decision);
    step.decision_seconds = now_seconds() - t0;
    step.holding_s = hold;

    if (!(hold >= 0.0) || !std::isfinite(hold))
      throw ContractViolation("strategy returned an invalid holding time");
    if (!strategy.continuous()) {
      const auto& actions = models.stop_actions[stop_id - 1];
      if (std::find(actions.begin(), actions.end(), hold) == actions.end())
        throw ContractViolation("strategy returned a holding time outside the action set");
    }

    const CriticalPointRef where{CriticalPointRef::Kind::stop, stop_id};
    if (hold > 0.0) {
      record(t, br, EventKind::hold_start, where);
      br.applied_hold_s = hold;
    }

    // Activation: the target advances to the next stop and the next CTP is
    // predicted from expected travel and the boarder dwell model.
    const int next = scenario.next_stop_id(stop_id);
    const double arrival = t + hold + models.segment_travel_s[stop_id - 1];
    br.target_stop = next;
    br.next_activation_s =
        arrival +
        models.predicted_dwell_s(next, arrival - stops[next - 1].latest_arrival_s);
    br.pos = BusRuntime::Pos::held;
    schedule(t + hold, bus, EvType::depart);
    return step;
  }
};

Simulation::Simulation(const Scenario& scenario, const ExpectedModels& models,
                       std::uint64_t master_seed, std::uint64_t replication_index,
                       double observation_period_s)
    : impl_(std::make_unique<Impl>(scenario, models, master_seed, replication_index,
                                   observation_period_s)) {}

Simulation::~Simulation() = default;

std::optional<Simulation::Step> Simulation::step_to_next_ctp(const Strategy& strategy) {
  return impl_->step(strategy);
}

double Simulation::clock_s() const { return impl_->clock; }

ReplicationResult Simulation::finish() {
  // Complete the seed-determined passenger population regardless of how far
  // the buses got.
  for (int e = 1; e <= impl_->scenario.stop_count(); ++e)
    impl_->materialize_arrivals(e, impl_->horizon_s);

  ReplicationResult result;
  result.log = std::move(impl_->log);
  result.passengers = std::move(impl_->passengers);
  return result;
}

ReplicationResult run_replication(const Scenario& scenario, const ExpectedModels& models,
                                  const Strategy& strategy, std::uint64_t master_seed,
                                  std::uint64_t replication_index,
                                  double observation_period_s) {
  const double wall0 = now_seconds();
  Simulation sim(scenario, models, master_seed, replication_index, observation_period_s);

  std::vector<CtpRecord> ctps;
  std::vector<DecisionRecord> decisions;
  while (auto step = sim.step_to_next_ctp(strategy)) {
    const HeadwaySnapshot snap =
        headway_snapshot(step->state.clock_s, step->state.bus_points(), models.map);
    CtpRecord rec;
    rec.time_s = step->state.clock_s;
    rec.bus_id = step->state.ctp_bus_id;
    rec.stop_id = step->state.target_stop[step->state.index_of_bus(step->state.ctp_bus_id)];
    rec.sigma_s = snap.sigma_s;
    rec.min_headway_s = snap.min_headway_s();
    rec.holding_s = step->holding_s;
    rec.decision_seconds = step->decision_seconds;
    rec.headway_s = snap.headway_s;
    ctps.push_back(std::move(rec));
    decisions.push_back(std::move(step->decision));
  }

  ReplicationResult result = sim.finish();
  result.ctps = std::move(ctps);
  result.decisions = std::move(decisions);
  result.wall_seconds = now_seconds() - wall0;
  return result;
}

}  // namespace busim
