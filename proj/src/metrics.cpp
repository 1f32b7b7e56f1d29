#include "busim/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace busim {

namespace {

double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

// Sample standard deviation (n-1 denominator); 0 when fewer than two values.
double sd_of(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

}  // namespace

StabilityIndex stability_index(std::span<const double> sigma_per_ctp) {
  if (sigma_per_ctp.empty())
    throw std::invalid_argument("stability_index: empty sigma stream");
  StabilityIndex out;
  out.mean_s = mean_of(sigma_per_ctp);
  if (sigma_per_ctp.size() >= 2) out.sd_s = sd_of(sigma_per_ctp, out.mean_s);
  return out;
}

HoldingStats holding_stats(std::span<const double> holding_per_ctp) {
  HoldingStats out;
  if (holding_per_ctp.empty()) return out;
  for (double a : holding_per_ctp) out.total_s += a;
  out.mean_s = out.total_s / static_cast<double>(holding_per_ctp.size());
  out.sd_s = sd_of(holding_per_ctp, out.mean_s);
  return out;
}

PassengerStats passenger_stats(std::span<const Passenger> passengers,
                               double observation_period_s) {
  std::vector<double> wait, ride, travel;
  for (const Passenger& p : passengers) {
    if (!p.alighted_at_s || *p.alighted_at_s > observation_period_s) continue;
    wait.push_back(*p.boarded_at_s - p.created_at_s);
    ride.push_back(*p.alighted_at_s - *p.boarded_at_s);
    travel.push_back(*p.alighted_at_s - p.created_at_s);
  }
  PassengerStats out;
  out.completed = static_cast<long>(wait.size());
  if (wait.empty()) return out;
  out.wait_mean_s = mean_of(wait);
  out.wait_sd_s = sd_of(wait, out.wait_mean_s);
  out.ride_mean_s = mean_of(ride);
  out.ride_sd_s = sd_of(ride, out.ride_mean_s);
  out.travel_mean_s = mean_of(travel);
  out.travel_sd_s = sd_of(travel, out.travel_mean_s);
  return out;
}

bool detect_bunching(std::span<const double> min_headway_per_ctp, double esh_s,
                     const BunchingParams& params) {
  const double threshold = params.threshold_frac * esh_s;
  int run = 0;
  for (double h : min_headway_per_ctp) {
    run = h < threshold ? run + 1 : 0;
    if (run >= params.window_ctps) return true;
  }
  return false;
}

ReplicationMetrics compute_metrics(const ReplicationResult& result, double esh_s,
                                   const BunchingParams& params,
                                   double observation_period_s) {
  ReplicationMetrics m;
  m.n_T = static_cast<long>(result.ctps.size());

  std::vector<double> sigma, holding, min_h, decision;
  sigma.reserve(result.ctps.size());
  holding.reserve(result.ctps.size());
  min_h.reserve(result.ctps.size());
  decision.reserve(result.ctps.size());
  for (const CtpRecord& c : result.ctps) {
    sigma.push_back(c.sigma_s);
    holding.push_back(c.holding_s);
    min_h.push_back(c.min_headway_s);
    decision.push_back(c.decision_seconds);
  }

  if (!sigma.empty()) {
    const StabilityIndex st = stability_index(sigma);
    m.c_H = st.mean_s;
    m.sigma_c = st.sd_s.value_or(0.0);
  }
  const HoldingStats hs = holding_stats(holding);
  m.a_sum = hs.total_s;
  m.a_mean = hs.mean_s;
  m.a_sd = hs.sd_s;
  m.bunched = detect_bunching(min_h, esh_s, params);

  const PassengerStats ps = passenger_stats(result.passengers, observation_period_s);
  m.n_P = ps.completed;
  m.wait_mean_s = ps.wait_mean_s;
  m.wait_sd_s = ps.wait_sd_s;
  m.ride_mean_s = ps.ride_mean_s;
  m.ride_sd_s = ps.ride_sd_s;
  m.travel_mean_s = ps.travel_mean_s;
  m.travel_sd_s = ps.travel_sd_s;

  m.sim_seconds = result.wall_seconds;
  m.decision_seconds_mean = decision.empty() ? 0.0 : mean_of(decision);
  return m;
}

SummaryRow aggregate(std::span<const ReplicationMetrics> replications) {
  if (replications.empty())
    throw std::invalid_argument("aggregate: no replications");
  SummaryRow row;
  const double n = static_cast<double>(replications.size());
  for (const ReplicationMetrics& m : replications) {
    row.c_H += m.c_H;
    row.sigma_c += m.sigma_c;
    row.n_T += static_cast<double>(m.n_T);
    row.a_sum += m.a_sum;
    row.a_mean += m.a_mean;
    row.a_sd += m.a_sd;
    row.bunch_fraction += m.bunched ? 1.0 : 0.0;
    row.n_P += static_cast<double>(m.n_P);
    row.wait_mean_s += m.wait_mean_s;
    row.wait_sd_s += m.wait_sd_s;
    row.ride_mean_s += m.ride_mean_s;
    row.ride_sd_s += m.ride_sd_s;
    row.travel_mean_s += m.travel_mean_s;
    row.travel_sd_s += m.travel_sd_s;
    row.sim_seconds += m.sim_seconds;
    row.decision_seconds_mean += m.decision_seconds_mean;
  }
  row.c_H /= n;
  row.sigma_c /= n;
  row.n_T /= n;
  row.a_sum /= n;
  row.a_mean /= n;
  row.a_sd /= n;
  row.bunch_fraction /= n;
  row.n_P /= n;
  row.wait_mean_s /= n;
  row.wait_sd_s /= n;
  row.ride_mean_s /= n;
  row.ride_sd_s /= n;
  row.travel_mean_s /= n;
  row.travel_sd_s /= n;
  row.sim_seconds /= n;
  row.decision_seconds_mean /= n;
  return row;
}

}  // namespace busim
