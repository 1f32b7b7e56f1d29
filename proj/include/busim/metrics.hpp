// metrics.hpp - turns raw replication streams into the reported quantities:
// stability index and its deviation, holding effort, passenger times, the
// bunching flag, and cross-replication aggregates.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "busim/engine.hpp"
#include "busim/scenario.hpp"

namespace busim {

struct StabilityIndex {
  double mean_s = 0.0;              // c_H
  std::optional<double> sd_s;       // sigma_c, absent for a single-CTP stream
};

// Mean of the per-CTP headway deviations; the sd uses the n-1 denominator.
// Throws std::invalid_argument on an empty stream.
StabilityIndex stability_index(std::span<const double> sigma_per_ctp);

struct HoldingStats {
  double total_s = 0.0;  // a_sum
  double mean_s = 0.0;   // a_mean = a_sum / n_CTP
  double sd_s = 0.0;     // n-1 denominator; 0 when undefined
};

// One entry per CTP, zeros included for non-control CTPs.
HoldingStats holding_stats(std::span<const double> holding_per_ctp);

struct PassengerStats {
  long completed = 0;  // n_P: passengers who alighted within the period
  double wait_mean_s = 0.0, wait_sd_s = 0.0;
  double ride_mean_s = 0.0, ride_sd_s = 0.0;
  double travel_mean_s = 0.0, travel_sd_s = 0.0;
};

PassengerStats passenger_stats(std::span<const Passenger> passengers,
                               double observation_period_s);

// True iff the minimum headway stays under threshold_frac * esh for
// window_ctps consecutive CTP snapshots.
bool detect_bunching(std::span<const double> min_headway_per_ctp, double esh_s,
                     const BunchingParams& params);

struct ReplicationMetrics {
  double c_H = 0.0;
  double sigma_c = 0.0;
  long n_T = 0;
  double a_sum = 0.0;
  double a_mean = 0.0;
  double a_sd = 0.0;
  bool bunched = false;
  long n_P = 0;
  double wait_mean_s = 0.0, wait_sd_s = 0.0;
  double ride_mean_s = 0.0, ride_sd_s = 0.0;
  double travel_mean_s = 0.0, travel_sd_s = 0.0;
  double sim_seconds = 0.0;
  double decision_seconds_mean = 0.0;
};

ReplicationMetrics compute_metrics(const ReplicationResult& result, double esh_s,
                                   const BunchingParams& params,
                                   double observation_period_s);

// One row of the experiment summary: per-field means over the replications,
// bunching as the fraction of bunched seeds.
struct SummaryRow {
  std::string strategy;
  int stages = 0;
  double c_H = 0.0;
  double sigma_c = 0.0;
  double n_T = 0.0;
  double a_sum = 0.0;
  double a_mean = 0.0;
  double a_sd = 0.0;
  double bunch_fraction = 0.0;
  double n_P = 0.0;
  double wait_mean_s = 0.0, wait_sd_s = 0.0;
  double ride_mean_s = 0.0, ride_sd_s = 0.0;
  double travel_mean_s = 0.0, travel_sd_s = 0.0;
  double sim_seconds = 0.0;
  double decision_seconds_mean = 0.0;
};

// Throws std::invalid_argument when no replications are given.
SummaryRow aggregate(std::span<const ReplicationMetrics> replications);

}  // namespace busim
