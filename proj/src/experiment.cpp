#include "busim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "busim/control.hpp"
#include "busim/engine.hpp"

namespace busim {

Scenario apply_cell(const Scenario& base, const ExperimentCell& cell) {
  Scenario s = base;
  s.control.strategy = cell.strategy;
  s.control.stages = cell.stages;
  s.control.gamma = cell.gamma;

  if (cell.action_set) {
    int next_id = 0;
    for (const auto& a : s.action_sets) next_id = std::max(next_id, a.id);
    ++next_id;
    s.action_sets.push_back({next_id, *cell.action_set});
    s.control.action_set = next_id;
  }
  if (cell.control_stops) {
    s.control.control_stops = *cell.control_stops;
  } else if (cell.strategy == "tshs") {
    s.control.control_stops = kDefaultTerminalStops;
  }

  finalize_scenario(s);
  return s;
}

std::string decision_log_tsv(const std::vector<DecisionRecord>& decisions) {
  std::string out = "time_s\tbus\tstop\tholding_s\taction_costs\tactivated_buses\n";
  char buf[64];
  for (const DecisionRecord& d : decisions) {
    std::snprintf(buf, sizeof(buf), "%.6f\t%d\t%d\t%.6f\t", d.time_s, d.bus_id, d.stop_id,
                  d.chosen_holding_s);
    out += buf;
    for (std::size_t i = 0; i < d.action_costs.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s%g:%.6f", i ? ";" : "", d.action_costs[i].first,
                    d.action_costs[i].second);
      out += buf;
    }
    out += '\t';
    for (std::size_t i = 0; i < d.activated_bus_ids.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s%d", i ? ">" : "", d.activated_bus_ids[i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

CellResult run_cell(const Scenario& base, const ExperimentCell& cell,
                    const RunOptions& options) {
  const Scenario scenario = apply_cell(base, cell);
  const ExpectedModels models = build_expected_models(scenario);
  const auto strategy = make_strategy(scenario, models);
  const double horizon = options.observation_period_s.value_or(scenario.observation_period_s);
  const LineLayout layout = build_layout(scenario);

  CellResult result;
  result.cell = cell;
  result.replications.resize(options.replications);
  if (options.keep_trajectories) result.trajectories.resize(options.replications);
  if (options.keep_decision_logs) result.decision_logs.resize(options.replications);

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= options.replications || failed.load()) return;
      try {
        ReplicationResult raw = run_replication(scenario, models, *strategy,
                                                options.master_seed, k, horizon);
        result.replications[k] =
            compute_metrics(raw, models.dwell.esh_s, scenario.bunching, horizon);
        if (options.keep_trajectories) {
          std::ostringstream os;
          write_trajectory(os, raw.log, layout);
          result.trajectories[k] = os.str();
        }
        if (options.keep_decision_logs)
          result.decision_logs[k] = decision_log_tsv(raw.decisions);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };

  const int threads = std::clamp(options.parallelism, 1, options.replications);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) std::rethrow_exception(error);

  result.row = aggregate(result.replications);
  result.row.strategy = cell.label.empty() ? cell.strategy : cell.label;
  result.row.stages = cell.strategy == "nsla" ? cell.stages : 0;
  return result;
}

namespace {

constexpr const char* kSummaryHeader =
    "strategy,stages,c_H,sigma_c,n_T,a_sum,a_mean,a_sd,bunch_fraction,n_P,"
    "W_mean,W_sd,R_mean,R_sd,Tr_mean,Tr_sd,sim_s_per_rep,decision_s_mean";

std::string row_csv(const SummaryRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,"
                "%.6f,%.6f,%.6f,%.9f",
                r.strategy.c_str(), r.stages, r.c_H, r.sigma_c, r.n_T, r.a_sum, r.a_mean,
                r.a_sd, r.bunch_fraction, r.n_P, r.wait_mean_s, r.wait_sd_s, r.ride_mean_s,
                r.ride_sd_s, r.travel_mean_s, r.travel_sd_s, r.sim_seconds,
                r.decision_seconds_mean);
  return buf;
}

}  // namespace

std::string summary_csv(std::span<const CellResult> results) {
  std::string out = kSummaryHeader;
  out += '\n';
  for (const CellResult& r : results) {
    out += row_csv(r.row);
    out += '\n';
  }
  return out;
}

nlohmann::json summary_json(std::span<const CellResult> results) {
  nlohmann::json rows = nlohmann::json::array();
  for (const CellResult& r : results) {
    const SummaryRow& s = r.row;
    rows.push_back({{"strategy", s.strategy},
                    {"stages", s.stages},
                    {"c_H", s.c_H},
                    {"sigma_c", s.sigma_c},
                    {"n_T", s.n_T},
                    {"a_sum", s.a_sum},
                    {"a_mean", s.a_mean},
                    {"a_sd", s.a_sd},
                    {"bunch_fraction", s.bunch_fraction},
                    {"n_P", s.n_P},
                    {"W_mean", s.wait_mean_s},
                    {"W_sd", s.wait_sd_s},
                    {"R_mean", s.ride_mean_s},
                    {"R_sd", s.ride_sd_s},
                    {"Tr_mean", s.travel_mean_s},
                    {"Tr_sd", s.travel_sd_s},
                    {"sim_s_per_rep", s.sim_seconds},
                    {"decision_s_mean", s.decision_seconds_mean}});
  }
  return nlohmann::json{
      {"metadata",
       {{"passenger_sd_pooling", "per replication, then averaged across replications"}}},
      {"rows", rows}};
}

std::vector<ExperimentCell> table6_cells() {
  std::vector<ExperimentCell> cells;
  cells.push_back({"none", "none", 0, 0.5, std::nullopt, std::nullopt});
  cells.push_back({"tshs", "tshs", 0, 0.5, std::nullopt, std::nullopt});
  for (int n = 1; n <= 5; ++n)
    cells.push_back({std::to_string(n) + "sla", "nsla", n, 0.5, std::nullopt, std::nullopt});
  return cells;
}

std::vector<ExperimentCell> table8_cells() {
  const std::vector<std::vector<double>> sets = {
      {0, 2, 4, 6, 8, 10},
      {0, 3, 6, 9, 12, 15},
      {0, 2, 4, 6},
      {0, 5, 10, 15},
      {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
      {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15},
  };
  std::vector<ExperimentCell> cells;
  for (std::size_t i = 0; i < sets.size(); ++i)
    cells.push_back({"nsla:set" + std::to_string(i + 1), "nsla", 3, 0.5, sets[i],
                     std::nullopt});
  return cells;
}

std::vector<ExperimentCell> table11_cells() {
  const std::vector<std::pair<std::string, std::vector<int>>> sets = {
      {"11bs", {2, 3, 5, 11, 15, 16, 17, 20, 21, 25, 29}},
      {"9bs", {2, 5, 11, 15, 16, 20, 21, 25, 29}},
      {"7bs", {2, 11, 15, 16, 20, 25, 29}},
      {"5bs", {11, 15, 16, 20, 25}},
      {"3bs", {11, 16, 25}},
  };
  std::vector<ExperimentCell> cells;
  for (const auto& [name, stops] : sets)
    cells.push_back({"nsla:" + name, "nsla", 3, 0.5, std::nullopt, stops});
  return cells;
}

}  // namespace busim
