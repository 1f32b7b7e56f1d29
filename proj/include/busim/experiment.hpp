// experiment.hpp - seeded replication batches over strategy cells, with
// summary CSV/JSON output and the canned sweeps (strategies, action sets,
// control-point sets).
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "busim/metrics.hpp"
#include "busim/scenario.hpp"

namespace busim {

struct ExperimentCell {
  std::string label;      // row label; plain strategy name for canonical runs
  std::string strategy;   // none | tshs | nsla
  int stages = 3;
  double gamma = 0.5;
  std::optional<std::vector<double>> action_set;   // override control action set
  std::optional<std::vector<int>> control_stops;   // control points (terminals for tshs)
};

// Default terminal stops used when running tshs on a scenario whose control
// section names the look-ahead control points.
inline const std::vector<int> kDefaultTerminalStops = {5, 20};

// Copy of the scenario with the cell's control settings applied and
// revalidated.
Scenario apply_cell(const Scenario& base, const ExperimentCell& cell);

struct CellResult {
  ExperimentCell cell;
  std::vector<ReplicationMetrics> replications;  // in replication order
  SummaryRow row;
  // Serialized per-replication artifacts, only kept when requested.
  std::vector<std::string> trajectories;
  std::vector<std::string> decision_logs;
};

struct RunOptions {
  int replications = 50;
  std::uint64_t master_seed = 1;
  int parallelism = 1;
  bool keep_trajectories = false;
  bool keep_decision_logs = false;
  std::optional<double> observation_period_s;  // override the scenario's T
};

// Runs one cell: replication k uses streams derived from (master_seed, k).
// Aggregation order is fixed by replication index, so results do not depend
// on the parallelism level.
CellResult run_cell(const Scenario& base, const ExperimentCell& cell,
                    const RunOptions& options);

std::string decision_log_tsv(const std::vector<DecisionRecord>& decisions);

// CSV with the fixed summary header, one row per cell.
std::string summary_csv(std::span<const CellResult> results);
// JSON mirror: {"metadata": {...}, "rows": [...]} with the same field names.
nlohmann::json summary_json(std::span<const CellResult> results);

// Canned sweeps.
std::vector<ExperimentCell> table6_cells();   // strategies: none, tshs, 1..5 SLA
std::vector<ExperimentCell> table8_cells();   // six action sets under 3SLA
std::vector<ExperimentCell> table11_cells();  // five control-point sets under 3SLA

}  // namespace busim
