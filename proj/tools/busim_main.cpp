// busim_main.cpp - command line front end: run seeded replication batches,
// reproduce the canned experiment tables, and time the look-ahead depths.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "busim/control.hpp"
#include "busim/engine.hpp"
#include "busim/experiment.hpp"
#include "busim/scenario.hpp"

namespace {

namespace fs = std::filesystem;
using namespace busim;

Scenario resolve_scenario(const std::string& ref) {
  constexpr const char* kBuiltinPrefix = "builtin:";
  if (ref.rfind(kBuiltinPrefix, 0) == 0)
    return builtin_fixture(ref.substr(std::string(kBuiltinPrefix).size()));
  return load_scenario_file(ref);
}

std::string default_out_dir() {
  if (const char* env = std::getenv("BUSIM_OUT_DIR")) return env;
  return "busim_out";
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void print_rows(const std::vector<CellResult>& results) {
  std::printf("%-12s %6s %9s %9s %8s %9s %7s %7s %7s %8s %8s %8s %9s\n", "cell", "stages",
              "c_H", "sigma_c", "n_T", "a_sum", "a_mean", "a_sd", "bunch", "n_P", "W_mean",
              "R_mean", "Tr_mean");
  for (const CellResult& r : results) {
    const SummaryRow& s = r.row;
    std::printf("%-12s %6d %9.2f %9.2f %8.1f %9.1f %7.2f %7.2f %7.2f %8.1f %8.1f %8.1f %9.1f\n",
                s.strategy.c_str(), s.stages, s.c_H, s.sigma_c, s.n_T, s.a_sum, s.a_mean,
                s.a_sd, s.bunch_fraction, s.n_P, s.wait_mean_s, s.ride_mean_s,
                s.travel_mean_s);
  }
}

void write_outputs(const fs::path& dir, const std::vector<CellResult>& results) {
  fs::create_directories(dir);
  write_file(dir / "summary.csv", summary_csv(results));
  write_file(dir / "summary.json", summary_json(results).dump(2) + "\n");
  for (const CellResult& r : results) {
    const std::string label = r.row.strategy;
    for (std::size_t k = 0; k < r.trajectories.size(); ++k) {
      char name[128];
      std::snprintf(name, sizeof(name), "traj_%s_rep%04zu.tsv", label.c_str(), k);
      write_file(dir / name, r.trajectories[k]);
    }
    for (std::size_t k = 0; k < r.decision_logs.size(); ++k) {
      char name[128];
      std::snprintf(name, sizeof(name), "decisions_%s_rep%04zu.tsv", label.c_str(), k);
      write_file(dir / name, r.decision_logs[k]);
    }
  }
  std::printf("wrote %s and %s\n", (dir / "summary.csv").c_str(),
              (dir / "summary.json").c_str());
}

int cmd_run(const std::string& scenario_ref, const std::string& strategy, int stages,
            double gamma, int reps, std::uint64_t seed, const std::string& out,
            bool trajectories, bool decisions, int parallel,
            const std::vector<double>& action_set, const std::vector<int>& control_stops) {
  Scenario base = resolve_scenario(scenario_ref);

  ExperimentCell cell;
  cell.label = strategy == "nsla" ? std::to_string(stages) + "sla" : strategy;
  cell.strategy = strategy;
  cell.stages = stages;
  cell.gamma = gamma;
  if (!action_set.empty()) cell.action_set = action_set;
  if (!control_stops.empty()) cell.control_stops = control_stops;

  RunOptions options;
  options.replications = reps;
  options.master_seed = seed;
  options.parallelism = parallel;
  options.keep_trajectories = trajectories;
  options.keep_decision_logs = decisions;

  std::vector<CellResult> results;
  results.push_back(run_cell(base, cell, options));
  print_rows(results);
  write_outputs(out, results);
  return 0;
}

int cmd_table(const std::string& name, const std::string& scenario_ref, int reps,
              std::uint64_t seed, const std::string& out, int parallel) {
  std::vector<ExperimentCell> cells;
  if (name == "table6")
    cells = table6_cells();
  else if (name == "table8")
    cells = table8_cells();
  else if (name == "table11")
    cells = table11_cells();
  else
    throw std::runtime_error("unknown table: " + name + " (expected table6|table8|table11)");

  Scenario base = resolve_scenario(scenario_ref);
  RunOptions options;
  options.replications = reps;
  options.master_seed = seed;
  options.parallelism = parallel;

  std::vector<CellResult> results;
  for (const ExperimentCell& cell : cells) {
    results.push_back(run_cell(base, cell, options));
    std::fprintf(stderr, "finished %s\n", results.back().row.strategy.c_str());
  }
  print_rows(results);
  write_outputs(fs::path(out) / name, results);
  return 0;
}

int cmd_scenario(const std::string& scenario_ref, const std::string& out_file) {
  const Scenario s = resolve_scenario(scenario_ref);
  const std::string text = scenario_to_json(s).dump(2) + "\n";
  if (out_file.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_file(out_file, text);
    std::printf("wrote %s\n", out_file.c_str());
  }
  return 0;
}

int cmd_timing(const std::string& scenario_ref, int stages_min, int stages_max, int reps,
               std::uint64_t seed) {
  Scenario base = resolve_scenario(scenario_ref);
  RunOptions options;
  options.replications = reps;
  options.master_seed = seed;
  options.parallelism = 1;  // clean per-replication wall times

  std::vector<double> per_rep, per_decision;
  for (int n = stages_min; n <= stages_max; ++n) {
    ExperimentCell cell{std::to_string(n) + "sla", "nsla", n, 0.5, std::nullopt, std::nullopt};
    const CellResult r = run_cell(base, cell, options);
    per_rep.push_back(r.row.sim_seconds);
    per_decision.push_back(r.row.decision_seconds_mean);
  }

  std::printf("%-34s", "stages");
  for (int n = stages_min; n <= stages_max; ++n) std::printf(" %12d", n);
  std::printf("\n%-34s", "time to run the simulation once (s)");
  for (double v : per_rep) std::printf(" %12.3f", v);
  std::printf("\n%-34s", "time to make one decision (s)");
  for (double v : per_decision) std::printf(" %12.6f", v);
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"circular bus line simulator with look-ahead holding control"};
  app.require_subcommand(1);

  std::string scenario_ref = "builtin:he2019";
  std::string strategy = "nsla";
  int stages = 3;
  double gamma = 0.5;
  int reps = 50;
  std::uint64_t seed = 1;
  std::string out = default_out_dir();
  bool trajectories = false;
  bool decisions = false;
  int parallel = 1;
  std::vector<double> action_set;
  std::vector<int> control_stops;

  CLI::App* run = app.add_subcommand("run", "run replications of one strategy");
  run->add_option("--scenario", scenario_ref, "path or builtin:he2019");
  run->add_option("--strategy", strategy, "none | tshs | nsla")
      ->check(CLI::IsMember({"none", "tshs", "nsla"}));
  run->add_option("--stages", stages, "look-ahead stages (nsla)")->check(CLI::PositiveNumber);
  run->add_option("--gamma", gamma, "discount in (0, 1]");
  run->add_option("--reps", reps, "replications")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out, "output directory");
  run->add_flag("--trajectories", trajectories, "write per-replication trajectories");
  run->add_flag("--decisions", decisions, "write per-replication decision logs");
  run->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--action-set", action_set, "override holding times, e.g. 0 2 4 6");
  run->add_option("--control-stops", control_stops,
                  "override control stops (terminal stops for tshs)");

  std::string table_name;
  CLI::App* table = app.add_subcommand("table", "reproduce a canned experiment sweep");
  table->add_option("name", table_name, "table6 | table8 | table11")->required();
  table->add_option("--scenario", scenario_ref, "path or builtin:he2019");
  table->add_option("--reps", reps, "replications per cell")->check(CLI::PositiveNumber);
  table->add_option("--seed", seed, "master seed");
  table->add_option("--out", out, "output directory");
  table->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);

  std::string scenario_out;
  CLI::App* scenario_cmd =
      app.add_subcommand("scenario", "dump a scenario document as JSON");
  scenario_cmd->add_option("ref", scenario_ref, "path or builtin:he2019");
  scenario_cmd->add_option("--out", scenario_out, "output file (default stdout)");

  int stages_min = 1;
  int stages_max = 5;
  int timing_reps = 3;
  CLI::App* timing = app.add_subcommand("timing", "wall-clock per replication and decision");
  timing->add_option("--scenario", scenario_ref, "path or builtin:he2019");
  timing->add_option("--stages-min", stages_min)->check(CLI::PositiveNumber);
  timing->add_option("--stages-max", stages_max)->check(CLI::PositiveNumber);
  timing->add_option("--reps", timing_reps, "replications per depth")
      ->check(CLI::PositiveNumber);
  timing->add_option("--seed", seed, "master seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(scenario_ref, strategy, stages, gamma, reps, seed, out, trajectories,
                     decisions, parallel, action_set, control_stops);
    if (table->parsed())
      return cmd_table(table_name, scenario_ref, reps, seed, out, parallel);
    if (scenario_cmd->parsed()) return cmd_scenario(scenario_ref, scenario_out);
    if (timing->parsed())
      return cmd_timing(scenario_ref, stages_min, stages_max, timing_reps, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
