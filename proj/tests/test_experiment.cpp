#include <doctest.h>

#include <sstream>

#include "busim/experiment.hpp"
#include "busim/scenario.hpp"

using namespace busim;

TEST_CASE("summary csv carries the fixed header") {
  const std::string csv = summary_csv({});
  CHECK(csv ==
        "strategy,stages,c_H,sigma_c,n_T,a_sum,a_mean,a_sd,bunch_fraction,n_P,"
        "W_mean,W_sd,R_mean,R_sd,Tr_mean,Tr_sd,sim_s_per_rep,decision_s_mean\n");
}

TEST_CASE("apply_cell rewires control settings") {
  const Scenario base = builtin_fixture("he2019");

  SUBCASE("action set override allocates a fresh set") {
    ExperimentCell cell{"x", "nsla", 3, 0.5, std::vector<double>{0, 5, 10}, std::nullopt};
    const Scenario s = apply_cell(base, cell);
    CHECK(s.action_set_of_stop(2).holding_times_s == std::vector<double>{0, 5, 10});
    CHECK(s.control.action_set != base.control.action_set);
  }
  SUBCASE("control stop override flips controllability") {
    ExperimentCell cell{"x", "nsla", 3, 0.5, std::nullopt, std::vector<int>{11, 16, 25}};
    const Scenario s = apply_cell(base, cell);
    int controllable = 0;
    for (const auto& e : s.stops)
      if (e.controllable) ++controllable;
    CHECK(controllable == 3);
    CHECK(s.stop(16).controllable);
    CHECK(!s.stop(2).controllable);
    CHECK(s.stop(2).action_set_id == kZeroActionSetId);
  }
  SUBCASE("tshs defaults to the terminal stops") {
    ExperimentCell cell{"tshs", "tshs", 0, 0.5, std::nullopt, std::nullopt};
    const Scenario s = apply_cell(base, cell);
    CHECK(s.control.control_stops == std::vector<int>{5, 20});
  }
}

TEST_CASE("canned sweeps enumerate the published cells") {
  const auto t6 = table6_cells();
  REQUIRE(t6.size() == 7);
  CHECK(t6[0].strategy == "none");
  CHECK(t6[1].strategy == "tshs");
  CHECK(t6[2].stages == 1);
  CHECK(t6[6].stages == 5);

  const auto t8 = table8_cells();
  REQUIRE(t8.size() == 6);
  CHECK(*t8[3].action_set == std::vector<double>{0, 5, 10, 15});
  CHECK(t8[5].action_set->size() == 16);

  const auto t11 = table11_cells();
  REQUIRE(t11.size() == 5);
  CHECK(*t11[4].control_stops == std::vector<int>{11, 16, 25});
  CHECK(t11[0].control_stops->size() == 11);
}

TEST_CASE("replication results are independent of the parallelism level") {
  const Scenario base = builtin_fixture("he2019");
  ExperimentCell cell{"3sla", "nsla", 3, 0.5, std::nullopt, std::nullopt};

  RunOptions serial;
  serial.replications = 6;
  serial.master_seed = 33;
  serial.parallelism = 1;
  serial.observation_period_s = 3000.0;
  serial.keep_trajectories = true;

  RunOptions parallel = serial;
  parallel.parallelism = 6;

  const CellResult a = run_cell(base, cell, serial);
  const CellResult b = run_cell(base, cell, parallel);

  REQUIRE(a.replications.size() == b.replications.size());
  for (std::size_t k = 0; k < a.replications.size(); ++k) {
    CHECK(a.replications[k].c_H == b.replications[k].c_H);
    CHECK(a.replications[k].n_T == b.replications[k].n_T);
    CHECK(a.replications[k].a_sum == b.replications[k].a_sum);
    CHECK(a.replications[k].n_P == b.replications[k].n_P);
    CHECK(a.trajectories[k] == b.trajectories[k]);
  }
  CHECK(a.row.c_H == b.row.c_H);
}

TEST_CASE("summary json mirrors the csv fields") {
  const Scenario base = builtin_fixture("he2019");
  ExperimentCell cell{"1sla", "nsla", 1, 0.5, std::nullopt, std::nullopt};
  RunOptions options;
  options.replications = 2;
  options.master_seed = 5;
  options.observation_period_s = 2000.0;
  const CellResult r = run_cell(base, cell, options);

  const std::vector<CellResult> results = {r};
  const nlohmann::json j = summary_json(results);
  REQUIRE(j.contains("rows"));
  REQUIRE(j["rows"].size() == 1);
  const auto& row = j["rows"][0];
  for (const char* key :
       {"strategy", "stages", "c_H", "sigma_c", "n_T", "a_sum", "a_mean", "a_sd",
        "bunch_fraction", "n_P", "W_mean", "W_sd", "R_mean", "R_sd", "Tr_mean",
        "Tr_sd", "sim_s_per_rep", "decision_s_mean"})
    CHECK(row.contains(key));
  CHECK(row["strategy"] == "1sla");
  CHECK(row["stages"] == 1);
  CHECK(j.contains("metadata"));

  const std::string csv = summary_csv(results);
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(line.rfind("1sla,1,", 0) == 0);
}

TEST_CASE("decision log lists the evaluated actions") {
  DecisionRecord d;
  d.time_s = 12.5;
  d.bus_id = 3;
  d.stop_id = 7;
  d.chosen_holding_s = 4.0;
  d.action_costs = {{0.0, 100.0}, {4.0, 50.0}};
  d.activated_bus_ids = {3, 5, 1};
  const std::string tsv = decision_log_tsv({d});
  CHECK(tsv.find("time_s\tbus\tstop\tholding_s") == 0);
  CHECK(tsv.find("12.500000\t3\t7\t4.000000\t0:100.000000;4:50.000000\t3>5>1\n") !=
        std::string::npos);
}
