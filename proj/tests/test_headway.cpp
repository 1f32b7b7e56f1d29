#include <doctest.h>

#include <cmath>
#include <random>

#include "busim/headway.hpp"
#include "busim/scenario.hpp"
#include "test_util.hpp"

using namespace busim;

TEST_CASE("expected dwell fixed point on the fixture") {
  Scenario s = builtin_fixture("he2019");

  SUBCASE("default boarder time reproduces the closed form") {
    const ExpectedDwellTable t = expected_dwell_fixed_point(s);
    // (17950/10 + 115.2317) / (9 - 57/60)
    CHECK(t.esh_s == doctest::Approx(237.2959).epsilon(1e-4));
    CHECK(std::abs(t.esh_s - 234.65) / 234.65 < 0.03);
    for (int e = 1; e <= 30; ++e)
      CHECK(t.dwell_s[e - 1] ==
            doctest::Approx(s.stop(e).rate_per_min * t.esh_s / 60.0));
  }
  SUBCASE("zero boarder time removes all dwell") {
    s.dwell.per_boarder_s = 0.0;
    const ExpectedDwellTable t = expected_dwell_fixed_point(s);
    CHECK(t.esh_s == doctest::Approx(212.2).epsilon(1e-3));
    for (double d : t.dwell_s) CHECK(d == 0.0);
  }
  SUBCASE("oversized demand saturates") {
    s.dwell.per_boarder_s = 100.0;  // 100 * 57/60 > 9 buses
    CHECK_THROWS_AS(expected_dwell_fixed_point(s), SaturationError);
  }
}

TEST_CASE("virtual map accumulates expected times around the loop") {
  const Scenario s = builtin_fixture("he2019");

  SUBCASE("zero dwells give cruise plus signal delay") {
    const std::vector<double> zeros(30, 0.0);
    const VirtualCoordinateMap map = build_virtual_map(s, zeros);
    CHECK(std::abs(map.cycle_length_s - (1795.0 + 115.23)) < 0.01);
    // V is strictly increasing along traversal: check stop departures.
    for (int e = 2; e <= 30; ++e)
      CHECK(map.stop_departure_v[e - 1] > map.stop_departure_v[e - 2]);
    CHECK(map.stop_departure_v[0] == 0.0);
    // First intersection sits 20 s of cruise after stop 1.
    CHECK(map.intersection_v[0] == doctest::Approx(20.0));
  }
  SUBCASE("calibrated dwells satisfy C = n_B * ESH") {
    const ExpectedDwellTable t = expected_dwell_fixed_point(s);
    const VirtualCoordinateMap map = build_virtual_map(s, t.dwell_s);
    CHECK(std::abs(map.cycle_length_s - 9.0 * t.esh_s) < 1e-6);
  }
}

TEST_CASE("progress places buses on the virtual circle") {
  test::RingSpec spec;
  spec.n_stops = 3;
  spec.n_buses = 3;
  spec.rate_per_min = 0.0;  // no dwell: C = 3 * 200 s
  const Scenario s = test::make_ring(spec);
  const VirtualCoordinateMap map = build_virtual_map(s, std::vector<double>(3, 0.0));
  REQUIRE(map.cycle_length_s == doctest::Approx(600.0));

  CHECK(progress_of({1, 0.0}, map) == doctest::Approx(0.0));
  CHECK(progress_of({2, 0.0}, map) == doctest::Approx(200.0));

  // Same target stop, activation 10 vs 40 s out: 30 s of progress apart.
  CHECK(progress_of({2, 10.0}, map) - progress_of({2, 40.0}, map) ==
        doctest::Approx(30.0));

  // Adding a full loop of activation time wraps around.
  CHECK(progress_of({2, 50.0 + 600.0}, map) ==
        doctest::Approx(progress_of({2, 50.0}, map)));
}

TEST_CASE("headway snapshot on a three-bus ring") {
  test::RingSpec spec;
  spec.n_stops = 3;
  spec.n_buses = 3;
  spec.rate_per_min = 0.0;
  const Scenario s = test::make_ring(spec);
  const VirtualCoordinateMap map = build_virtual_map(s, std::vector<double>(3, 0.0));

  SUBCASE("evenly spaced buses have zero dispersion") {
    const std::vector<BusPoint> buses = {{1, 0.0}, {2, 0.0}, {3, 0.0}};
    const HeadwaySnapshot snap = headway_snapshot(0.0, buses, map);
    for (double h : snap.headway_s) CHECK(h == doctest::Approx(200.0));
    CHECK(snap.target_s == doctest::Approx(200.0));
    CHECK(snap.sigma_s == doctest::Approx(0.0));
  }
  SUBCASE("100/200/300 split") {
    // positions 0, 100, 300 => forward gaps 100, 200, 300
    const std::vector<BusPoint> buses = {{1, 0.0}, {2, 100.0}, {3, 100.0}};
    const HeadwaySnapshot snap = headway_snapshot(0.0, buses, map);
    CHECK(snap.headway_s[0] == doctest::Approx(100.0));
    CHECK(snap.headway_s[1] == doctest::Approx(200.0));
    CHECK(snap.headway_s[2] == doctest::Approx(300.0));
    CHECK(snap.target_s == doctest::Approx(200.0));
    CHECK(snap.sigma_s == doctest::Approx(std::sqrt(20000.0 / 3.0)));
    CHECK(snap.min_headway_s() == doctest::Approx(100.0));
  }
}

TEST_CASE("headway properties on random states") {
  test::RingSpec spec;
  spec.n_stops = 8;
  spec.n_buses = 5;
  const Scenario s = test::make_ring(spec);
  const ExpectedDwellTable t = expected_dwell_fixed_point(s);
  const VirtualCoordinateMap map = build_virtual_map(s, t.dwell_s);
  const double c = map.cycle_length_s;

  std::mt19937 gen(2024);
  std::uniform_int_distribution<int> stop_dist(1, 8);
  std::uniform_real_distribution<double> td_dist(0.0, 500.0);

  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BusPoint> buses(5);
    for (auto& b : buses) b = {stop_dist(gen), td_dist(gen)};
    const HeadwaySnapshot snap = headway_snapshot(0.0, buses, map);

    // Telescoping: forward gaps cover the circle exactly once.
    double sum = 0.0;
    for (double h : snap.headway_s) sum += h;
    CHECK(std::abs(sum - c) < 1e-6);

    // Dispersion vanishes iff all headways are equal.
    const bool all_equal = [&] {
      for (double h : snap.headway_s)
        if (std::abs(h - snap.headway_s[0]) > 1e-12) return false;
      return true;
    }();
    CHECK((snap.sigma_s < 1e-9) == all_equal);

    // Holding monotonicity: delaying one bus by a grows its own headway by a
    // and shrinks its follower's by a.
    std::size_t bus = trial % buses.size();
    std::size_t follower = 0;
    for (std::size_t f = 0; f < buses.size(); ++f) {
      // the follower of `bus` is the bus whose gap ends at `bus`
      double gap = progress_of(buses[bus], map) - progress_of(buses[f], map);
      if (gap < 0) gap += c;
      if (f != bus && std::abs(gap - snap.headway_s[f]) < 1e-9) follower = f;
    }
    const double a = 0.4 * snap.headway_s[follower];
    if (a > 1e-6) {
      std::vector<BusPoint> held = buses;
      held[bus].time_to_activation_s += a;
      const HeadwaySnapshot after = headway_snapshot(0.0, held, map);
      CHECK(after.headway_s[bus] == doctest::Approx(snap.headway_s[bus] + a));
      CHECK(after.headway_s[follower] ==
            doctest::Approx(snap.headway_s[follower] - a));
      for (std::size_t i = 0; i < buses.size(); ++i)
        if (i != bus && i != follower)
          CHECK(after.headway_s[i] == doctest::Approx(snap.headway_s[i]));
    }
  }
}
