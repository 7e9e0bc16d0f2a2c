#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "platoon/types.hpp"
#include "platoon/vehicle_set.hpp"

using namespace platoon;

namespace {

// Chain of vehicles behind a CAV at x=0, with one headway per follower.
std::vector<VehicleState> chain_with_gaps(const std::vector<double>& gaps,
                                          const std::vector<double>& speeds, double l_c) {
  std::vector<VehicleState> states;
  states.push_back({0.0, speeds[0], 0.0});
  double p = 0.0;
  for (size_t i = 0; i < gaps.size(); ++i) {
    p -= l_c + gaps[i];
    states.push_back({p, speeds[i + 1], 0.0});
  }
  return states;
}

}  // namespace

TEST_CASE("safe_gap matches the headway rule") {
  CHECK(safe_gap(20.0, 1.5, 3.0) == doctest::Approx(33.0));
  CHECK(safe_gap(0.0, 1.5, 3.0) == doctest::Approx(3.0));
  CHECK(safe_gap(35.0, 1.8, 3.0) == doctest::Approx(66.0));
}

TEST_CASE("safe_gap is affine and increasing in speed") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> vdist(0.0, 35.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double v1 = vdist(rng), v2 = vdist(rng), a = 0.3;
    CHECK(safe_gap(a * v1 + (1 - a) * v2, 1.5, 3.0) ==
          doctest::Approx(a * safe_gap(v1, 1.5, 3.0) + (1 - a) * safe_gap(v2, 1.5, 3.0)));
    if (v1 < v2) CHECK(safe_gap(v1, 1.5, 3.0) < safe_gap(v2, 1.5, 3.0));
  }
}

TEST_CASE("headway is bumper to bumper") {
  CHECK(headway({100.0, 0, 0}, {80.0, 0, 0}, 5.0) == doctest::Approx(15.0));
  CHECK(headway({85.0, 0, 0}, {80.0, 0, 0}, 5.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(headway({80.0, 0, 0}, {85.0, 0, 0}, 5.0), OrderingViolation);
}

TEST_CASE("approach_rate is leader minus follower speed") {
  CHECK(approach_rate({0, 20.0, 0}, {0, 25.0, 0}) == doctest::Approx(-5.0));
  CHECK(approach_rate({0, 17.0, 0}, {0, 17.0, 0}) == doctest::Approx(0.0));
  CHECK(approach_rate({0, 30.0, 0}, {0, 0.0, 0}) == doctest::Approx(30.0));
}

TEST_CASE("safety_satisfied boundary behavior") {
  // follower at 20 m/s with rho=1.5, s0=3 needs exactly 33 m
  VehicleState follow{0.0, 20.0, 0.0};
  CHECK(safety_satisfied({38.0, 20.0, 0.0}, follow, 1.5, 3.0, 5.0));        // headway 33.0
  CHECK_FALSE(safety_satisfied({37.9, 20.0, 0.0}, follow, 1.5, 3.0, 5.0));  // headway 32.9
  // stopped pair at exactly s0
  CHECK(safety_satisfied({8.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 1.5, 3.0, 5.0));
}

TEST_CASE("platoon_formed residual arithmetic") {
  SafetyParams sp;
  sp.rho = {1.5, 1.5, 1.5, 1.5, 1.5};
  sp.s_0 = 3.0;
  PlatoonCriteria crit;  // 1.0 m, 0.5 m/s
  const double l_c = 5.0;
  const double g = safe_gap(20.0, 1.5, 3.0);

  SUBCASE("exact gaps and equal speeds form a platoon") {
    auto states = chain_with_gaps({g, g, g, g}, {20, 20, 20, 20, 20}, l_c);
    CHECK(platoon_formed(states, sp, crit, l_c));
    CHECK(formation_residuals(states, sp, l_c).gap_rss == doctest::Approx(0.0));
  }
  SUBCASE("a single headway off by twice the tolerance breaks it") {
    auto states = chain_with_gaps({g + 2.0 * crit.eps_dp, g, g, g}, {20, 20, 20, 20, 20}, l_c);
    CHECK_FALSE(platoon_formed(states, sp, crit, l_c));
  }
  SUBCASE("four residuals of 0.3 m give a root-sum-square of 0.6") {
    auto states =
        chain_with_gaps({g + 0.3, g + 0.3, g + 0.3, g + 0.3}, {20, 20, 20, 20, 20}, l_c);
    CHECK(formation_residuals(states, sp, l_c).gap_rss == doctest::Approx(0.6));
    CHECK(platoon_formed(states, sp, crit, l_c));
  }
  SUBCASE("speed residuals are measured against the group mean, CAV included") {
    auto states = chain_with_gaps({g, g, g, g}, {21, 20, 20, 20, 19}, l_c);
    const auto r = formation_residuals(states, sp, l_c);
    CHECK(r.speed_rss == doctest::Approx(std::sqrt(2.0)));
    CHECK_FALSE(platoon_formed(states, sp, crit, l_c));
  }
}

TEST_CASE("platoon_formed is monotone in the tolerances") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> gap(5.0, 50.0), spd(10.0, 30.0);
  SafetyParams sp;
  sp.rho = {1.5, 1.6, 1.7, 1.8};
  sp.s_0 = 3.0;
  for (int trial = 0; trial < 200; ++trial) {
    auto states = chain_with_gaps({gap(rng), gap(rng), gap(rng)},
                                  {spd(rng), spd(rng), spd(rng), spd(rng)}, 5.0);
    PlatoonCriteria tight{0.5 + gap(rng) / 25.0, 0.1 + spd(rng) / 60.0};
    PlatoonCriteria loose{tight.eps_dp * 3.0, tight.eps_v * 3.0};
    if (platoon_formed(states, sp, tight, 5.0)) CHECK(platoon_formed(states, sp, loose, 5.0));
  }
}

TEST_CASE("vehicle set ids and validation") {
  VehicleSet set{true, 5};
  CHECK(set.ids() == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(set.hdv_count() == 4);
  VehicleSet lone{false, 1};
  CHECK_THROWS_AS(lone.validate(), std::invalid_argument);
}

TEST_CASE("reindex after a departure shifts trailing ids up") {
  VehicleSet set{false, 4};  // HDVs {2,3,4}
  const auto res = reindex_after_lane_change(set, {LaneEvent::Kind::departure, 3});
  CHECK(res.set.n_total == 3);
  // old 4 is renamed 3
  bool found = false;
  for (const auto& [from, to] : res.id_map)
    if (from == 4) {
      CHECK(to == 3);
      found = true;
    }
  CHECK(found);
}

TEST_CASE("reindex after an insertion shifts trailing ids down") {
  VehicleSet set{false, 4};  // HDVs {2,3,4}
  const auto res = reindex_after_lane_change(set, {LaneEvent::Kind::insertion, 3});
  CHECK(res.set.n_total == 5);  // newcomer takes id 4
  for (const auto& [from, to] : res.id_map) {
    if (from == 4) CHECK(to == 5);
    if (from == 2) CHECK(to == 2);
    if (from == 3) CHECK(to == 3);
  }
}

TEST_CASE("reindex rejects malformed events") {
  VehicleSet set{true, 3};
  CHECK_THROWS_AS(reindex_after_lane_change(set, {LaneEvent::Kind::departure, 0}), InvalidEvent);
  CHECK_THROWS_AS(reindex_after_lane_change(set, {LaneEvent::Kind::departure, 1}), InvalidEvent);
  CHECK_THROWS_AS(reindex_after_lane_change(set, {LaneEvent::Kind::insertion, 1}), InvalidEvent);
  CHECK_THROWS_AS(reindex_after_lane_change(set, {LaneEvent::Kind::departure, 9}), InvalidEvent);
  VehicleSet one_hdv{false, 2};
  CHECK_THROWS_AS(reindex_after_lane_change(one_hdv, {LaneEvent::Kind::departure, 2}),
                  InvalidEvent);
}

TEST_CASE("reindex changes the HDV count by exactly one and keeps order") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    VehicleSet set{trial % 2 == 0, 2 + static_cast<int>(rng() % 6)};
    const bool depart = (rng() % 2 == 0) && set.hdv_count() > 1;
    LaneEvent ev{depart ? LaneEvent::Kind::departure : LaneEvent::Kind::insertion,
                 2 + static_cast<int>(rng() % set.hdv_count())};
    const auto res = reindex_after_lane_change(set, ev);
    CHECK(std::abs(res.set.hdv_count() - set.hdv_count()) == 1);
    // surviving vehicles keep their relative order
    int prev_to = -1;
    for (const auto& [from, to] : res.id_map) {
      (void)from;
      CHECK(to > prev_to);
      prev_to = to;
    }
    const auto ids = res.set.ids();
    for (size_t i = 1; i < ids.size(); ++i) CHECK(ids[i] == ids[i - 1] + 1);
  }
}
