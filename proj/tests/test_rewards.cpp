#include <doctest.h>

#include <cmath>

#include "rldsm/rewards.hpp"
#include "rldsm/rng.hpp"

using namespace rldsm;

namespace {

const Tariff kTou{{{0, 6, 6}, {6, 15, 9}, {15, 22, 15}, {22, 24, 6}}};

// Population variance by direct summation over the 24 columns.
double population_variance(const Profile& h) {
  double sum = 0.0, sq = 0.0;
  for (int x : h) {
    sum += x;
    sq += static_cast<double>(x) * x;
  }
  const double mean = sum / 24.0;
  return sq / 24.0 - mean * mean;
}

// Counts rows whose cells are all occupied, scanning upward from the floor.
int rows_filled(const Profile& h) {
  int lines = 0;
  for (int r = 0;; ++r) {
    for (int x : h)
      if (x <= r) return lines;
    ++lines;
  }
}

SettleReport report_for(const Profile& heights, LoadBlock block) {
  SettleReport r;
  r.heights_after = heights;
  r.block = std::move(block);
  r.complete_lines = complete_lines(heights);
  r.max_height_after = profile_peak(heights);
  r.overflow = r.max_height_after > r.grid_cap;
  return r;
}

Profile random_heights(Rng& rng, int max) {
  Profile p{};
  for (int& h : p) h = static_cast<int>(rng.below(max + 1));
  return p;
}

}  // namespace

TEST_CASE("spread term examples") {
  Profile uniform{};
  uniform.fill(7);
  CHECK(spread_term(uniform, SpreadKind::Variance) == 1.0);
  CHECK(spread_term(uniform, SpreadKind::StdDev) == 1.0);

  Profile spike{};
  spike[5] = 2;
  const double var = population_variance(spike);
  CHECK(var == doctest::Approx(0.15972).epsilon(1e-4));
  CHECK(spread_term(spike, SpreadKind::Variance) == doctest::Approx(0.8623).epsilon(1e-4));
  CHECK(spread_term(spike, SpreadKind::StdDev) == doctest::Approx(0.7145).epsilon(1e-4));
  CHECK(spread_term(spike, SpreadKind::Variance) == doctest::Approx(1.0 / (1.0 + var)));
  CHECK(spread_term(spike, SpreadKind::StdDev) == doctest::Approx(1.0 / (1.0 + std::sqrt(var))));
}

TEST_CASE("spread term lies in (0, 1] and is 1 only for flat profiles") {
  Rng rng(2);
  for (int trial = 0; trial < 2000; ++trial) {
    const Profile h = random_heights(rng, trial % 2 ? 3 : 50);
    bool flat = true;
    for (int x : h) flat = flat && x == h[0];
    for (auto kind : {SpreadKind::Variance, SpreadKind::StdDev}) {
      const double s = spread_term(h, kind);
      CHECK(s > 0.0);
      CHECK(s <= 1.0);
      CHECK((s == 1.0) == flat);
    }
  }
}

TEST_CASE("complete lines") {
  Profile h{};
  h.fill(3);
  CHECK(complete_lines(h) == 3);
  h[7] = 0;
  CHECK(complete_lines(h) == 0);
  h.fill(1);
  CHECK(complete_lines(h) == 1);

  Rng rng(6);
  for (int trial = 0; trial < 2000; ++trial) {
    Profile r = random_heights(rng, 6);
    for (int& x : r) x += static_cast<int>(rng.below(3));
    CHECK(complete_lines(r) == rows_filled(r));
  }
}

TEST_CASE("reward examples") {
  Profile ones{};
  ones.fill(1);
  const auto report = report_for(ones, LoadBlock{"x", {1}, 2});

  RewardConfig peak;
  const auto r = compute_reward(report, peak, kTou);
  CHECK(r.total == 10.26);
  CHECK(r.spread_term == 10.0);
  CHECK(r.lines_term == 0.76);
  CHECK(r.height_term == -0.5);
  CHECK(r.cost_term == 0.0);

  RewardConfig pc;
  pc.objective = Objective::PeakCost;
  const auto c = compute_reward(report, pc, kTou);
  CHECK(c.cost_term == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(c.total == doctest::Approx(9.66).epsilon(1e-12));

  RewardConfig zero{0.0, 0.0, 0.0, 0.0, SpreadKind::Variance, Objective::PeakCost};
  CHECK(compute_reward(report, zero, kTou).total == 0.0);
}

TEST_CASE("overflow settles get the cap penalty") {
  Profile h{};
  h[3] = 51;
  const auto report = report_for(h, LoadBlock{"x", {2}, 3});
  REQUIRE(report.overflow);
  for (auto obj : {Objective::Peak, Objective::PeakCost}) {
    RewardConfig cfg;
    cfg.objective = obj;
    CHECK(compute_reward(report, cfg, kTou).total == -25.0);
  }
}

TEST_CASE("total is the sum of its terms") {
  Rng rng(12);
  RewardConfig cfg;
  cfg.objective = Objective::PeakCost;
  cfg.spread = SpreadKind::StdDev;
  for (int trial = 0; trial < 1000; ++trial) {
    const Profile h = random_heights(rng, 50);
    const int w = 1 + static_cast<int>(rng.below(3));
    LoadBlock b{"b", std::vector<int>(w, 1 + static_cast<int>(rng.below(3))),
                static_cast<int>(rng.below(24 - w + 1))};
    const auto r = compute_reward(report_for(h, b), cfg, kTou);
    CHECK(std::isfinite(r.total));
    CHECK(r.total == r.spread_term + r.lines_term + r.height_term + r.cost_term);
  }
}

TEST_CASE("a taller peak lowers the reward") {
  RewardConfig cfg;
  Rng rng(19);
  for (int trial = 0; trial < 500; ++trial) {
    Profile h = random_heights(rng, 20);
    const auto lo = compute_reward(report_for(h, LoadBlock{"b", {1}, 0}), cfg, kTou);
    auto tallest = std::max_element(h.begin(), h.end());
    *tallest += 1 + static_cast<int>(rng.below(5));
    const auto hi = compute_reward(report_for(h, LoadBlock{"b", {1}, 0}), cfg, kTou);
    CHECK(hi.height_term < lo.height_term);
    CHECK(hi.total < lo.total);
  }
}

TEST_CASE("moving a block off-peak raises the cost-aware reward") {
  RewardConfig cfg;
  cfg.objective = Objective::PeakCost;
  Profile h{};
  h.fill(4);
  const auto at_peak = compute_reward(report_for(h, LoadBlock{"b", {2, 1}, 16}), cfg, kTou);
  const auto off_peak = compute_reward(report_for(h, LoadBlock{"b", {2, 1}, 2}), cfg, kTou);
  const double delta_cents = 1.5 * (15 - 6);
  CHECK(off_peak.total > at_peak.total);
  CHECK(off_peak.total - at_peak.total == doctest::Approx(cfg.alpha4 * delta_cents));

  RewardConfig peak_only;
  CHECK(compute_reward(report_for(h, LoadBlock{"b", {2, 1}, 16}), peak_only, kTou).total ==
        compute_reward(report_for(h, LoadBlock{"b", {2, 1}, 2}), peak_only, kTou).total);
}

TEST_CASE("names round-trip") {
  CHECK(parse_spread_kind(to_string(SpreadKind::StdDev)) == SpreadKind::StdDev);
  CHECK(parse_spread_kind("variance") == SpreadKind::Variance);
  CHECK(parse_objective(to_string(Objective::PeakCost)) == Objective::PeakCost);
  CHECK(parse_objective("peak_cost") == Objective::PeakCost);
  CHECK_THROWS_AS(parse_objective("cost"), Error);
  CHECK_THROWS_AS(parse_spread_kind("mad"), Error);
}
