#include <doctest.h>

#include <limits>
#include <map>
#include <sstream>

#include "rldsm/billing.hpp"
#include "rldsm/oracle.hpp"
#include "rldsm/placement.hpp"
#include "rldsm/rng.hpp"
#include "rldsm/scenario.hpp"

using namespace rldsm;

namespace {

const Tariff kTou{{{0, 6, 6}, {6, 15, 9}, {15, 22, 15}, {22, 24, 6}}};

// Smallest achievable peak (cells) and, separately, smallest achievable cost
// (half-cents) by plain nested enumeration.
struct Optimum {
  int peak = std::numeric_limits<int>::max();
  std::int64_t cost = std::numeric_limits<std::int64_t>::max();
  int peak_then_cost_peak = std::numeric_limits<int>::max();
  std::int64_t peak_then_cost_cost = std::numeric_limits<std::int64_t>::max();
};

void enumerate(const Profile& profile, const std::vector<LoadBlock>& blocks, std::size_t k,
               int cap, Optimum& best) {
  if (k == blocks.size()) {
    int peak = 0;
    std::int64_t half_cents = 0;
    for (int h = 0; h < 24; ++h) {
      peak = std::max(peak, profile[h]);
      half_cents += static_cast<std::int64_t>(profile[h]) * price_at_hour(kTou, h);
    }
    if (peak > cap) return;
    best.peak = std::min(best.peak, peak);
    best.cost = std::min(best.cost, half_cents);
    if (peak < best.peak_then_cost_peak ||
        (peak == best.peak_then_cost_peak && half_cents < best.peak_then_cost_cost)) {
      best.peak_then_cost_peak = peak;
      best.peak_then_cost_cost = half_cents;
    }
    return;
  }
  const LoadBlock& b = blocks[k];
  for (int at = 0; at + b.width() <= 24; ++at) {
    Profile next = profile;
    for (int i = 0; i < b.width(); ++i) next[at + i] += b.column_cells[i];
    enumerate(next, blocks, k + 1, cap, best);
  }
}

Optimum enumerate(const Profile& base, const std::vector<LoadBlock>& blocks, int cap = 50) {
  Optimum best;
  enumerate(base, blocks, 0, cap, best);
  return best;
}

std::vector<LoadBlock> random_blocks(Rng& rng, std::size_t n) {
  std::vector<LoadBlock> out;
  for (std::size_t i = 0; i < n; ++i) {
    LoadBlock b;
    b.name = std::string(1, static_cast<char>('a' + rng.below(26))) + std::to_string(i);
    const int w = 1 + static_cast<int>(rng.below(3));
    for (int c = 0; c < w; ++c) b.column_cells.push_back(1 + static_cast<int>(rng.below(4)));
    out.push_back(b);
  }
  return out;
}

Profile random_base(Rng& rng, int max) {
  Profile p{};
  for (int& h : p) h = static_cast<int>(rng.below(max + 1));
  return p;
}

const ScenarioFile& residential() {
  static const ScenarioFile f = load_scenario(default_data_dir() / "residential.json");
  return f;
}

}  // namespace

TEST_CASE("no blocks returns the base") {
  Profile base{};
  base[17] = 6;
  base[3] = 2;
  for (auto obj : {OracleObjective::MinPeak, OracleObjective::MinCost, OracleObjective::PeakThenCost}) {
    const auto s = solve(base, {}, obj, kTou);
    CHECK(s.assignments.empty());
    CHECK(s.peak_kw == 3.0);
    CHECK(s.daily_cost_cents == daily_cost(base, kTou).cents());
    CHECK(s.quality == SolverQuality::Exact);
  }
}

TEST_CASE("one cell at minimum cost sits off-peak") {
  const auto s = solve(Profile{}, {LoadBlock{"x", {1}, 0}}, OracleObjective::MinCost, kTou);
  CHECK(s.daily_cost_cents == 3.0);
  const int h = s.assignments.at("x");
  CHECK(price_at_hour(kTou, h) == 6);
  CHECK(h == 0);  // lowest start-hour sum among the cheapest hours
}

TEST_CASE("shipped consumers: branch and bound against enumeration") {
  for (const auto& c : residential().consumers) {
    CAPTURE(c.consumer_id);
    const auto p = to_blocks(c);
    const auto want = enumerate(p.base_profile, p.blocks);
    const auto peak = solve(p.base_profile, p.blocks, OracleObjective::MinPeak, kTou);
    const auto cost = solve(p.base_profile, p.blocks, OracleObjective::MinCost, kTou);
    const auto both = solve(p.base_profile, p.blocks, OracleObjective::PeakThenCost, kTou);
    CHECK(peak.peak_kw == cells_to_kw(want.peak));
    CHECK(cost.daily_cost_cents * 2 == static_cast<double>(want.cost));
    CHECK(both.peak_kw == cells_to_kw(want.peak_then_cost_peak));
    CHECK(both.daily_cost_cents * 2 == static_cast<double>(want.peak_then_cost_cost));
    CHECK(both.peak_kw == peak.peak_kw);
    CHECK(cost.daily_cost_cents <= both.daily_cost_cents);
    for (const auto* s : {&peak, &cost, &both}) CHECK(verify(*s, p.base_profile, p.blocks, kTou).ok);
  }
}

TEST_CASE("consumer 1 minimum peak is 2 kW") {
  const auto p = to_blocks(residential().consumer("1"));
  CHECK(solve(p.base_profile, p.blocks, OracleObjective::MinPeak, kTou).peak_kw == 2.0);
}

TEST_CASE("random small instances match brute force exactly") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const auto blocks = random_blocks(rng, 1 + rng.below(4));
    const Profile base = random_base(rng, 8);
    const int cap = 8 + static_cast<int>(rng.below(6));
    OracleOptions opt;
    opt.max_height = cap;
    const auto want = enumerate(base, blocks, cap);
    for (auto obj : {OracleObjective::MinPeak, OracleObjective::MinCost, OracleObjective::PeakThenCost}) {
      CAPTURE(trial);
      CAPTURE(to_string(obj));
      if (want.peak == std::numeric_limits<int>::max()) {
        CHECK_THROWS_AS(solve(base, blocks, obj, kTou, opt), InfeasibleError);
        continue;
      }
      const auto fast = solve(base, blocks, obj, kTou, opt);
      const auto slow = brute_force(base, blocks, obj, kTou, cap);
      CHECK(fast.assignments == slow.assignments);
      if (obj == OracleObjective::MinPeak) CHECK(fast.peak_kw == cells_to_kw(want.peak));
      if (obj == OracleObjective::MinCost) CHECK(fast.daily_cost_cents * 2 == static_cast<double>(want.cost));
      CHECK(verify(fast, base, blocks, kTou, cap).ok);
    }
  }
}

TEST_CASE("ties go to the lowest start-hour sum") {
  // Two identical 1-cell blocks on a flat base: every placement has peak 1
  // apart from stacking, so the optimum puts them at hours 0 and 1.
  const std::vector<LoadBlock> blocks{{"b", {1}, 0}, {"a", {1}, 0}};
  const auto s = solve(Profile{}, blocks, OracleObjective::MinPeak, kTou);
  CHECK(s.peak_kw == 0.5);
  CHECK(s.assignments.at("a") == 0);
  CHECK(s.assignments.at("b") == 1);
}

TEST_CASE("no random placement beats the oracle") {
  Rng rng(41);
  for (const auto& c : residential().consumers) {
    const auto p = to_blocks(c);
    const auto peak = solve(p.base_profile, p.blocks, OracleObjective::MinPeak, kTou);
    const auto cost = solve(p.base_profile, p.blocks, OracleObjective::MinCost, kTou);
    for (int trial = 0; trial < 500; ++trial) {
      std::map<std::string, int> hours;
      for (const auto& b : p.blocks) hours[b.name] = static_cast<int>(rng.below(b.max_position() + 1));
      const auto s = make_schedule(p.base_profile, p.blocks, hours, kTou);
      CHECK(s.peak_kw >= peak.peak_kw);
      CHECK(s.daily_cost_cents >= cost.daily_cost_cents);
    }
  }
}

TEST_CASE("infeasible instances") {
  Profile full{};
  full.fill(50);
  CHECK_THROWS_AS(solve(full, {LoadBlock{"x", {1}, 0}}, OracleObjective::MinPeak, kTou),
                  InfeasibleError);
  CHECK_THROWS_AS(solve(Profile{}, {LoadBlock{"x", {51}, 0}}, OracleObjective::MinCost, kTou),
                  InfeasibleError);
  // each block fits alone, but not both together
  Profile base{};
  base.fill(48);
  OracleOptions opt;
  CHECK_THROWS_AS(solve(base, {LoadBlock{"a", std::vector<int>(24, 2), 0},
                               LoadBlock{"b", {1}, 0}},
                        OracleObjective::MinPeak, kTou, opt),
                  InfeasibleError);
  CHECK_THROWS_AS(solve(Profile{}, {LoadBlock{"a", {1}, 0}, LoadBlock{"a", {2}, 0}},
                        OracleObjective::MinPeak, kTou),
                  Error);
}

TEST_CASE("verify") {
  const auto p = to_blocks(residential().consumer("2"));
  const auto s = solve(p.base_profile, p.blocks, OracleObjective::PeakThenCost, kTou);
  const auto ok = verify(s, p.base_profile, p.blocks, kTou);
  CHECK(ok.ok);
  CHECK(ok.problems.empty());
  CHECK(ok.profile == s.resulting_profile);

  auto tampered = s;
  tampered.peak_kw += 0.5;
  CHECK_FALSE(verify(tampered, p.base_profile, p.blocks, kTou).ok);

  tampered = s;
  tampered.daily_cost_cents -= 1.0;
  CHECK_FALSE(verify(tampered, p.base_profile, p.blocks, kTou).ok);

  tampered = s;
  tampered.resulting_profile[0] += 1;
  CHECK_FALSE(verify(tampered, p.base_profile, p.blocks, kTou).ok);

  tampered = s;
  tampered.assignments.begin()->second = 24;
  CHECK_FALSE(verify(tampered, p.base_profile, p.blocks, kTou).ok);

  tampered = s;
  tampered.assignments.erase(tampered.assignments.begin());
  CHECK_FALSE(verify(tampered, p.base_profile, p.blocks, kTou).ok);

  tampered = s;
  tampered.assignments["toaster"] = 3;
  CHECK_FALSE(verify(tampered, p.base_profile, p.blocks, kTou).ok);

  CHECK_FALSE(verify(s, p.base_profile, p.blocks, kTou, 3).ok);  // over a lower cap
}

TEST_CASE("large instances fall back to beam search") {
  const auto all = aggregate(residential().consumers);
  const auto p = to_blocks(all);
  REQUIRE(p.blocks.size() > 12);
  OracleOptions opt;
  opt.beam_width = 64;
  const auto s = solve(p.base_profile, p.blocks, OracleObjective::MinPeak, kTou, opt);
  CHECK(s.quality == SolverQuality::Heuristic);
  CHECK(s.assignments.size() == p.blocks.size());
  CHECK(verify(s, p.base_profile, p.blocks, kTou).ok);
  // never below the tallest column any single placement must create
  int bound = profile_peak(p.base_profile);
  CHECK(s.peak_kw >= cells_to_kw(bound));

  opt.exhaustive_limit = 3;
  const auto c1 = to_blocks(residential().consumer("1"));
  const auto h = solve(c1.base_profile, c1.blocks, OracleObjective::MinPeak, kTou, opt);
  CHECK(h.quality == SolverQuality::Heuristic);
  CHECK(h.peak_kw >= 2.0);
}

TEST_CASE("schedule CSV round trip") {
  const auto p = to_blocks(residential().consumer("3"));
  auto s = solve(p.base_profile, p.blocks, OracleObjective::MinPeak, kTou);
  std::stringstream buf;
  write_schedule_csv(buf, s);
  CHECK(buf.str().rfind("appliance,start_hour,quality\n", 0) == 0);
  const auto back = read_schedule_csv(buf);
  CHECK(back.assignments == s.assignments);
  CHECK(back.quality == SolverQuality::Exact);

  s.quality.reset();
  std::stringstream plain;
  write_schedule_csv(plain, s);
  CHECK(plain.str().rfind("appliance,start_hour\n", 0) == 0);
  CHECK_FALSE(read_schedule_csv(plain).quality);

  std::stringstream junk("appliance,start_hour\nwasher,noon\n");
  CHECK_THROWS_AS(read_schedule_csv(junk), Error);
}

TEST_CASE("objective names") {
  CHECK(parse_oracle_objective("min_peak") == OracleObjective::MinPeak);
  CHECK(parse_oracle_objective("peak") == OracleObjective::MinPeak);
  CHECK(parse_oracle_objective("cost") == OracleObjective::MinCost);
  CHECK(parse_oracle_objective("peak_then_cost") == OracleObjective::PeakThenCost);
  CHECK(parse_oracle_objective("peak-cost") == OracleObjective::PeakThenCost);
  CHECK_THROWS_AS(parse_oracle_objective("fast"), Error);
}
