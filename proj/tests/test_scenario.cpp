#include <doctest.h>

#include <set>

#include <nlohmann/json.hpp>

#include "rldsm/placement.hpp"
#include "rldsm/rng.hpp"
#include "rldsm/scenario.hpp"

using namespace rldsm;
using nlohmann::json;

namespace {

json tariff_json() {
  return json::array({{{"start", 0}, {"end", 6}, {"cents_per_kwh", 6}},
                      {{"start", 6}, {"end", 15}, {"cents_per_kwh", 9}},
                      {{"start", 15}, {"end", 22}, {"cents_per_kwh", 15}},
                      {{"start", 22}, {"end", 24}, {"cents_per_kwh", 6}}});
}

json appliance(const std::string& name, std::vector<double> kw, bool shiftable, int start = 0) {
  json a = {{"name", name}, {"powers_kw", kw}, {"shiftable", shiftable}};
  if (!shiftable) a["preferred_start"] = start;
  return a;
}

json doc_with(json appliances) {
  return {{"tariff", tariff_json()},
          {"consumers", json::array({{{"id", "x"}, {"appliances", std::move(appliances)}}})}};
}

std::string error_field(const json& doc) {
  try {
    parse_scenario(doc);
  } catch (const ScenarioError& e) {
    return e.field();
  }
  return "<no error>";
}

const ScenarioFile& residential() {
  static const ScenarioFile f = load_scenario(default_data_dir() / "residential.json");
  return f;
}

int total_cells(const ConsumerScenario& c) {
  int n = 0;
  for (const auto& a : c.appliances)
    for (int x : a.cells()) n += x;
  return n;
}

}  // namespace

TEST_CASE("refrigerator spans the whole day at 0.5 kW") {
  const auto& c1 = residential().consumer("1");
  const auto* fridge = c1.find("refrigerator");
  REQUIRE(fridge);
  CHECK(fridge->duration() == 24);
  CHECK_FALSE(fridge->shiftable);
  for (double p : fridge->hourly_powers) CHECK(p == 0.5);
}

TEST_CASE("washing machine keeps its two-step power profile") {
  const auto* wm = residential().consumer("1").find("washing_machine");
  REQUIRE(wm);
  CHECK(wm->hourly_powers == std::vector<double>{1.0, 0.5});
  CHECK(wm->shiftable);
  CHECK(wm->cells() == std::vector<int>{2, 1});
}

TEST_CASE("off-lattice power is rejected with its field path") {
  auto doc = doc_with(json::array({appliance("kettle", {0.5, 0.3}, true)}));
  CHECK(error_field(doc) == "consumers[0].appliances[0].powers_kw[1]");
  CHECK_THROWS_AS(kw_to_cells(0.3), ScenarioError);
  CHECK_THROWS_AS(kw_to_cells(0.0), ScenarioError);
  CHECK_THROWS_AS(kw_to_cells(-1.0), ScenarioError);
  CHECK(kw_to_cells(1.5) == 3);
}

TEST_CASE("tariff gaps and overlaps are rejected") {
  auto gap = doc_with(json::array({appliance("a", {0.5}, true)}));
  gap["tariff"][1]["start"] = 7;
  CHECK(error_field(gap).rfind("tariff", 0) == 0);

  auto overlap = doc_with(json::array({appliance("a", {0.5}, true)}));
  overlap["tariff"][1]["start"] = 5;
  CHECK(error_field(overlap).rfind("tariff", 0) == 0);

  auto short_day = doc_with(json::array({appliance("a", {0.5}, true)}));
  short_day["tariff"][3]["end"] = 23;
  CHECK(error_field(short_day) == "tariff");

  auto free = doc_with(json::array({appliance("a", {0.5}, true)}));
  free["tariff"][0]["cents_per_kwh"] = 0;
  CHECK(error_field(free) == "tariff[0].cents_per_kwh");
}

TEST_CASE("duration and window violations are rejected") {
  CHECK(error_field(doc_with(json::array({appliance("a", {}, true)}))) ==
        "consumers[0].appliances[0].powers_kw");
  CHECK(error_field(doc_with(json::array({appliance("late", {0.5, 0.5}, false, 23)}))) ==
        "consumers[0].appliances[0].preferred_start");
  CHECK(error_field(doc_with(json::array({appliance("a", {0.5}, true),
                                          appliance("a", {1.0}, true)}))) ==
        "consumers[0].appliances[1].name");
  CHECK(error_field(doc_with(json::array())) == "consumers[0].appliances");
  CHECK(error_field(json{{"consumers", json::array()}}) == "tariff");
  CHECK(error_field(json::array()) == "$");
}

TEST_CASE("parse and to_json round-trip") {
  const auto& f = residential();
  const auto again = parse_scenario(to_json(f));
  REQUIRE(again.consumers.size() == f.consumers.size());
  for (std::size_t i = 0; i < f.consumers.size(); ++i) {
    CHECK(again.consumers[i].consumer_id == f.consumers[i].consumer_id);
    CHECK(total_cells(again.consumers[i]) == total_cells(f.consumers[i]));
  }
}

TEST_CASE("AC lands in the consumer 1 base profile at hour 13") {
  const auto blocks = to_blocks(residential().consumer("1"));
  CHECK(blocks.base_profile[13] == 4);  // refrigerator 1 + AC 3
  CHECK(blocks.blocks.size() == 4);
}

TEST_CASE("shiftable-only scenario has an empty base") {
  ConsumerScenario c{"s", {{"a", {1.0, 0.5}, true, 0}, {"b", {0.5}, true, 0}}};
  const auto blocks = to_blocks(c);
  CHECK(profile_total(blocks.base_profile) == 0);
  REQUIRE(blocks.blocks.size() == 2);
  CHECK(blocks.blocks[0].column_cells == std::vector<int>{2, 1});
}

TEST_CASE("aggregation") {
  const auto& consumers = residential().consumers;
  SUBCASE("singleton is unchanged") {
    const auto one = aggregate(std::span(consumers.data(), 1));
    CHECK(one.consumer_id == "1");
    CHECK(one.appliances.size() == consumers[0].appliances.size());
    CHECK(one.appliances[0].name == consumers[0].appliances[0].name);
  }
  SUBCASE("five refrigerators make a 2.5 kW floor") {
    const auto all = aggregate(consumers);
    REQUIRE(consumers.size() == 5);
    int fridges = 0;
    Profile fridge_load{};
    for (const auto& a : all.appliances)
      if (a.name.ends_with("/refrigerator")) {
        ++fridges;
        for (int h = 0; h < 24; ++h) fridge_load[h] += kw_to_cells(a.hourly_powers[h]);
      }
    CHECK(fridges == 5);
    for (int h = 0; h < 24; ++h) CHECK(cells_to_kw(fridge_load[h]) == 2.5);
    CHECK(all.find("3/cloth_dryer") != nullptr);
  }
  SUBCASE("empty list is an error") {
    CHECK_THROWS_AS(aggregate(std::span<const ConsumerScenario>{}), Error);
  }
}

TEST_CASE("blocks plus base conserve energy") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    ConsumerScenario c{"r", {}};
    const int n = 1 + static_cast<int>(rng.below(8));
    for (int i = 0; i < n; ++i) {
      AppliancePowerProfile a;
      a.name = "a" + std::to_string(i);
      const int d = 1 + static_cast<int>(rng.below(6));
      for (int h = 0; h < d; ++h) a.hourly_powers.push_back(0.5 * (1 + rng.below(4)));
      a.shiftable = rng.below(2) == 0;
      a.preferred_start = a.shiftable ? 0 : static_cast<int>(rng.below(24 - d + 1));
      c.appliances.push_back(a);
    }
    validate(c);
    const auto b = to_blocks(c);
    int cells = profile_total(b.base_profile);
    for (const auto& blk : b.blocks) cells += blk.total_cells();
    CHECK(cells * kKwPerCell == doctest::Approx(c.energy_kwh()));
  }
}

TEST_CASE("aggregate energy is the sum of member energies") {
  const auto& consumers = residential().consumers;
  double sum = 0.0;
  int cells = 0;
  for (const auto& c : consumers) {
    sum += c.energy_kwh();
    cells += total_cells(c);
  }
  const auto all = aggregate(consumers);
  CHECK(all.energy_kwh() == doctest::Approx(sum));
  CHECK(total_cells(all) == cells);
}

TEST_CASE("shipped files agree with each other") {
  const auto dir = default_data_dir();
  for (int i = 1; i <= 5; ++i) {
    const auto single = load_scenario(dir / ("consumer" + std::to_string(i) + ".json"));
    REQUIRE(single.consumers.size() == 1);
    const auto& c = residential().consumer(std::to_string(i));
    CHECK(single.consumers[0].consumer_id == c.consumer_id);
    CHECK(total_cells(single.consumers[0]) == total_cells(c));
  }
  const auto scal = load_scenario(dir / "scalability.json");
  REQUIRE(scal.consumers.size() == 1);
  std::set<std::string> kinds;
  for (const auto& a : scal.consumers[0].appliances) kinds.insert(a.name.substr(0, a.name.rfind('_')));
  CHECK(scal.consumers[0].appliances.size() == 46);
  CHECK(kinds.size() == 14);
}

TEST_CASE("missing file reports its path") {
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ScenarioError);
}
