#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rldsm/grid.hpp"

namespace rldsm {

/// Raised for malformed scenario data. `field()` is a JSON-path style
/// location such as `consumers[0].appliances[2].powers_kw[1]`.
class ScenarioError : public Error {
 public:
  ScenarioError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct AppliancePowerProfile {
  std::string name;
  std::vector<double> hourly_powers;  // kW, one entry per operating hour
  bool shiftable = false;
  int preferred_start = 0;  // meaningful for non-shiftable loads only

  int duration() const { return static_cast<int>(hourly_powers.size()); }
  /// Per-hour cell counts. Assumes the profile was validated.
  std::vector<int> cells() const;
  double energy_kwh() const;
};

struct ConsumerScenario {
  std::string consumer_id;
  std::vector<AppliancePowerProfile> appliances;

  const AppliancePowerProfile* find(const std::string& name) const;
  double energy_kwh() const;
};

struct TariffBand {
  int start_hour = 0;  // inclusive
  int end_hour = 0;    // exclusive
  int cents_per_kwh = 0;
};

struct Tariff {
  std::vector<TariffBand> bands;
};

struct ScenarioFile {
  Tariff tariff;
  std::vector<ConsumerScenario> consumers;

  const ConsumerScenario& consumer(const std::string& id) const;
};

/// Base profile plus the shiftable blocks a scenario turns into.
struct BlockSet {
  Profile base_profile{};
  std::vector<LoadBlock> blocks;
};

/// Converts kW to cells; throws ScenarioError (with `field`) off the lattice.
int kw_to_cells(double kw, const std::string& field = "power");

void validate(const AppliancePowerProfile& a, const std::string& field = "appliance");
void validate(const ConsumerScenario& c, const std::string& field = "consumer");
void validate(const Tariff& t, const std::string& field = "tariff");

ScenarioFile parse_scenario(const nlohmann::json& doc);
ScenarioFile load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioFile& file);

BlockSet to_blocks(const ConsumerScenario& scenario);

/// Concatenates all appliances into one scenario named "aggregate";
/// appliance names become "<consumer_id>/<name>".
ConsumerScenario aggregate(std::span<const ConsumerScenario> scenarios);

}  // namespace rldsm
