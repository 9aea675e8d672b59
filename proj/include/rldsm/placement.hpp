#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "rldsm/scenario.hpp"

namespace rldsm {

/// Start hours of shiftable loads before any rescheduling, per consumer.
struct DefaultPlacement {
  std::map<std::string, std::map<std::string, int>> consumers;
};

DefaultPlacement parse_placement(const nlohmann::json& doc);
DefaultPlacement load_placement(const std::filesystem::path& path);

/// Start hours for every shiftable appliance of `scenario`. Aggregate names
/// of the form "<consumer_id>/<name>" resolve through their consumer entry.
/// Throws ScenarioError when an appliance has no entry.
std::map<std::string, int> placement_for(const DefaultPlacement& placement,
                                         const ConsumerScenario& scenario);

std::filesystem::path default_data_dir();

}  // namespace rldsm
