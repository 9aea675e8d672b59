#include "rldsm/placement.hpp"

#include <cstdlib>
#include <fstream>

namespace rldsm {

DefaultPlacement parse_placement(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("consumers") || !doc["consumers"].is_object())
    throw ScenarioError("consumers", "placement file needs a \"consumers\" object");
  DefaultPlacement out;
  for (const auto& [cid, apps] : doc["consumers"].items()) {
    if (!apps.is_object()) throw ScenarioError("consumers." + cid, "expected an object");
    for (const auto& [name, start] : apps.items()) {
      const std::string field = "consumers." + cid + "." + name;
      if (!start.is_number_integer()) throw ScenarioError(field, "start hour must be an integer");
      const int h = start.get<int>();
      if (h < 0 || h >= kHoursPerDay) throw ScenarioError(field, "start hour must be in 0..23");
      out.consumers[cid][name] = h;
    }
  }
  return out;
}

DefaultPlacement load_placement(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string(), "cannot open placement file");
  try {
    return parse_placement(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(path.string(), std::string("parse failure: ") + e.what());
  }
}

std::map<std::string, int> placement_for(const DefaultPlacement& placement,
                                         const ConsumerScenario& scenario) {
  std::map<std::string, int> out;
  for (const auto& a : scenario.appliances) {
    if (!a.shiftable) continue;
    std::string cid = scenario.consumer_id, name = a.name;
    if (const auto slash = a.name.find('/'); slash != std::string::npos) {
      cid = a.name.substr(0, slash);
      name = a.name.substr(slash + 1);
    }
    auto c = placement.consumers.find(cid);
    if (c == placement.consumers.end())
      throw ScenarioError("consumers." + cid, "no default placement for consumer");
    auto it = c->second.find(name);
    if (it == c->second.end())
      throw ScenarioError("consumers." + cid + "." + name, "no default start hour");
    if (it->second + a.duration() > kHoursPerDay)
      throw ScenarioError("consumers." + cid + "." + name, "load runs past midnight");
    out[a.name] = it->second;
  }
  return out;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("RLDSM_DATA_DIR")) return env;
  return RLDSM_DATA_DIR;
}

}  // namespace rldsm
