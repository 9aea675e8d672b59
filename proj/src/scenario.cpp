#include "rldsm/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rldsm {

namespace {

std::string index_path(const std::string& base, const char* key, std::size_t i) {
  std::ostringstream os;
  os << base << '.' << key << '[' << i << ']';
  return os.str();
}

template <typename T>
T require(const nlohmann::json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ScenarioError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ScenarioError(path + "." + key, "missing field");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(path + "." + key, std::string("wrong type (") + e.what() + ")");
  }
}

int require_int(const nlohmann::json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ScenarioError(path + "." + key, "missing field");
  if (!it->is_number()) throw ScenarioError(path + "." + key, "expected a number");
  const double v = it->get<double>();
  if (v != std::floor(v)) throw ScenarioError(path + "." + key, "expected an integer");
  return static_cast<int>(v);
}

}  // namespace

int kw_to_cells(double kw, const std::string& field) {
  if (!std::isfinite(kw) || kw <= 0.0)
    throw ScenarioError(field, "power must be positive");
  const double cells = kw / kKwPerCell;
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) > 1e-9)
    throw ScenarioError(field, "power " + std::to_string(kw) +
                                   " kW is not a multiple of 0.5 kW");
  return static_cast<int>(rounded);
}

std::vector<int> AppliancePowerProfile::cells() const {
  std::vector<int> out;
  out.reserve(hourly_powers.size());
  for (double p : hourly_powers) out.push_back(kw_to_cells(p));
  return out;
}

double AppliancePowerProfile::energy_kwh() const {
  double e = 0.0;
  for (double p : hourly_powers) e += p;
  return e;
}

const AppliancePowerProfile* ConsumerScenario::find(const std::string& name) const {
  for (const auto& a : appliances)
    if (a.name == name) return &a;
  return nullptr;
}

double ConsumerScenario::energy_kwh() const {
  double e = 0.0;
  for (const auto& a : appliances) e += a.energy_kwh();
  return e;
}

const ConsumerScenario& ScenarioFile::consumer(const std::string& id) const {
  for (const auto& c : consumers)
    if (c.consumer_id == id) return c;
  throw ScenarioError("consumers", "no consumer with id '" + id + "'");
}

void validate(const AppliancePowerProfile& a, const std::string& field) {
  if (a.name.empty()) throw ScenarioError(field + ".name", "empty appliance name");
  if (a.duration() < 1 || a.duration() > kHoursPerDay)
    throw ScenarioError(field + ".powers_kw", "duration must be between 1 and 24 hours");
  for (std::size_t i = 0; i < a.hourly_powers.size(); ++i)
    kw_to_cells(a.hourly_powers[i], index_path(field, "powers_kw", i));
  if (!a.shiftable) {
    if (a.preferred_start < 0 || a.preferred_start >= kHoursPerDay)
      throw ScenarioError(field + ".preferred_start", "must be an hour in 0..23");
    if (a.preferred_start + a.duration() > kHoursPerDay)
      throw ScenarioError(field + ".preferred_start",
                          "window runs past midnight; wrap-around loads are not supported");
  }
}

void validate(const ConsumerScenario& c, const std::string& field) {
  if (c.consumer_id.empty()) throw ScenarioError(field + ".id", "empty consumer id");
  if (c.appliances.empty()) throw ScenarioError(field + ".appliances", "no appliances");
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.appliances.size(); ++i) {
    const auto path = index_path(field, "appliances", i);
    validate(c.appliances[i], path);
    if (!names.insert(c.appliances[i].name).second)
      throw ScenarioError(path + ".name", "duplicate appliance name '" + c.appliances[i].name + "'");
  }
}

void validate(const Tariff& t, const std::string& field) {
  if (t.bands.empty()) throw ScenarioError(field, "no tariff bands");
  int expected_start = 0;
  for (std::size_t i = 0; i < t.bands.size(); ++i) {
    const auto& b = t.bands[i];
    std::ostringstream path;
    path << field << '[' << i << ']';
    if (b.start_hour < expected_start)
      throw ScenarioError(path.str() + ".start", "band overlaps the previous band");
    if (b.start_hour > expected_start)
      throw ScenarioError(path.str() + ".start",
                          "gap before hour " + std::to_string(b.start_hour));
    if (b.end_hour <= b.start_hour || b.end_hour > kHoursPerDay)
      throw ScenarioError(path.str() + ".end", "band end must be in (start, 24]");
    if (b.cents_per_kwh <= 0)
      throw ScenarioError(path.str() + ".cents_per_kwh", "price must be positive");
    expected_start = b.end_hour;
  }
  if (expected_start != kHoursPerDay)
    throw ScenarioError(field, "bands end at hour " + std::to_string(expected_start) +
                                   ", not 24");
}

ScenarioFile parse_scenario(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ScenarioError("$", "expected a JSON object");
  ScenarioFile out;

  auto tariff_it = doc.find("tariff");
  if (tariff_it == doc.end()) throw ScenarioError("tariff", "missing field");
  if (!tariff_it->is_array()) throw ScenarioError("tariff", "expected an array");
  for (std::size_t i = 0; i < tariff_it->size(); ++i) {
    const auto& j = (*tariff_it)[i];
    const std::string path = "tariff[" + std::to_string(i) + "]";
    if (!j.is_object()) throw ScenarioError(path, "expected an object");
    out.tariff.bands.push_back({require_int(j, "start", path), require_int(j, "end", path),
                                require_int(j, "cents_per_kwh", path)});
  }
  validate(out.tariff);

  auto consumers_it = doc.find("consumers");
  if (consumers_it == doc.end()) return out;
  if (!consumers_it->is_array()) throw ScenarioError("consumers", "expected an array");
  std::set<std::string> ids;
  for (std::size_t ci = 0; ci < consumers_it->size(); ++ci) {
    const auto& cj = (*consumers_it)[ci];
    const std::string cpath = "consumers[" + std::to_string(ci) + "]";
    ConsumerScenario c;
    c.consumer_id = require<std::string>(cj, "id", cpath);
    auto apps = cj.find("appliances");
    if (apps == cj.end() || !apps->is_array())
      throw ScenarioError(cpath + ".appliances", "expected an array");
    for (std::size_t ai = 0; ai < apps->size(); ++ai) {
      const auto& aj = (*apps)[ai];
      const std::string apath = index_path(cpath, "appliances", ai);
      AppliancePowerProfile a;
      a.name = require<std::string>(aj, "name", apath);
      a.hourly_powers = require<std::vector<double>>(aj, "powers_kw", apath);
      a.shiftable = require<bool>(aj, "shiftable", apath);
      if (!a.shiftable)
        a.preferred_start = require_int(aj, "preferred_start", apath);
      else if (aj.contains("preferred_start"))
        a.preferred_start = require_int(aj, "preferred_start", apath);
      c.appliances.push_back(std::move(a));
    }
    validate(c, cpath);
    if (!ids.insert(c.consumer_id).second)
      throw ScenarioError(cpath + ".id", "duplicate consumer id '" + c.consumer_id + "'");
    out.consumers.push_back(std::move(c));
  }
  return out;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string(), "cannot open scenario file");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(path.string(), std::string("parse failure: ") + e.what());
  }
  return parse_scenario(doc);
}

nlohmann::json to_json(const ScenarioFile& file) {
  nlohmann::json doc;
  doc["tariff"] = nlohmann::json::array();
  for (const auto& b : file.tariff.bands)
    doc["tariff"].push_back(
        {{"start", b.start_hour}, {"end", b.end_hour}, {"cents_per_kwh", b.cents_per_kwh}});
  doc["consumers"] = nlohmann::json::array();
  for (const auto& c : file.consumers) {
    nlohmann::json cj{{"id", c.consumer_id}, {"appliances", nlohmann::json::array()}};
    for (const auto& a : c.appliances) {
      nlohmann::json aj{{"name", a.name}, {"powers_kw", a.hourly_powers}, {"shiftable", a.shiftable}};
      if (!a.shiftable) aj["preferred_start"] = a.preferred_start;
      cj["appliances"].push_back(std::move(aj));
    }
    doc["consumers"].push_back(std::move(cj));
  }
  return doc;
}

BlockSet to_blocks(const ConsumerScenario& scenario) {
  BlockSet out;
  for (const auto& a : scenario.appliances) {
    const auto cells = a.cells();
    if (a.shiftable) {
      out.blocks.push_back(LoadBlock{a.name, cells, 0});
    } else {
      for (std::size_t i = 0; i < cells.size(); ++i)
        out.base_profile[a.preferred_start + i] += cells[i];
    }
  }
  return out;
}

ConsumerScenario aggregate(std::span<const ConsumerScenario> scenarios) {
  if (scenarios.empty()) throw Error("aggregate: empty list of consumers");
  if (scenarios.size() == 1) return scenarios.front();
  ConsumerScenario out;
  out.consumer_id = "aggregate";
  for (const auto& c : scenarios)
    for (auto a : c.appliances) {
      a.name = c.consumer_id + "/" + a.name;
      out.appliances.push_back(std::move(a));
    }
  return out;
}

}  // namespace rldsm
