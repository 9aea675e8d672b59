#include "rldsm/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace rldsm {

double spread_term(const Profile& heights, SpreadKind kind) {
  double mean = 0.0;
  for (int h : heights) mean += h;
  mean /= kHoursPerDay;
  double var = 0.0;
  for (int h : heights) var += (h - mean) * (h - mean);
  var /= kHoursPerDay;
  const double spread = kind == SpreadKind::Variance ? var : std::sqrt(var);
  return 1.0 / (1.0 + spread);
}

int complete_lines(const Profile& heights) {
  return std::max(0, *std::min_element(heights.begin(), heights.end()));
}

RewardBreakdown compute_reward(const SettleReport& report, const RewardConfig& config,
                               const HourlyPrices& prices) {
  RewardBreakdown r;
  if (report.overflow) {
    r.height_term = -config.alpha3 * report.grid_cap;
    r.total = r.height_term;
    return r;
  }
  r.spread_term = config.alpha1 * spread_term(report.heights_after, config.spread);
  r.lines_term = config.alpha2 * complete_lines(report.heights_after);
  r.height_term = -config.alpha3 * profile_peak(report.heights_after);
  if (config.objective == Objective::PeakCost) {
    const double cents = incremental_cost(report.block, report.block.position, prices).cents();
    r.cost_term = -config.alpha4 * cents;
  }
  r.total = r.spread_term + r.lines_term + r.height_term + r.cost_term;
  return r;
}

RewardBreakdown compute_reward(const SettleReport& report, const RewardConfig& config,
                               const Tariff& tariff) {
  return compute_reward(report, config, hourly_prices(tariff));
}

const char* to_string(SpreadKind k) { return k == SpreadKind::Variance ? "var" : "std"; }
const char* to_string(Objective o) { return o == Objective::Peak ? "peak" : "peak-cost"; }

SpreadKind parse_spread_kind(const std::string& s) {
  if (s == "var" || s == "variance") return SpreadKind::Variance;
  if (s == "std" || s == "stddev") return SpreadKind::StdDev;
  throw Error("unknown spread kind '" + s + "' (expected var or std)");
}

Objective parse_objective(const std::string& s) {
  if (s == "peak") return Objective::Peak;
  if (s == "peak-cost" || s == "peak_cost") return Objective::PeakCost;
  throw Error("unknown objective '" + s + "' (expected peak or peak-cost)");
}

}  // namespace rldsm
