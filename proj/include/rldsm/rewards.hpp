#pragma once

#include <string>

#include "rldsm/billing.hpp"
#include "rldsm/env.hpp"

namespace rldsm {

enum class SpreadKind { Variance, StdDev };
enum class Objective { Peak, PeakCost };

/// Reward weights. Heights are measured in cells and cost in cents; the
/// defaults are the published weights applied to those units.
struct RewardConfig {
  double alpha1 = 10.0;  // spread
  double alpha2 = 0.76;  // complete lines
  double alpha3 = 0.5;   // peak height
  double alpha4 = 0.2;   // incremental cost, peak_cost objective only
  SpreadKind spread = SpreadKind::Variance;
  Objective objective = Objective::Peak;
};

/// Signed contributions; `total` is their sum.
struct RewardBreakdown {
  double spread_term = 0.0;  // +alpha1 * spread
  double lines_term = 0.0;   // +alpha2 * lines
  double height_term = 0.0;  // -alpha3 * h_max
  double cost_term = 0.0;    // -alpha4 * c
  double total = 0.0;
};

/// 1 / (1 + var) or 1 / (1 + std) of the 24 column heights (population).
double spread_term(const Profile& heights, SpreadKind kind);

/// Rows filled across all 24 columns. Lines are never cleared.
int complete_lines(const Profile& heights);

/// Overflowing settles get -alpha3 * grid_cap instead of the shaped reward.
RewardBreakdown compute_reward(const SettleReport& report, const RewardConfig& config,
                               const HourlyPrices& prices);
RewardBreakdown compute_reward(const SettleReport& report, const RewardConfig& config,
                               const Tariff& tariff);

const char* to_string(SpreadKind k);
const char* to_string(Objective o);
SpreadKind parse_spread_kind(const std::string& s);
Objective parse_objective(const std::string& s);

}  // namespace rldsm
