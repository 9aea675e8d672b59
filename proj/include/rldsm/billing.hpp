#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "rldsm/grid.hpp"
#include "rldsm/scenario.hpp"

namespace rldsm {

inline constexpr int kDaysPerMonth = 30;

/// Exact cost unit. A cell held for one hour is 0.5 kWh, so cells times an
/// integer cents/kWh price is always a whole number of half-cents.
struct HalfCents {
  std::int64_t value = 0;

  double cents() const { return static_cast<double>(value) / 2.0; }
  HalfCents& operator+=(HalfCents o) {
    value += o.value;
    return *this;
  }
  friend HalfCents operator+(HalfCents a, HalfCents b) { return {a.value + b.value}; }
  friend HalfCents operator-(HalfCents a, HalfCents b) { return {a.value - b.value}; }
  friend auto operator<=>(HalfCents, HalfCents) = default;
};

using HourlyPrices = std::array<int, kHoursPerDay>;

struct BillReport {
  double daily_cost = 0.0;    // cents
  double monthly_cost = 0.0;  // dollars, 30 identical days
  std::array<double, kHoursPerDay> per_hour_cost{};  // cents
};

/// Price in cents/kWh; throws std::out_of_range for hours outside 0..23.
int price_at_hour(const Tariff& tariff, int hour);
HourlyPrices hourly_prices(const Tariff& tariff);

HalfCents daily_cost(const Profile& profile, const Tariff& tariff);
HalfCents daily_cost(const Profile& profile, const HourlyPrices& prices);

/// Cost of the block alone when its first column sits at `placed_at`.
/// Throws std::out_of_range if the block runs past hour 24.
HalfCents incremental_cost(const LoadBlock& block, int placed_at, const Tariff& tariff);
HalfCents incremental_cost(const LoadBlock& block, int placed_at, const HourlyPrices& prices);

BillReport bill(const Profile& profile, const Tariff& tariff);

inline double monthly_dollars(HalfCents daily) {
  return daily.cents() * kDaysPerMonth / 100.0;
}

/// Two-decimal dollar string, e.g. "81.00".
std::string format_dollars(double dollars);

}  // namespace rldsm
