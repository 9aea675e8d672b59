#include "rldsm/billing.hpp"

#include <cstdio>
#include <stdexcept>

namespace rldsm {

int price_at_hour(const Tariff& tariff, int hour) {
  if (hour < 0 || hour >= kHoursPerDay)
    throw std::out_of_range("hour " + std::to_string(hour) + " outside 0..23");
  for (const auto& b : tariff.bands)
    if (hour >= b.start_hour && hour < b.end_hour) return b.cents_per_kwh;
  throw std::out_of_range("tariff does not cover hour " + std::to_string(hour));
}

HourlyPrices hourly_prices(const Tariff& tariff) {
  HourlyPrices p{};
  for (int h = 0; h < kHoursPerDay; ++h) p[h] = price_at_hour(tariff, h);
  return p;
}

HalfCents daily_cost(const Profile& profile, const HourlyPrices& prices) {
  std::int64_t total = 0;
  for (int h = 0; h < kHoursPerDay; ++h)
    total += static_cast<std::int64_t>(profile[h]) * prices[h];
  return {total};
}

HalfCents daily_cost(const Profile& profile, const Tariff& tariff) {
  return daily_cost(profile, hourly_prices(tariff));
}

HalfCents incremental_cost(const LoadBlock& block, int placed_at, const HourlyPrices& prices) {
  if (placed_at < 0 || placed_at + block.width() > kHoursPerDay)
    throw std::out_of_range("block '" + block.name + "' at hour " + std::to_string(placed_at) +
                            " overflows the day");
  std::int64_t total = 0;
  for (int i = 0; i < block.width(); ++i)
    total += static_cast<std::int64_t>(block.column_cells[i]) * prices[placed_at + i];
  return {total};
}

HalfCents incremental_cost(const LoadBlock& block, int placed_at, const Tariff& tariff) {
  return incremental_cost(block, placed_at, hourly_prices(tariff));
}

BillReport bill(const Profile& profile, const Tariff& tariff) {
  const auto prices = hourly_prices(tariff);
  BillReport r;
  HalfCents total;
  for (int h = 0; h < kHoursPerDay; ++h) {
    const HalfCents hour{static_cast<std::int64_t>(profile[h]) * prices[h]};
    r.per_hour_cost[h] = hour.cents();
    total += hour;
  }
  r.daily_cost = total.cents();
  r.monthly_cost = monthly_dollars(total);
  return r;
}

std::string format_dollars(double dollars) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", dollars);
  return buf;
}

}  // namespace rldsm
