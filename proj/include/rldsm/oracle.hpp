#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rldsm/billing.hpp"
#include "rldsm/env.hpp"

namespace rldsm {

enum class OracleObjective { MinPeak, MinCost, PeakThenCost };
enum class SolverQuality { Exact, Heuristic };

const char* to_string(OracleObjective o);
const char* to_string(SolverQuality q);
OracleObjective parse_oracle_objective(const std::string& s);

struct Schedule {
  std::map<std::string, int> assignments;  // appliance -> start hour
  Profile resulting_profile{};
  double peak_kw = 0.0;
  double daily_cost_cents = 0.0;
  std::optional<SolverQuality> quality;  // set by the oracle only
};

/// Builds a schedule (profile, peak, cost) from start hours.
Schedule make_schedule(const Profile& base, const std::vector<LoadBlock>& blocks,
                       const std::map<std::string, int>& assignments, const Tariff& tariff);
Schedule make_schedule(const Profile& base, const std::vector<LoadBlock>& blocks,
                       const std::vector<Placement>& placements, const Tariff& tariff);

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

struct OracleOptions {
  int max_height = kDefaultMaxCells;
  /// Larger instances fall back to beam search.
  std::size_t exhaustive_limit = 12;
  std::size_t beam_width = 512;
};

/// Optimal placement under the objective (exact up to exhaustive_limit
/// blocks). Ties go to the lowest start-hour sum, then to the
/// lexicographically smallest start hours taken in appliance-name order.
Schedule solve(const Profile& base, const std::vector<LoadBlock>& blocks,
               OracleObjective objective, const Tariff& tariff, const OracleOptions& options = {});

/// Plain enumeration of every placement, same ordering rules. Test reference.
Schedule brute_force(const Profile& base, const std::vector<LoadBlock>& blocks,
                     OracleObjective objective, const Tariff& tariff,
                     int max_height = kDefaultMaxCells);

struct Verification {
  bool ok = false;
  Profile profile{};
  double peak_kw = 0.0;
  double daily_cost_cents = 0.0;
  std::vector<std::string> problems;
};

/// Recomputes everything from the start hours and checks the recorded values.
Verification verify(const Schedule& schedule, const Profile& base,
                    const std::vector<LoadBlock>& blocks, const Tariff& tariff,
                    int max_height = kDefaultMaxCells);

/// "appliance,start_hour" rows, plus a quality column when it is set.
void write_schedule_csv(std::ostream& out, const Schedule& schedule);
/// Reads start hours back; the quality column is optional.
Schedule read_schedule_csv(std::istream& in);

}  // namespace rldsm
