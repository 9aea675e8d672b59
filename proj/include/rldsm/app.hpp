#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rldsm/agent.hpp"
#include "rldsm/oracle.hpp"
#include "rldsm/placement.hpp"
#include "rldsm/rewards.hpp"
#include "rldsm/scenario.hpp"

namespace rldsm::app {

/// Entry point shared by the executable and the tests. Returns the exit
/// code; failures print one JSON object on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Consumers named by a selection: an id, "all", or "aggregate".
std::vector<ConsumerScenario> select_consumers(const ScenarioFile& file,
                                               const std::string& selection);

/// Everything needed to rebuild a run from its directory.
struct RunInfo {
  std::filesystem::path dir;
  std::string kind;  // "train" or "oracle"
  std::filesystem::path scenario;
  std::string consumer;
  std::string objective;
  ConsumerScenario consumer_scenario;
  Problem problem;
  RewardConfig rewards;
  EnvConfig env;
};

RunInfo load_run(const std::filesystem::path& dir);

/// Schedule of a run, regenerated from its stored policy (train runs) or
/// read from schedule.csv (oracle runs).
Schedule run_schedule(const RunInfo& run);

/// Base load plus the shipped placement of every shiftable load.
Schedule before_schedule(const ConsumerScenario& consumer, const Tariff& tariff,
                         const DefaultPlacement& placement);

struct ReportRow {
  std::string consumer;
  double before_bill = 0.0;  // $/month
  double oracle_bill = 0.0;
  double rl_bill = 0.0;
  double before_peak_kw = 0.0;
  double oracle_peak_kw = 0.0;
  double rl_peak_kw = 0.0;
  bool oracle_heuristic = false;
  bool rl_failed = false;
};

/// Per-run rows plus the "All" row (sums of every column).
std::vector<ReportRow> build_report(const std::vector<RunInfo>& runs,
                                    const DefaultPlacement& placement);
void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);
void write_report_text(std::ostream& out, const std::vector<ReportRow>& rows);

}  // namespace rldsm::app
