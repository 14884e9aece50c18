#pragma once

#include "vfl/comm.hpp"

#include <map>
#include <string>
#include <vector>

namespace vfl {

// Everything one experiment run leaves behind. Serialized as JSON; metric
// values are what reproducibility comparisons look at (timings are not).
struct RunReport {
  std::string run_id;
  std::string method;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config_echo;
  std::map<std::string, double> metrics;  // accuracy, auc, diagnostics
  std::vector<std::size_t> comm_messages_per_client;
  std::size_t comm_total_messages = 0;
  std::size_t comm_total_scalars = 0;
  std::size_t comm_total_bytes = 0;
  double comm_mb = 0.0;
  std::map<std::string, std::size_t> comm_scalars_per_role;
  std::map<std::string, double> timings_sec;
};

void write_report(const RunReport& report, const std::string& path);
RunReport read_report(const std::string& path);

// One CSV row per report: method, accuracy, auc, comm message count, comm MB.
// Errors name the offending file on schema mismatch.
void compare_runs(const std::vector<std::string>& report_paths, const std::string& out_csv);

void ledger_to_csv(const CommLedger& ledger, const std::string& path);

}  // namespace vfl
