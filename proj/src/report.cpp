#include "vfl/report.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace vfl {

using nlohmann::json;

void write_report(const RunReport& r, const std::string& path) {
  json j;
  j["run_id"] = r.run_id;
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["config"] = r.config_echo;
  j["metrics"] = r.metrics;
  j["comm"]["messages_per_client"] = r.comm_messages_per_client;
  j["comm"]["total_messages"] = r.comm_total_messages;
  j["comm"]["total_scalars"] = r.comm_total_scalars;
  j["comm"]["total_bytes"] = r.comm_total_bytes;
  j["comm"]["total_mb"] = r.comm_mb;
  j["comm"]["scalars_per_role"] = r.comm_scalars_per_role;
  j["timings_sec"] = r.timings_sec;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report: cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write_report: write failed for " + path);
}

RunReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_report: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("read_report: " + path + " is not valid JSON: " + e.what());
  }
  RunReport r;
  try {
    r.run_id = j.at("run_id").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_echo = j.at("config").get<std::map<std::string, std::string>>();
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    const json& c = j.at("comm");
    r.comm_messages_per_client = c.at("messages_per_client").get<std::vector<std::size_t>>();
    r.comm_total_messages = c.at("total_messages").get<std::size_t>();
    r.comm_total_scalars = c.at("total_scalars").get<std::size_t>();
    r.comm_total_bytes = c.at("total_bytes").get<std::size_t>();
    r.comm_mb = c.at("total_mb").get<double>();
    r.comm_scalars_per_role = c.at("scalars_per_role").get<std::map<std::string, std::size_t>>();
    if (j.contains("timings_sec"))
      r.timings_sec = j.at("timings_sec").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw std::runtime_error("read_report: schema mismatch in " + path + ": " + e.what());
  }
  return r;
}

void compare_runs(const std::vector<std::string>& report_paths, const std::string& out_csv) {
  if (report_paths.size() < 2)
    throw std::invalid_argument("compare_runs: need at least two reports");
  std::vector<RunReport> reports;
  for (const std::string& p : report_paths) reports.push_back(read_report(p));

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("compare_runs: cannot open " + out_csv + " for writing");
  out << "method,accuracy,auc,comm_messages,comm_mb\n";
  for (const RunReport& r : reports) {
    out << r.method << ",";
    if (auto it = r.metrics.find("accuracy"); it != r.metrics.end()) out << it->second;
    out << ",";
    if (auto it = r.metrics.find("auc"); it != r.metrics.end()) out << it->second;
    out << "," << r.comm_total_messages << "," << r.comm_mb << "\n";
  }
  if (!out) throw std::runtime_error("compare_runs: write failed for " + out_csv);
}

void ledger_to_csv(const CommLedger& ledger, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ledger_to_csv: cannot open " + path + " for writing");
  out << "index,direction,sender,receiver,role,scalar_count,bytes\n";
  std::size_t i = 0;
  for (const Message& m : ledger.messages()) {
    out << i++ << "," << to_string(m.direction) << "," << m.sender << "," << m.receiver << ","
        << to_string(m.role) << "," << m.scalar_count << ","
        << m.scalar_count * ledger.bytes_per_scalar() << "\n";
  }
  if (!out) throw std::runtime_error("ledger_to_csv: write failed for " + path);
}

}  // namespace vfl
