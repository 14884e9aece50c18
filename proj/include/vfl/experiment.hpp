#pragma once

#include "vfl/config.hpp"
#include "vfl/report.hpp"

namespace vfl {

// Load or generate the dataset, split rows into train/test and columns into
// clients, run the configured method, and return the report (config echo
// included). Writes report_path / ledger_csv when set; relative paths
// resolve against $VFL_REPORT_DIR.
RunReport run_experiment(const ExperimentConfig& cfg);

// The data pipeline alone, for callers that drive the protocol directly.
struct PreparedData {
  Dataset train;
  Dataset test;
  VflSplit split;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

std::string resolve_report_path(const std::string& path);

}  // namespace vfl
