#pragma once

#include "vfl/data.hpp"
#include "vfl/protocol.hpp"

#include <map>
#include <string>
#include <vector>

namespace vfl {

// One experiment, fully specified. Parsed from a flat "key = value" file
// plus command-line overrides; every field has a usable default so a config
// only needs to state what differs.
struct ExperimentConfig {
  std::string method = "oneshot";  // oneshot | fewshot | vanilla | fedbcd | fewshot_finetune
  std::uint64_t seed = 1;

  // Data source.
  std::string dataset = "synthetic";  // synthetic | csv
  std::string csv_path;
  std::string label_column = "label";
  bool csv_has_header = true;
  std::string synthetic_task = "xor_cross";  // linear | xor_cross
  Index synthetic_n = 2000;
  Index synthetic_d_per_client = 4;
  int synthetic_classes = 2;
  double synthetic_noise = 0.5;
  double test_fraction = 0.25;

  // Vertical split. Empty client_columns means an even two-way split of the
  // feature columns (first half / second half).
  std::string client_columns;  // "0-3|4-7" style, '|' separates clients
  Index n_overlap = 64;

  // Model and training knobs, mirrored into ProtocolConfig.
  Index rep_dim = 8;
  std::string extractor_hidden = "16";  // comma-separated widths, empty = none
  std::string server_hidden = "32";
  double lambda_u = 1.0;
  double tau_fm = 0.95;
  int epochs_client = 50;
  int batch_size = 32;
  double lr_client = 0.01;
  double lr_server = 0.01;
  int epochs_server = 2000;
  double r_m = 0.2;
  double sigma = 0.1;
  std::string mask_semantics = "masked_fraction";  // masked_fraction | keep_fraction
  bool shared_mask = true;
  double threshold_t = 0.95;
  int q_local_steps = 1;
  int rounds = 500;
  std::size_t bytes_per_scalar = 4;
  int kmeans_restarts = 10;
  bool kmeans_normalize = true;
  int server_grad_warmup_epochs = 0;
  bool fewshot_reupload_overlap = false;
  bool reuse_joint_classifier = false;

  // Outputs. Relative report paths resolve against $VFL_REPORT_DIR when set.
  std::string report_path;
  std::string ledger_csv;
};

// Parses "key = value" lines; '#' starts a comment, blank lines are
// skipped. Unknown keys and malformed values are errors naming the line.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig load_config(const std::string& path);

// Applies one "key=value" override in place.
void apply_override(ExperimentConfig& cfg, const std::string& key_value);

// Cross-field checks (ranges, method names, dataset requirements). Throws
// std::invalid_argument with the offending key in the message.
void validate(const ExperimentConfig& cfg);

// Every key with its current value, in key order. This is what run reports
// echo and what --print-config shows.
std::map<std::string, std::string> config_echo(const ExperimentConfig& cfg);

// "0-3|4,6|5" -> {{0,1,2,3},{4,6},{5}}. Empty spec splits d columns evenly
// in two.
std::vector<std::vector<int>> parse_client_columns(const std::string& spec, Index total_columns);

std::vector<Index> parse_width_list(const std::string& spec);

// The protocol-level view of this config.
ProtocolConfig to_protocol_config(const ExperimentConfig& cfg);

}  // namespace vfl
