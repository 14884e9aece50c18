#include "vfl/experiment.hpp"

#include "vfl/protocol.hpp"

#include <cstdlib>
#include <stdexcept>

namespace vfl {

std::string resolve_report_path(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* dir = std::getenv("VFL_REPORT_DIR");
  if (dir == nullptr || *dir == '\0') return path;
  std::string base(dir);
  if (base.back() != '/') base += '/';
  return base + path;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  Dataset full;
  if (cfg.dataset == "csv") {
    full = load_csv(cfg.csv_path, cfg.label_column, cfg.csv_has_header);
  } else {
    SyntheticSpec spec;
    spec.n = cfg.synthetic_n;
    spec.d_per_client = cfg.synthetic_d_per_client;
    spec.classes = cfg.synthetic_classes;
    spec.task = cfg.synthetic_task == "linear" ? SyntheticTask::Linear : SyntheticTask::XorCross;
    spec.noise = cfg.synthetic_noise;
    spec.seed = cfg.seed;
    full = gen_synthetic(spec);
  }

  PreparedData out;
  auto [train, test] = train_test_split(full, cfg.test_fraction, cfg.seed);
  out.train = std::move(train);
  out.test = std::move(test);

  SplitSpec split_spec;
  split_spec.client_columns = parse_client_columns(cfg.client_columns, out.train.dims());
  if (cfg.n_overlap > out.train.rows())
    throw std::invalid_argument("n_overlap exceeds the training rows (" +
                                std::to_string(out.train.rows()) + ")");
  split_spec.overlap_size = cfg.n_overlap;
  split_spec.seed = cfg.seed;
  out.split = vertical_partition(out.train, split_spec);
  return out;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const PreparedData data = prepare_data(cfg);
  const ProtocolConfig pcfg = to_protocol_config(cfg);

  CommLedger ledger(cfg.bytes_per_scalar);
  RunReport report;
  if (cfg.method == "oneshot") {
    report = run_oneshot(data.split, data.test, pcfg, &ledger);
  } else if (cfg.method == "fewshot") {
    report = run_fewshot(data.split, data.test, pcfg, &ledger);
  } else if (cfg.method == "vanilla" || cfg.method == "fedbcd") {
    report = run_vanilla(data.split, data.test, pcfg, &ledger);
  } else if (cfg.method == "fewshot_finetune") {
    report = run_fewshot_finetune(data.split, data.test, pcfg, &ledger);
  } else {
    throw std::invalid_argument("config: unknown method '" + cfg.method + "'");
  }

  report.config_echo = config_echo(cfg);
  if (!cfg.report_path.empty()) write_report(report, resolve_report_path(cfg.report_path));
  if (!cfg.ledger_csv.empty()) ledger_to_csv(ledger, resolve_report_path(cfg.ledger_csv));
  return report;
}

}  // namespace vfl
