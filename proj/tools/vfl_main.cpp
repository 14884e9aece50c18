#include "vfl/config.hpp"
#include "vfl/experiment.hpp"
#include "vfl/protocol.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

void print_report(const vfl::RunReport& r) {
  std::printf("run %s\n", r.run_id.c_str());
  for (const auto& [name, value] : r.metrics) std::printf("  %-28s %.6f\n", name.c_str(), value);
  std::printf("  %-28s %zu\n", "comm_messages", r.comm_total_messages);
  std::printf("  %-28s %zu\n", "comm_scalars", r.comm_total_scalars);
  std::printf("  %-28s %.4f\n", "comm_mb", r.comm_mb);
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            bool print_config) {
  vfl::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = vfl::load_config(config_path);
    for (const std::string& kv : overrides) vfl::apply_override(cfg, kv);
    vfl::validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  if (print_config) {
    for (const auto& [key, value] : vfl::config_echo(cfg))
      std::printf("%s = %s\n", key.c_str(), value.c_str());
    return kExitOk;
  }
  try {
    const vfl::RunReport report = vfl::run_experiment(cfg);
    print_report(report);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

int cmd_gen_data(const vfl::SyntheticSpec& spec, const std::string& out_csv,
                 const std::string& manifest_path) {
  try {
    const vfl::Dataset d = vfl::gen_synthetic(spec);
    vfl::save_csv(d, out_csv);
    const vfl::GenCheck check = vfl::check_synthetic(d, spec);
    if (!manifest_path.empty()) {
      std::FILE* f = std::fopen(manifest_path.c_str(), "w");
      if (f == nullptr) throw std::runtime_error("cannot write manifest: " + manifest_path);
      std::fprintf(f, "{\n  \"rows\": %lld,\n  \"features\": %lld,\n  \"classes\": %d,\n",
                   static_cast<long long>(d.rows()), static_cast<long long>(d.dims()),
                   d.num_classes());
      std::fprintf(f, "  \"joint_accuracy\": %.4f,\n  \"single_client_accuracy\": [",
                   check.joint_accuracy);
      for (std::size_t i = 0; i < check.single_client_accuracy.size(); ++i)
        std::fprintf(f, "%s%.4f", i ? ", " : "", check.single_client_accuracy[i]);
      std::fprintf(f, "],\n  \"chance\": %.4f,\n  \"passed\": %s\n}\n", check.chance,
                   check.passed ? "true" : "false");
      std::fclose(f);
    }
    std::printf("wrote %s (%lld rows, %lld features, %d classes)\n", out_csv.c_str(),
                static_cast<long long>(d.rows()), static_cast<long long>(d.dims()),
                d.num_classes());
    std::printf("joint holdout accuracy %.4f, single-client", check.joint_accuracy);
    for (double a : check.single_client_accuracy) std::printf(" %.4f", a);
    std::printf(", chance %.4f\n", check.chance);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "gen-data failed: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

int cmd_compare(const std::vector<std::string>& reports, const std::string& out_csv) {
  try {
    std::vector<std::string> resolved;
    for (const std::string& r : reports) resolved.push_back(vfl::resolve_report_path(r));
    vfl::compare_runs(resolved, vfl::resolve_report_path(out_csv));
    std::printf("wrote %s\n", out_csv.c_str());
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "compare failed: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vertical federated learning experiments with exact communication accounting"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::vector<std::string> overrides;
  bool print_config = false;
  CLI::App* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("-c,--config", config_path, "Flat key = value config file");
  run->add_option("--set", overrides, "Override, key=value (repeatable)");
  run->add_flag("--print-config", print_config, "Print the effective config and exit");

  // gen-data
  vfl::SyntheticSpec spec;
  std::string task_name = "xor_cross";
  std::string out_csv = "data.csv";
  std::string manifest_path;
  long long gen_n = spec.n, gen_d = spec.d_per_client;
  std::uint64_t gen_seed = 0;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset CSV");
  gen->add_option("-o,--out", out_csv, "Output CSV path");
  gen->add_option("--manifest", manifest_path, "Also write a JSON manifest with check results");
  gen->add_option("--task", task_name, "linear | xor_cross")
      ->check(CLI::IsMember({"linear", "xor_cross"}));
  gen->add_option("--n", gen_n, "Rows");
  gen->add_option("--d-per-client", gen_d, "Features per client");
  gen->add_option("--classes", spec.classes, "Class count");
  gen->add_option("--noise", spec.noise, "Noise level");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_flag("--no-verify", "Skip the learnability checks");

  // compare
  std::vector<std::string> report_paths;
  std::string compare_out = "compare.csv";
  CLI::App* cmp = app.add_subcommand("compare", "Tabulate run reports into one CSV");
  cmp->add_option("reports", report_paths, "Report JSON files (two or more)")->required();
  cmp->add_option("-o,--out", compare_out, "Output CSV path");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, overrides, print_config);
  if (gen->parsed()) {
    spec.task = task_name == "linear" ? vfl::SyntheticTask::Linear : vfl::SyntheticTask::XorCross;
    spec.n = static_cast<vfl::Index>(gen_n);
    spec.d_per_client = static_cast<vfl::Index>(gen_d);
    spec.seed = gen_seed;
    spec.verify = gen->count("--no-verify") == 0;
    return cmd_gen_data(spec, out_csv, manifest_path);
  }
  if (cmp->parsed()) return cmd_compare(report_paths, compare_out);
  return kExitConfigError;
}
