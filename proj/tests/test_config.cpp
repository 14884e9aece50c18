#include "vfl/config.hpp"

#include "vfl/comm.hpp"
#include "vfl/report.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

using namespace vfl;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content = "")
      : path("/tmp/" + name) {
    if (!content.empty()) {
      std::ofstream out(path);
      out << content;
    }
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_SUITE("config") {

TEST_CASE("parsing skips comments and blank lines, trims whitespace") {
  const ExperimentConfig cfg = parse_config_text(
      "# experiment\n"
      "\n"
      "method = fewshot   # trailing comment\n"
      "  seed=42\n"
      "n_overlap = 128\n"
      "lambda_u = 0.5\n"
      "shared_mask = false\n",
      "test.cfg");
  CHECK(cfg.method == "fewshot");
  CHECK(cfg.seed == 42);
  CHECK(cfg.n_overlap == 128);
  CHECK(cfg.lambda_u == 0.5);
  CHECK(cfg.shared_mask == false);
  CHECK(cfg.rep_dim == 8);  // untouched keys keep defaults
}

TEST_CASE("parse errors name the file and line") {
  CHECK_THROWS_WITH_AS(parse_config_text("method = oneshot\nnot a line\n", "x.cfg"),
                       doctest::Contains("x.cfg:2"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("bogus_key = 3\n", "y.cfg"),
                       doctest::Contains("unknown config key 'bogus_key'"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("= 3\n", "z.cfg"), doctest::Contains("z.cfg:1"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("seed = -1\n", "w.cfg"),
                       doctest::Contains("seed"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("rounds = many\n", "v.cfg"),
                       doctest::Contains("rounds"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("sigma = 0.1x\n", "u.cfg"),
                       doctest::Contains("sigma"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("shared_mask = maybe\n", "t.cfg"),
                       doctest::Contains("shared_mask"), std::invalid_argument);
}

TEST_CASE("overrides apply on top of parsed values") {
  ExperimentConfig cfg = parse_config_text("method = oneshot\nrounds = 9\n", "a.cfg");
  apply_override(cfg, "rounds=17");
  apply_override(cfg, " lr_server = 0.25 ");
  CHECK(cfg.rounds == 17);
  CHECK(cfg.lr_server == 0.25);
  CHECK_THROWS_WITH_AS(apply_override(cfg, "no_equals_sign"),
                       doctest::Contains("key=value"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_override(cfg, "mystery=1"),
                       doctest::Contains("unknown config key"), std::invalid_argument);
}

TEST_CASE("load_config reads a file and names it in errors") {
  TempFile good("cfg_good.cfg", "method = vanilla\nrounds = 3\n");
  const ExperimentConfig cfg = load_config(good.path);
  CHECK(cfg.method == "vanilla");
  CHECK(cfg.rounds == 3);
  CHECK_THROWS_WITH_AS(load_config("/tmp/definitely_missing.cfg"),
                       doctest::Contains("definitely_missing.cfg"), std::runtime_error);
  TempFile bad("cfg_bad.cfg", "method = oneshot\nqq = 1\n");
  CHECK_THROWS_WITH_AS(load_config(bad.path), doctest::Contains("cfg_bad.cfg:2"),
                       std::invalid_argument);
}

TEST_CASE("width lists parse and reject non-positive widths") {
  CHECK(parse_width_list("16") == std::vector<Index>{16});
  CHECK(parse_width_list("32, 16,8") == std::vector<Index>{32, 16, 8});
  CHECK(parse_width_list("").empty());
  CHECK(parse_width_list("  ").empty());
  CHECK_THROWS_AS(parse_width_list("0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_width_list("-4"), std::invalid_argument);
  CHECK_THROWS_AS(parse_width_list("16,wide"), std::invalid_argument);
}

TEST_CASE("client column specs: ranges, singles, and the even default split") {
  const auto parsed = parse_client_columns("0-3|4,6|5", 0);
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[0] == std::vector<int>{0, 1, 2, 3});
  CHECK(parsed[1] == std::vector<int>{4, 6});
  CHECK(parsed[2] == std::vector<int>{5});

  const auto even = parse_client_columns("", 8);
  REQUIRE(even.size() == 2);
  CHECK(even[0] == std::vector<int>{0, 1, 2, 3});
  CHECK(even[1] == std::vector<int>{4, 5, 6, 7});

  const auto odd = parse_client_columns("", 5);
  CHECK(odd[0].size() == 2);  // floor(5/2) to the first client
  CHECK(odd[1].size() == 3);

  CHECK_THROWS_WITH_AS(parse_client_columns("3-1|4", 0), doctest::Contains("descending"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_client_columns("0-2||3", 0), doctest::Contains("empty client"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_client_columns("0-7", 0), doctest::Contains("two clients"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_client_columns("", 1), doctest::Contains("at least 2"),
                       std::invalid_argument);
}

TEST_CASE("validate rejects out-of-range fields and names the field") {
  ExperimentConfig cfg;
  validate(cfg);  // defaults are valid

  auto broken = [](auto&& mutate) {
    ExperimentConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.method = "gossip"; })),
                       doctest::Contains("method"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.dataset = "parquet"; })),
                       doctest::Contains("dataset"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.dataset = "csv"; })),
                       doctest::Contains("csv_path"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.synthetic_task = "spiral"; })),
                       doctest::Contains("synthetic_task"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.test_fraction = 1.0; })),
                       doctest::Contains("test_fraction"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.n_overlap = 0; })),
                       doctest::Contains("n_overlap"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.tau_fm = 1.0; })),
                       doctest::Contains("tau_fm"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.lr_client = 0.0; })),
                       doctest::Contains("lr_client"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.r_m = 1.5; })),
                       doctest::Contains("r_m"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.mask_semantics = "drop"; })),
                       doctest::Contains("mask_semantics"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.threshold_t = 0.0; })),
                       doctest::Contains("threshold_t"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.q_local_steps = 0; })),
                       doctest::Contains("q_local_steps"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.bytes_per_scalar = 0; })),
                       doctest::Contains("bytes_per_scalar"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.method = "fedbcd"; })),
                       doctest::Contains("q_local_steps >= 2"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) {
                         c.method = "vanilla";
                         c.q_local_steps = 3;
                       })),
                       doctest::Contains("vanilla"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.extractor_hidden = "16,zero"; })),
                       doctest::Contains("integer"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate(broken([](auto& c) { c.client_columns = "0-3"; })),
                       doctest::Contains("two clients"), std::invalid_argument);
}

TEST_CASE("the echo round-trips through the parser") {
  ExperimentConfig cfg;
  cfg.method = "fedbcd";
  cfg.q_local_steps = 5;
  cfg.synthetic_task = "linear";
  cfg.lambda_u = 0.75;
  cfg.extractor_hidden = "24,12";
  cfg.client_columns = "0-2|3-5";
  cfg.report_path = "out.json";

  const auto echo = config_echo(cfg);
  std::string text;
  for (const auto& [k, v] : echo) text += k + " = " + v + "\n";
  const ExperimentConfig back = parse_config_text(text, "echo");
  CHECK(config_echo(back) == echo);
  CHECK(echo.count("method") == 1);
  CHECK(echo.at("q_local_steps") == "5");
  CHECK(echo.at("shared_mask") == "true");
}

TEST_CASE("protocol config mirrors the experiment knobs") {
  ExperimentConfig cfg;
  cfg.rep_dim = 6;
  cfg.extractor_hidden = "10,7";
  cfg.server_hidden = "";
  cfg.epochs_server = 123;
  cfg.lr_server = 0.02;
  cfg.lr_client = 0.03;
  cfg.epochs_client = 11;
  cfg.batch_size = 19;
  cfg.lambda_u = 0.5;
  cfg.tau_fm = 0.9;
  cfg.r_m = 0.3;
  cfg.sigma = 0.2;
  cfg.mask_semantics = "keep_fraction";
  cfg.shared_mask = false;
  cfg.threshold_t = 0.85;
  cfg.method = "fedbcd";
  cfg.q_local_steps = 4;
  cfg.rounds = 77;
  cfg.bytes_per_scalar = 8;
  cfg.kmeans_restarts = 3;
  cfg.kmeans_normalize = false;
  cfg.seed = 99;

  const ProtocolConfig p = to_protocol_config(cfg);
  CHECK(p.rep_dim == 6);
  CHECK(p.extractor_hidden == std::vector<Index>{10, 7});
  CHECK(p.server_hidden.empty());
  CHECK(p.server_epochs == 123);
  CHECK(p.server_lr == 0.02);
  CHECK(p.ssl.lr == 0.03);
  CHECK(p.ssl.epochs == 11);
  CHECK(p.ssl.batch == 19);
  CHECK(p.server_batch == 19);
  CHECK(p.ssl.lambda_u == 0.5);
  CHECK(p.ssl.tau_fm == 0.9);
  CHECK(p.augment.r_m == 0.3);
  CHECK(p.augment.sigma == 0.2);
  CHECK(p.augment.mask_semantics == MaskSemantics::KeepFraction);
  CHECK(p.augment.shared_mask == false);
  CHECK(p.inclusion_threshold == 0.85);
  CHECK(p.q_local_steps == 4);
  CHECK(p.rounds == 77);
  CHECK(p.bytes_per_scalar == 8);
  CHECK(p.temp_labels.kmeans.restarts == 3);
  CHECK(p.temp_labels.normalize_rows == false);
  CHECK(p.seed == 99);
}

TEST_CASE("run reports survive a write/read round trip") {
  RunReport r;
  r.run_id = "oneshot-seed3";
  r.method = "oneshot";
  r.seed = 3;
  r.config_echo["method"] = "oneshot";
  r.metrics["accuracy"] = 0.875;
  r.metrics["auc"] = 0.9375;
  r.comm_messages_per_client = {3, 3};
  r.comm_total_messages = 6;
  r.comm_total_scalars = 1234;
  r.comm_total_bytes = 4936;
  r.comm_mb = 4936.0 / (1024.0 * 1024.0);
  r.comm_scalars_per_role["reps_overlap"] = 1000;
  r.timings_sec["local_ssl"] = 0.25;

  TempFile f("report_roundtrip.json");
  write_report(r, f.path);
  const RunReport back = read_report(f.path);
  CHECK(back.run_id == r.run_id);
  CHECK(back.method == r.method);
  CHECK(back.seed == r.seed);
  CHECK(back.metrics.at("accuracy") == 0.875);
  CHECK(back.metrics.at("auc") == 0.9375);
  CHECK(back.comm_messages_per_client == r.comm_messages_per_client);
  CHECK(back.comm_total_messages == 6);
  CHECK(back.comm_total_scalars == 1234);
  CHECK(back.comm_total_bytes == 4936);
  CHECK(back.comm_scalars_per_role.at("reps_overlap") == 1000);
  CHECK(back.timings_sec.at("local_ssl") == 0.25);
  CHECK(back.config_echo.at("method") == "oneshot");
}

TEST_CASE("compare_runs writes one csv row per report") {
  RunReport a;
  a.method = "oneshot";
  a.metrics["accuracy"] = 0.8;
  a.metrics["auc"] = 0.9;
  a.comm_total_messages = 6;
  a.comm_mb = 0.01;
  RunReport b;
  b.method = "vanilla";
  b.metrics["accuracy"] = 0.7;
  b.comm_total_messages = 2000;
  b.comm_mb = 3.5;

  TempFile fa("cmp_a.json"), fb("cmp_b.json"), out("cmp_out.csv");
  write_report(a, fa.path);
  write_report(b, fb.path);
  compare_runs({fa.path, fb.path}, out.path);

  std::ifstream in(out.path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "method,accuracy,auc,comm_messages,comm_mb");
  std::getline(in, line);
  CHECK(line.find("oneshot,") == 0);
  CHECK(line.find("0.8") != std::string::npos);
  std::getline(in, line);
  CHECK(line.find("vanilla,") == 0);
  CHECK(!std::getline(in, line));

  CHECK_THROWS_AS(compare_runs({fa.path}, out.path), std::invalid_argument);
  CHECK_THROWS_AS(compare_runs({fa.path, "/tmp/not_a_report.json"}, out.path), std::exception);
}

TEST_CASE("the ledger csv lists every message with byte counts") {
  CommLedger ledger(4);
  ledger.record_upload(0, PayloadRole::RepsOverlap, 100);
  ledger.record_download(0, PayloadRole::PartialGrads, 101);
  ledger.record_upload(1, PayloadRole::RepsUnaligned, 7);

  TempFile f("ledger_out.csv");
  ledger_to_csv(ledger, f.path);
  std::ifstream in(f.path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "index,direction,sender,receiver,role,scalar_count,bytes");
  std::getline(in, line);
  CHECK(line == "0,upload,0,-1,reps_overlap,100,400");
  std::getline(in, line);
  CHECK(line == "1,download,-1,0,partial_grads,101,404");
  std::getline(in, line);
  CHECK(line == "2,upload,1,-1,reps_unaligned,7,28");
  CHECK(!std::getline(in, line));
}

TEST_CASE("comm summary arithmetic: scalars times bytes-per-scalar, mb base 2") {
  CommLedger ledger(8);
  ledger.record_upload(0, PayloadRole::RepsOverlap, 1 << 20);
  ledger.record_download(1, PayloadRole::PartialGrads, 1 << 19);
  const CommSummary s = comm_summary(ledger);
  CHECK(s.total_messages == 2);
  CHECK(s.total_scalars == (1u << 20) + (1u << 19));
  CHECK(s.total_bytes == 8u * ((1u << 20) + (1u << 19)));
  CHECK(s.total_mb == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(s.per_client_messages.at(0) == 1);
  CHECK(s.per_client_messages.at(1) == 1);
  CHECK(s.uploads_per_client.at(0) == 1);
  CHECK(s.downloads_per_client.at(1) == 1);
  CHECK(s.scalars_per_role.at("reps_overlap") == 1u << 20);
}

}  // TEST_SUITE
