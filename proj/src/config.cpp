#include "vfl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace vfl {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw std::invalid_argument("config key '" + key + "': cannot parse '" + value + "' as " +
                              expected);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "a boolean");
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const std::invalid_argument&) {
    bad_value(key, value, "a number");
  } catch (const std::out_of_range&) {
    bad_value(key, value, "a representable number");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    bad_value(key, value, "an integer");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    bad_value(key, value, "a non-negative integer");
  return v;
}

// Single registry so parsing, overrides and the echo cannot drift apart.
struct KeyHandler {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string format_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

const std::map<std::string, KeyHandler>& key_registry() {
  static const std::map<std::string, KeyHandler> reg = [] {
    std::map<std::string, KeyHandler> m;
    auto str = [&m](const std::string& k, std::string ExperimentConfig::* f) {
      m[k] = {[f](ExperimentConfig& c, const std::string& v) { c.*f = v; },
              [f](const ExperimentConfig& c) { return c.*f; }};
    };
    auto boolean = [&m](const std::string& k, bool ExperimentConfig::* f) {
      m[k] = {[f, k](ExperimentConfig& c, const std::string& v) { c.*f = parse_bool(k, v); },
              [f](const ExperimentConfig& c) { return c.*f ? "true" : "false"; }};
    };
    auto integer = [&m](const std::string& k, int ExperimentConfig::* f) {
      m[k] = {[f, k](ExperimentConfig& c, const std::string& v) {
                c.*f = static_cast<int>(parse_int(k, v));
              },
              [f](const ExperimentConfig& c) { return std::to_string(c.*f); }};
    };
    auto index = [&m](const std::string& k, Index ExperimentConfig::* f) {
      m[k] = {[f, k](ExperimentConfig& c, const std::string& v) {
                c.*f = static_cast<Index>(parse_int(k, v));
              },
              [f](const ExperimentConfig& c) { return std::to_string(c.*f); }};
    };
    auto real = [&m](const std::string& k, double ExperimentConfig::* f) {
      m[k] = {[f, k](ExperimentConfig& c, const std::string& v) { c.*f = parse_double(k, v); },
              [f](const ExperimentConfig& c) { return format_double(c.*f); }};
    };

    str("method", &ExperimentConfig::method);
    m["seed"] = {[](ExperimentConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.seed); }};
    str("dataset", &ExperimentConfig::dataset);
    str("csv_path", &ExperimentConfig::csv_path);
    str("label_column", &ExperimentConfig::label_column);
    boolean("csv_has_header", &ExperimentConfig::csv_has_header);
    str("synthetic_task", &ExperimentConfig::synthetic_task);
    index("synthetic_n", &ExperimentConfig::synthetic_n);
    index("synthetic_d_per_client", &ExperimentConfig::synthetic_d_per_client);
    integer("synthetic_classes", &ExperimentConfig::synthetic_classes);
    real("synthetic_noise", &ExperimentConfig::synthetic_noise);
    real("test_fraction", &ExperimentConfig::test_fraction);
    str("client_columns", &ExperimentConfig::client_columns);
    index("n_overlap", &ExperimentConfig::n_overlap);
    index("rep_dim", &ExperimentConfig::rep_dim);
    str("extractor_hidden", &ExperimentConfig::extractor_hidden);
    str("server_hidden", &ExperimentConfig::server_hidden);
    real("lambda_u", &ExperimentConfig::lambda_u);
    real("tau_fm", &ExperimentConfig::tau_fm);
    integer("epochs_client", &ExperimentConfig::epochs_client);
    integer("batch_size", &ExperimentConfig::batch_size);
    real("lr_client", &ExperimentConfig::lr_client);
    real("lr_server", &ExperimentConfig::lr_server);
    integer("epochs_server", &ExperimentConfig::epochs_server);
    real("r_m", &ExperimentConfig::r_m);
    real("sigma", &ExperimentConfig::sigma);
    str("mask_semantics", &ExperimentConfig::mask_semantics);
    boolean("shared_mask", &ExperimentConfig::shared_mask);
    real("threshold_t", &ExperimentConfig::threshold_t);
    integer("q_local_steps", &ExperimentConfig::q_local_steps);
    integer("rounds", &ExperimentConfig::rounds);
    m["bytes_per_scalar"] = {
        [](ExperimentConfig& c, const std::string& v) {
          c.bytes_per_scalar = static_cast<std::size_t>(parse_u64("bytes_per_scalar", v));
        },
        [](const ExperimentConfig& c) { return std::to_string(c.bytes_per_scalar); }};
    integer("kmeans_restarts", &ExperimentConfig::kmeans_restarts);
    boolean("kmeans_normalize", &ExperimentConfig::kmeans_normalize);
    integer("server_grad_warmup_epochs", &ExperimentConfig::server_grad_warmup_epochs);
    boolean("fewshot_reupload_overlap", &ExperimentConfig::fewshot_reupload_overlap);
    boolean("reuse_joint_classifier", &ExperimentConfig::reuse_joint_classifier);
    str("report_path", &ExperimentConfig::report_path);
    str("ledger_csv", &ExperimentConfig::ledger_csv);
    return m;
  }();
  return reg;
}

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value,
             const std::string& where) {
  const auto& reg = key_registry();
  const auto it = reg.find(key);
  if (it == reg.end()) throw std::invalid_argument(where + ": unknown config key '" + key + "'");
  it->second.set(cfg, value);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos)
      throw std::invalid_argument(where + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument(where + ": empty key");
    set_key(cfg, key, value, where);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_override(ExperimentConfig& cfg, const std::string& key_value) {
  const std::size_t eq = key_value.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must be key=value, got '" + key_value + "'");
  set_key(cfg, trim(key_value.substr(0, eq)), trim(key_value.substr(eq + 1)), "override");
}

std::vector<Index> parse_width_list(const std::string& spec) {
  std::vector<Index> widths;
  std::string item;
  std::istringstream is(spec);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const long long w = parse_int("hidden widths", item);
    if (w < 1) throw std::invalid_argument("hidden layer width must be >= 1, got " + item);
    widths.push_back(static_cast<Index>(w));
  }
  return widths;
}

std::vector<std::vector<int>> parse_client_columns(const std::string& spec,
                                                   Index total_columns) {
  std::vector<std::vector<int>> out;
  if (trim(spec).empty()) {
    if (total_columns < 2)
      throw std::invalid_argument("need at least 2 feature columns to split between clients");
    const Index half = total_columns / 2;
    out.resize(2);
    for (Index i = 0; i < total_columns; ++i)
      out[i < half ? 0 : 1].push_back(static_cast<int>(i));
    return out;
  }
  std::istringstream clients(spec);
  std::string part;
  while (std::getline(clients, part, '|')) {
    std::vector<int> cols;
    std::istringstream items(part);
    std::string item;
    while (std::getline(items, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      const std::size_t dash = item.find('-');
      if (dash != std::string::npos && dash > 0) {
        const long long lo = parse_int("client_columns", trim(item.substr(0, dash)));
        const long long hi = parse_int("client_columns", trim(item.substr(dash + 1)));
        if (lo > hi)
          throw std::invalid_argument("client_columns: descending range '" + item + "'");
        for (long long c = lo; c <= hi; ++c) cols.push_back(static_cast<int>(c));
      } else {
        cols.push_back(static_cast<int>(parse_int("client_columns", item)));
      }
    }
    if (cols.empty()) throw std::invalid_argument("client_columns: empty client in '" + spec + "'");
    out.push_back(std::move(cols));
  }
  if (out.size() < 2) throw std::invalid_argument("client_columns: need at least two clients");
  return out;
}

void validate(const ExperimentConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("config: " + msg);
  };
  const bool known_method = cfg.method == "oneshot" || cfg.method == "fewshot" ||
                            cfg.method == "vanilla" || cfg.method == "fedbcd" ||
                            cfg.method == "fewshot_finetune";
  require(known_method, "unknown method '" + cfg.method + "'");
  require(cfg.dataset == "synthetic" || cfg.dataset == "csv",
          "dataset must be synthetic or csv, got '" + cfg.dataset + "'");
  if (cfg.dataset == "csv") require(!cfg.csv_path.empty(), "csv dataset needs csv_path");
  if (cfg.dataset == "synthetic") {
    require(cfg.synthetic_task == "linear" || cfg.synthetic_task == "xor_cross",
            "synthetic_task must be linear or xor_cross, got '" + cfg.synthetic_task + "'");
    require(cfg.synthetic_n >= 8, "synthetic_n too small");
    require(cfg.synthetic_d_per_client >= 1, "synthetic_d_per_client must be >= 1");
    require(cfg.synthetic_classes >= 2, "synthetic_classes must be >= 2");
    require(cfg.synthetic_noise >= 0.0, "synthetic_noise must be >= 0");
  }
  require(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0, "test_fraction must be in (0,1)");
  require(cfg.n_overlap >= 1, "n_overlap must be >= 1");
  require(cfg.rep_dim >= 1, "rep_dim must be >= 1");
  require(cfg.lambda_u >= 0.0, "lambda_u must be >= 0");
  require(cfg.tau_fm > 0.0 && cfg.tau_fm < 1.0, "tau_fm must be in (0,1)");
  require(cfg.epochs_client >= 0, "epochs_client must be >= 0");
  require(cfg.batch_size >= 1, "batch_size must be >= 1");
  require(cfg.lr_client > 0.0, "lr_client must be > 0");
  require(cfg.lr_server > 0.0, "lr_server must be > 0");
  require(cfg.epochs_server >= 0, "epochs_server must be >= 0");
  require(cfg.r_m >= 0.0 && cfg.r_m <= 1.0, "r_m must be in [0,1]");
  require(cfg.sigma >= 0.0, "sigma must be >= 0");
  require(cfg.mask_semantics == "masked_fraction" || cfg.mask_semantics == "keep_fraction",
          "mask_semantics must be masked_fraction or keep_fraction");
  require(cfg.threshold_t > 0.0 && cfg.threshold_t < 1.0, "threshold_t must be in (0,1)");
  require(cfg.q_local_steps >= 1, "q_local_steps must be >= 1");
  require(cfg.rounds >= 0, "rounds must be >= 0");
  require(cfg.bytes_per_scalar >= 1, "bytes_per_scalar must be >= 1");
  require(cfg.kmeans_restarts >= 1, "kmeans_restarts must be >= 1");
  require(cfg.server_grad_warmup_epochs >= 0, "server_grad_warmup_epochs must be >= 0");
  if (cfg.method == "fedbcd")
    require(cfg.q_local_steps >= 2, "fedbcd needs q_local_steps >= 2");
  if (cfg.method == "vanilla")
    require(cfg.q_local_steps == 1, "vanilla uses q_local_steps = 1; use method fedbcd");
  parse_width_list(cfg.extractor_hidden);
  parse_width_list(cfg.server_hidden);
  if (!cfg.client_columns.empty()) parse_client_columns(cfg.client_columns, 0);
}

std::map<std::string, std::string> config_echo(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> echo;
  for (const auto& [key, handler] : key_registry()) echo[key] = handler.get(cfg);
  return echo;
}

ProtocolConfig to_protocol_config(const ExperimentConfig& cfg) {
  ProtocolConfig p;
  p.rep_dim = cfg.rep_dim;
  p.extractor_hidden = parse_width_list(cfg.extractor_hidden);
  p.server_hidden = parse_width_list(cfg.server_hidden);
  p.server_epochs = cfg.epochs_server;
  p.server_lr = cfg.lr_server;
  p.server_batch = cfg.batch_size;
  p.server_grad_warmup_epochs = cfg.server_grad_warmup_epochs;
  p.ssl.lambda_u = cfg.lambda_u;
  p.ssl.tau_fm = cfg.tau_fm;
  p.ssl.epochs = cfg.epochs_client;
  p.ssl.batch = cfg.batch_size;
  p.ssl.lr = cfg.lr_client;
  p.augment.r_m = cfg.r_m;
  p.augment.sigma = cfg.sigma;
  p.augment.mask_semantics = cfg.mask_semantics == "keep_fraction"
                                 ? MaskSemantics::KeepFraction
                                 : MaskSemantics::MaskedFraction;
  p.augment.shared_mask = cfg.shared_mask;
  p.inclusion_threshold = cfg.threshold_t;
  p.q_local_steps = cfg.method == "fedbcd" ? cfg.q_local_steps : (cfg.method == "vanilla" ? 1 : cfg.q_local_steps);
  p.rounds = cfg.rounds;
  p.temp_labels.normalize_rows = cfg.kmeans_normalize;
  p.temp_labels.kmeans.restarts = cfg.kmeans_restarts;
  p.fewshot_reupload_overlap = cfg.fewshot_reupload_overlap;
  p.reuse_joint_classifier = cfg.reuse_joint_classifier;
  p.bytes_per_scalar = cfg.bytes_per_scalar;
  p.seed = cfg.seed;
  return p;
}

}  // namespace vfl
