#include "vfl/data.hpp"

#include "vfl/metrics.hpp"
#include "vfl/nn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vfl {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_cell(const std::string& field, const std::string& path, std::size_t line_no,
                  std::size_t col) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || field.empty())
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unparseable value '" +
                             field + "' in column " + std::to_string(col + 1));
  if (!std::isfinite(v))
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": non-finite value in column " +
                             std::to_string(col + 1));
  return v;
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Minibatch-SGD fit used only for generation-time learnability checks.
double fit_and_score(const Mat& x_train, const IVec& y_train, const Mat& x_test,
                     const IVec& y_test, int classes, Index hidden, std::uint64_t seed) {
  const FeatureStats stats = feature_stats(x_train);
  const Mat xtr = apply_stats(x_train, stats);
  const Mat xte = apply_stats(x_test, stats);

  std::vector<LayerSpec> specs;
  if (hidden > 0) {
    specs.push_back({xtr.cols(), hidden, Activation::ReLU});
    specs.push_back({hidden, classes, Activation::Identity});
  } else {
    specs.push_back({xtr.cols(), classes, Activation::Identity});
  }
  MlpParams model = mlp_init(specs, derive_seed(seed, "fit/init"));

  Rng rng(derive_seed(seed, "fit/batches"));
  const Index n = xtr.rows();
  const Index batch = std::min<Index>(64, n);
  const int epochs = hidden > 0 ? 200 : 120;
  const double lr = hidden > 0 ? 0.25 : 0.5;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (Index start = 0; start < n; start += batch) {
      const Index b = std::min(batch, n - start);
      Mat xb(b, xtr.cols());
      IVec yb(b);
      for (Index i = 0; i < b; ++i) {
        xb.row(i) = xtr.row(order[static_cast<std::size_t>(start + i)]);
        yb[i] = y_train[order[static_cast<std::size_t>(start + i)]];
      }
      const ForwardTrace t = forward(model, xb);
      const XentResult xr = softmax_cross_entropy(t.output(), yb);
      const Gradients g = backward(model, t, xr.dlogits);
      model = sgd_step(model, g.params, lr);
    }
  }
  return accuracy(argmax_rows(forward_output(model, xte)), y_test);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column, bool has_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_fields(line);
    if (names.empty()) {
      if (has_header) {
        names = fields;
        continue;
      }
      names.resize(fields.size());
      for (std::size_t i = 0; i < fields.size(); ++i) names[i] = "c" + std::to_string(i);
    }
    if (fields.size() != names.size())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(names.size()) + " fields, got " +
                               std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c)
      row[c] = parse_cell(fields[c], path, line_no, c);
    rows.push_back(std::move(row));
  }
  if (names.empty() || rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

  std::size_t label_idx = names.size();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == label_column) {
      label_idx = i;
      break;
    }
  if (label_idx == names.size() && all_digits(label_column)) {
    const std::size_t as_index = std::stoul(label_column);
    if (as_index < names.size()) label_idx = as_index;
  }
  if (label_idx == names.size())
    throw std::runtime_error("load_csv: no column named '" + label_column + "' in " + path);

  const std::size_t d = names.size() - 1;
  Dataset ds;
  ds.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
  ds.labels.resize(static_cast<Index>(rows.size()));
  ds.feature_names.reserve(d);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (i != label_idx) ds.feature_names.push_back(names[i]);

  std::set<double> distinct;
  for (const auto& row : rows) distinct.insert(row[label_idx]);
  ds.label_values.assign(distinct.begin(), distinct.end());
  std::map<double, int> to_class;
  for (std::size_t i = 0; i < ds.label_values.size(); ++i)
    to_class[ds.label_values[i]] = static_cast<int>(i);

  for (std::size_t r = 0; r < rows.size(); ++r) {
    Index c_out = 0;
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (c == label_idx) continue;
      ds.features(static_cast<Index>(r), c_out++) = rows[r][c];
    }
    ds.labels[static_cast<Index>(r)] = to_class[rows[r][label_idx]];
  }
  return ds;
}

void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path + " for writing");
  for (Index c = 0; c < d.dims(); ++c) out << d.feature_names[static_cast<std::size_t>(c)] << ",";
  out << "label\n";
  char buf[64];
  for (Index r = 0; r < d.rows(); ++r) {
    for (Index c = 0; c < d.dims(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", d.features(r, c));
      out << buf << ",";
    }
    std::snprintf(buf, sizeof buf, "%.17g",
                  d.label_values[static_cast<std::size_t>(d.labels[r])]);
    out << buf << "\n";
  }
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

FeatureStats feature_stats(const Mat& x) {
  if (x.rows() == 0) throw std::invalid_argument("feature_stats: empty matrix");
  FeatureStats s;
  s.mean = x.colwise().mean();
  const Index n = x.rows();
  s.stddev.resize(x.cols());
  s.constant.resize(static_cast<std::size_t>(x.cols()));
  for (Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.mean[c]).square().sum() / static_cast<double>(n);
    const double sd = std::sqrt(var);
    const bool constant = sd < 1e-12;
    s.constant[static_cast<std::size_t>(c)] = constant;
    s.stddev[c] = constant ? 1.0 : sd;  // unit divisor keeps constants at exactly 0
  }
  return s;
}

Mat apply_stats(const Mat& x, const FeatureStats& s) {
  if (x.cols() != s.mean.size())
    throw std::invalid_argument("apply_stats: dimension mismatch");
  Mat out = x;
  out.rowwise() -= s.mean.transpose();
  out.array().rowwise() /= s.stddev.transpose().array();
  return out;
}

std::pair<Dataset, FeatureStats> standardize(const Dataset& d) {
  FeatureStats s = feature_stats(d.features);
  Dataset out = d;
  out.features = apply_stats(d.features, s);
  return {std::move(out), std::move(s)};
}

VflSplit vertical_partition(const Dataset& d, const SplitSpec& spec) {
  const Index n = d.rows();
  const std::size_t k = spec.client_columns.size();
  if (k == 0) throw std::invalid_argument("vertical_partition: no clients");
  if (spec.overlap_size < 1 || spec.overlap_size > n)
    throw std::invalid_argument("vertical_partition: overlap_size out of range");

  std::vector<bool> seen(static_cast<std::size_t>(d.dims()), false);
  std::size_t total_cols = 0;
  for (const auto& cols : spec.client_columns) {
    if (cols.empty()) throw std::invalid_argument("vertical_partition: client with no columns");
    for (int c : cols) {
      if (c < 0 || c >= d.dims())
        throw std::invalid_argument("vertical_partition: column index out of range");
      if (seen[static_cast<std::size_t>(c)])
        throw std::invalid_argument("vertical_partition: column assigned twice");
      seen[static_cast<std::size_t>(c)] = true;
      ++total_cols;
    }
  }
  if (total_cols != static_cast<std::size_t>(d.dims()))
    throw std::invalid_argument("vertical_partition: client columns must cover every feature");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(spec.seed, "partition/rows"));
  rng.shuffle(order);

  VflSplit split;
  split.client_columns = spec.client_columns;
  split.num_classes = d.num_classes();
  split.overlap_rows.assign(order.begin(), order.begin() + spec.overlap_size);
  split.overlap_labels.resize(spec.overlap_size);
  for (Index i = 0; i < spec.overlap_size; ++i)
    split.overlap_labels[i] = d.labels[split.overlap_rows[static_cast<std::size_t>(i)]];

  split.unaligned_rows.resize(k);
  for (std::size_t i = static_cast<std::size_t>(spec.overlap_size); i < order.size(); ++i)
    split.unaligned_rows[(i - static_cast<std::size_t>(spec.overlap_size)) % k].push_back(order[i]);

  for (std::size_t ci = 0; ci < k; ++ci) {
    const auto& cols = spec.client_columns[ci];
    Mat ov(spec.overlap_size, static_cast<Index>(cols.size()));
    for (Index r = 0; r < spec.overlap_size; ++r)
      for (std::size_t c = 0; c < cols.size(); ++c)
        ov(r, static_cast<Index>(c)) = d.features(split.overlap_rows[static_cast<std::size_t>(r)], cols[c]);
    split.overlap_features.push_back(std::move(ov));

    const auto& urows = split.unaligned_rows[ci];
    Mat un(static_cast<Index>(urows.size()), static_cast<Index>(cols.size()));
    for (std::size_t r = 0; r < urows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c)
        un(static_cast<Index>(r), static_cast<Index>(c)) = d.features(urows[r], cols[c]);
    split.unaligned_features.push_back(std::move(un));
  }
  return split;
}

GenCheck check_synthetic(const Dataset& d, const SyntheticSpec& spec) {
  const std::uint64_t seed = derive_seed(spec.seed, "gen/check");
  std::vector<int> order(static_cast<std::size_t>(d.rows()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const Index n_test = d.rows() / 4;
  const Index n_train = d.rows() - n_test;
  if (n_test < 1) throw std::invalid_argument("check_synthetic: dataset too small");

  auto rows_of = [&](Index from, Index count, const std::vector<int>& cols) {
    Mat out(count, static_cast<Index>(cols.size()));
    for (Index i = 0; i < count; ++i)
      for (std::size_t c = 0; c < cols.size(); ++c)
        out(i, static_cast<Index>(c)) = d.features(order[static_cast<std::size_t>(from + i)], cols[c]);
    return out;
  };
  auto labels_of = [&](Index from, Index count) {
    IVec out(count);
    for (Index i = 0; i < count; ++i) out[i] = d.labels[order[static_cast<std::size_t>(from + i)]];
    return out;
  };

  std::vector<int> left, right, joint;
  for (int c = 0; c < spec.d_per_client; ++c) left.push_back(c);
  for (int c = static_cast<int>(spec.d_per_client); c < 2 * spec.d_per_client; ++c) right.push_back(c);
  for (int c = 0; c < 2 * spec.d_per_client; ++c) joint.push_back(c);

  const IVec ytr = labels_of(0, n_train);
  const IVec yte = labels_of(n_train, n_test);

  GenCheck check;
  check.chance = 1.0 / static_cast<double>(spec.classes);
  check.single_client_accuracy.push_back(fit_and_score(
      rows_of(0, n_train, left), ytr, rows_of(n_train, n_test, left), yte, spec.classes, 0,
      derive_seed(seed, "single/0")));
  check.single_client_accuracy.push_back(fit_and_score(
      rows_of(0, n_train, right), ytr, rows_of(n_train, n_test, right), yte, spec.classes, 0,
      derive_seed(seed, "single/1")));
  const Index joint_hidden = spec.task == SyntheticTask::XorCross ? 16 : 0;
  check.joint_accuracy = fit_and_score(rows_of(0, n_train, joint), ytr,
                                       rows_of(n_train, n_test, joint), yte, spec.classes,
                                       joint_hidden, derive_seed(seed, "joint"));

  if (spec.task == SyntheticTask::XorCross) {
    const double cap = check.chance + 0.1;
    check.passed = check.single_client_accuracy[0] <= cap &&
                   check.single_client_accuracy[1] <= cap && check.joint_accuracy >= 0.95;
  } else {
    check.passed = spec.noise > 0.0 || check.joint_accuracy >= 0.99;
  }
  return check;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 8) throw std::invalid_argument("gen_synthetic: n too small");
  if (spec.d_per_client < 1) throw std::invalid_argument("gen_synthetic: d_per_client < 1");
  if (spec.classes < 2) throw std::invalid_argument("gen_synthetic: need at least 2 classes");
  if (spec.noise < 0.0) throw std::invalid_argument("gen_synthetic: negative noise");

  const Index d = 2 * spec.d_per_client;
  Dataset ds;
  ds.features.resize(spec.n, d);
  ds.labels.resize(spec.n);
  for (Index c = 0; c < d; ++c) ds.feature_names.push_back("f" + std::to_string(c));
  for (int c = 0; c < spec.classes; ++c) ds.label_values.push_back(static_cast<double>(c));

  Rng rng(derive_seed(spec.seed, "gen/data"));

  if (spec.task == SyntheticTask::Linear) {
    Mat w(spec.classes, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = rng.gaussian() * scale;
    for (Index r = 0; r < spec.n; ++r) {
      for (Index c = 0; c < d; ++c) ds.features(r, c) = rng.gaussian();
      Index best = 0;
      double best_score = -1e300;
      for (int k = 0; k < spec.classes; ++k) {
        const double score = w.row(k).dot(ds.features.row(r)) + spec.noise * rng.gaussian();
        if (score > best_score) {
          best_score = score;
          best = k;
        }
      }
      ds.labels[r] = static_cast<int>(best);
    }
  } else {
    // Latent factor per client; label = (s_A + s_B) mod C. Centers are
    // orthonormal directions scaled by a fixed separation, so each factor is
    // recoverable from its own client's features while the label stays
    // independent of either factor alone.
    const double separation = 1.5;
    auto make_centers = [&](Index dim, int count) {
      Mat centers(count, dim);
      for (Index i = 0; i < centers.rows(); ++i)
        for (Index j = 0; j < centers.cols(); ++j) centers(i, j) = rng.gaussian();
      // Gram-Schmidt while it fits; leftover rows stay as normalized noise.
      for (Index i = 0; i < centers.rows(); ++i) {
        for (Index j = 0; j < std::min(i, dim); ++j)
          centers.row(i) -= centers.row(i).dot(centers.row(j)) * centers.row(j);
        const double norm = centers.row(i).norm();
        if (norm > 1e-9) centers.row(i) /= norm;
      }
      return Mat(separation * centers);
    };
    const Mat centers_a = make_centers(spec.d_per_client, spec.classes);
    const Mat centers_b = make_centers(spec.d_per_client, spec.classes);
    // C=2 gets symmetric +-a centers on one direction, which doubles the
    // margin relative to two orthogonal centers.
    auto center_row = [&](const Mat& centers, int s) -> Vec {
      if (spec.classes == 2) {
        const Vec dir = centers.row(0).transpose();
        return s == 0 ? Vec(-dir) : Vec(dir);
      }
      return centers.row(s).transpose();
    };
    for (Index r = 0; r < spec.n; ++r) {
      const int sa = static_cast<int>(rng.uniform_index(spec.classes));
      const int sb = static_cast<int>(rng.uniform_index(spec.classes));
      ds.labels[r] = (sa + sb) % spec.classes;
      const Vec ca = center_row(centers_a, sa);
      const Vec cb = center_row(centers_b, sb);
      for (Index c = 0; c < spec.d_per_client; ++c)
        ds.features(r, c) = ca[c] + spec.noise * rng.gaussian();
      for (Index c = 0; c < spec.d_per_client; ++c)
        ds.features(r, spec.d_per_client + c) = cb[c] + spec.noise * rng.gaussian();
    }
  }

  if (spec.verify) {
    const GenCheck check = check_synthetic(ds, spec);
    if (!check.passed) {
      std::ostringstream msg;
      msg << "gen_synthetic: learnability check failed (single=[";
      for (std::size_t i = 0; i < check.single_client_accuracy.size(); ++i)
        msg << (i ? "," : "") << check.single_client_accuracy[i];
      msg << "], joint=" << check.joint_accuracy << ")";
      throw std::runtime_error(msg.str());
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction,
                                             std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw std::invalid_argument("train_test_split: test_fraction must be in [0,1)");
  const Index n = d.rows();
  const Index n_test = static_cast<Index>(std::llround(static_cast<double>(n) * test_fraction));
  if (n - n_test < 1) throw std::invalid_argument("train_test_split: no training rows left");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "train_test_split"));
  rng.shuffle(order);

  auto take = [&](Index from, Index count) {
    Dataset out;
    out.feature_names = d.feature_names;
    out.label_values = d.label_values;
    out.features.resize(count, d.dims());
    out.labels.resize(count);
    for (Index i = 0; i < count; ++i) {
      out.features.row(i) = d.features.row(order[static_cast<std::size_t>(from + i)]);
      out.labels[i] = d.labels[order[static_cast<std::size_t>(from + i)]];
    }
    return out;
  };
  return {take(0, n - n_test), take(n - n_test, n_test)};
}

Mat select_columns(const Mat& x, const std::vector<int>& cols) {
  Mat out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c] < 0 || cols[c] >= x.cols())
      throw std::invalid_argument("select_columns: index out of range");
    out.col(static_cast<Index>(c)) = x.col(cols[c]);
  }
  return out;
}

}  // namespace vfl
