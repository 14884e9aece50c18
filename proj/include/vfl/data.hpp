#pragma once

#include "vfl/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vfl {

struct Dataset {
  Mat features;                            // N x d
  IVec labels;                             // contiguous class indices 0..C-1
  std::vector<std::string> feature_names;  // size d
  std::vector<double> label_values;        // original value per class index

  Index rows() const { return features.rows(); }
  Index dims() const { return features.cols(); }
  int num_classes() const { return static_cast<int>(label_values.size()); }
};

// Plain numeric CSV. With has_header the first line names the columns;
// without it columns are named c0..c{d-1}. label_column is matched against
// those names (an all-digit string is also accepted as a column index).
// Any unparseable or non-finite cell is an error naming the file line.
// Distinct raw label values are mapped, sorted ascending, to 0..C-1.
Dataset load_csv(const std::string& path, const std::string& label_column, bool has_header);

// Label column is written last, named "label", with the original label values.
void save_csv(const Dataset& d, const std::string& path);

struct FeatureStats {
  Vec mean;
  Vec stddev;                  // population std; 1.0 where constant
  std::vector<bool> constant;  // flagged features transform to exactly 0
};

FeatureStats feature_stats(const Mat& x);
Mat apply_stats(const Mat& x, const FeatureStats& s);
std::pair<Dataset, FeatureStats> standardize(const Dataset& d);

struct SplitSpec {
  std::vector<std::vector<int>> client_columns;  // disjoint, union = all columns
  Index overlap_size = 0;                        // N_o
  std::uint64_t seed = 0;
};

// Vertical split: every client holds its columns of the same N_o randomly
// chosen overlap rows (row-aligned across clients); the remaining rows are
// dealt round-robin to clients as unaligned samples, labels discarded.
// Only the server sees overlap labels.
struct VflSplit {
  std::vector<Mat> overlap_features;             // per client, N_o x d_k
  std::vector<Mat> unaligned_features;           // per client, N_u^k x d_k
  IVec overlap_labels;                           // server side
  std::vector<int> overlap_rows;                 // original row per overlap row
  std::vector<std::vector<int>> unaligned_rows;  // per client, original rows
  std::vector<std::vector<int>> client_columns;
  int num_classes = 0;

  std::size_t num_clients() const { return overlap_features.size(); }
};

VflSplit vertical_partition(const Dataset& d, const SplitSpec& spec);

enum class SyntheticTask { Linear, XorCross };

struct SyntheticSpec {
  Index n = 2000;
  Index d_per_client = 4;
  int classes = 2;
  SyntheticTask task = SyntheticTask::XorCross;
  // Linear: logit noise scale. XorCross: per-feature noise std around the
  // latent factor embedding.
  double noise = 0.5;
  std::uint64_t seed = 0;
  // Run the learnability checks below at generation time.
  bool verify = true;
};

// Empirical learnability of a generated dataset, fit on a train part and
// scored on a holdout. For XorCross the joint fit uses a small ReLU net
// (the task is not linearly separable); single-client fits are logistic.
struct GenCheck {
  std::vector<double> single_client_accuracy;
  double joint_accuracy = 0.0;
  double chance = 0.0;  // 1/C
  bool passed = false;
};

GenCheck check_synthetic(const Dataset& d, const SyntheticSpec& spec);

// Two clients, d_per_client features each (client 0 owns columns
// 0..d_per_client-1). Linear: labels from C random linear scores of joint
// features. XorCross: labels depend on latent factors split across clients
// so that neither half alone predicts the label while both halves together
// do. With spec.verify the post-conditions are checked empirically
// (XorCross: single-client accuracy <= 1/C + 0.1, joint >= 0.95) and a
// failure throws.
Dataset gen_synthetic(const SyntheticSpec& spec);

// Seeded row split; second part has round(n * test_fraction) rows.
std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction,
                                             std::uint64_t seed);

// Columns of x restricted to the given original column indices.
Mat select_columns(const Mat& x, const std::vector<int>& cols);

}  // namespace vfl
