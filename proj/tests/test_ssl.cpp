#include "vfl/ssl.hpp"

#include "vfl/data.hpp"
#include "vfl/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace vfl;

namespace {

AugmentConfig make_aug(double r_m, double sigma, Index d) {
  AugmentConfig aug;
  aug.r_m = r_m;
  aug.sigma = sigma;
  aug.feature_means = Vec::Zero(d);
  return aug;
}

LocalModel small_model(Index in, int classes, std::uint64_t seed) {
  LocalModel m;
  m.params = mlp_init({{in, 16, Activation::ReLU},
                       {16, 8, Activation::Identity},
                       {8, static_cast<Index>(classes), Activation::Identity}},
                      seed);
  m.extractor_layers = 2;
  return m;
}

}  // namespace

TEST_SUITE("ssl") {

TEST_CASE("keep-all mask with zero noise is the exact identity") {
  Rng rng(3);
  Vec x(5);
  x << 1.5, -2.0, 0.25, 7.0, -0.5;
  AugmentConfig aug = make_aug(0.0, 0.0, 5);  // masked fraction 0, no noise
  const AugmentedPair pair = augment_pair(x, aug, rng);
  CHECK((pair.weak - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pair.strong - x).cwiseAbs().maxCoeff() == 0.0);

  AugmentConfig keep = make_aug(1.0, 0.0, 5);  // keep fraction 1 means the same
  keep.mask_semantics = MaskSemantics::KeepFraction;
  const AugmentedPair pair2 = augment_pair(x, keep, rng);
  CHECK((pair2.weak - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mask-everything replaces every element by the feature mean") {
  Rng rng(5);
  Vec x(4);
  x << 3.0, -1.0, 2.0, 9.0;
  AugmentConfig aug = make_aug(1.0, 0.0, 4);
  aug.feature_means << 0.5, 0.5, 0.5, 0.5;
  const Vec w = weak_augment(x, aug, rng);
  CHECK(w.isConstant(0.5));
}

TEST_CASE("empirical mask fraction tracks r_m under both semantics") {
  Rng rng(7);
  const Index d = 10;
  Vec x = Vec::Ones(d) * 42.0;  // far from the mean, masking is visible
  AugmentConfig aug = make_aug(0.3, 0.0, d);
  long masked = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const Vec w = weak_augment(x, aug, rng);
    for (Index j = 0; j < d; ++j)
      if (w[j] == 0.0) ++masked;
  }
  const double frac = static_cast<double>(masked) / (draws * d);
  CHECK(frac == doctest::Approx(0.3).epsilon(0.05));

  aug.mask_semantics = MaskSemantics::KeepFraction;
  aug.r_m = 0.3;  // now the keep probability
  masked = 0;
  for (int i = 0; i < draws; ++i) {
    const Vec w = weak_augment(x, aug, rng);
    for (Index j = 0; j < d; ++j)
      if (w[j] == 0.0) ++masked;
  }
  CHECK(static_cast<double>(masked) / (draws * d) == doctest::Approx(0.7).epsilon(0.05));
}

TEST_CASE("a shared mask makes the strong view weak plus noise only") {
  Rng rng(9);
  const Index d = 12;
  Vec x = Vec::Ones(d) * 100.0;  // masking one view but not the other would show up as 100
  AugmentConfig aug = make_aug(0.5, 1e-9, d);
  for (int i = 0; i < 50; ++i) {
    const AugmentedPair pair = augment_pair(x, aug, rng);
    CHECK((pair.strong - pair.weak).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("strong view noise has roughly the configured spread") {
  Rng rng(11);
  const Index d = 8;
  const Vec x = Vec::Zero(d);
  AugmentConfig aug = make_aug(0.0, 0.25, d);
  double ss = 0.0;
  const int draws = 4000;
  for (int i = 0; i < draws; ++i) {
    const AugmentedPair pair = augment_pair(x, aug, rng);
    ss += (pair.strong - pair.weak).squaredNorm();
  }
  const double sd = std::sqrt(ss / (draws * d));
  CHECK(sd == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("ssl step bookkeeping: total loss combines the two terms") {
  Rng rng(13);
  LocalModel m = small_model(4, 2, 21);
  Mat xl(8, 4), xu(16, 4);
  IVec yl(8);
  for (Index i = 0; i < 8; ++i) {
    yl[i] = static_cast<int>(i % 2);
    for (Index j = 0; j < 4; ++j) xl(i, j) = rng.gaussian() + (yl[i] == 0 ? -1.0 : 1.0);
  }
  for (Index i = 0; i < 16; ++i)
    for (Index j = 0; j < 4; ++j) xu(i, j) = rng.gaussian();

  SslConfig cfg;
  cfg.tau_fm = 0.4;  // low gate so some unlabeled samples qualify
  cfg.lambda_u = 0.5;
  Rng step_rng(17);
  const SslStepStats stats = ssl_step(m, xl, yl, xu, cfg, make_aug(0.2, 0.1, 4), step_rng);
  CHECK(stats.unlabeled_seen == 16);
  CHECK(stats.unlabeled_confident >= 0);
  CHECK(stats.unlabeled_confident <= 16);
  CHECK(stats.loss_total ==
        doctest::Approx(stats.loss_supervised + 0.5 * stats.loss_unsupervised).epsilon(1e-12));
}

TEST_CASE("an impossible confidence gate zeroes the unsupervised term") {
  Rng rng(19);
  LocalModel m = small_model(3, 3, 23);
  Mat xl(4, 3), xu(8, 3);
  IVec yl(4);
  for (Index i = 0; i < 4; ++i) {
    yl[i] = static_cast<int>(i % 3);
    for (Index j = 0; j < 3; ++j) xl(i, j) = rng.gaussian();
  }
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 3; ++j) xu(i, j) = rng.gaussian();
  SslConfig cfg;
  cfg.tau_fm = 0.999999;  // a fresh model cannot be this confident
  Rng step_rng(29);
  const SslStepStats stats = ssl_step(m, xl, yl, xu, cfg, make_aug(0.2, 0.1, 3), step_rng);
  CHECK(stats.unlabeled_confident == 0);
  CHECK(stats.loss_unsupervised == 0.0);
}

TEST_CASE("training is deterministic for a fixed seed") {
  Rng data_rng(31);
  Mat xl(12, 3), xu(20, 3);
  IVec yl(12);
  for (Index i = 0; i < 12; ++i) {
    yl[i] = static_cast<int>(i % 2);
    for (Index j = 0; j < 3; ++j) xl(i, j) = data_rng.gaussian();
  }
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 3; ++j) xu(i, j) = data_rng.gaussian();
  SslConfig cfg;
  cfg.epochs = 3;
  cfg.tau_fm = 0.6;

  LocalModel a = small_model(3, 2, 37);
  LocalModel b = small_model(3, 2, 37);
  Rng ra(41), rb(41);
  local_ssl_train(a, xl, yl, xu, cfg, make_aug(0.2, 0.1, 3), ra);
  local_ssl_train(b, xl, yl, xu, cfg, make_aug(0.2, 0.1, 3), rb);
  for (std::size_t l = 0; l < a.params.layers.size(); ++l)
    CHECK((a.params.layers[l].weight - b.params.layers[l].weight).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero epochs leave the model untouched; empty unlabeled pool is fine") {
  Rng rng(43);
  Mat xl(6, 3);
  IVec yl(6);
  for (Index i = 0; i < 6; ++i) {
    yl[i] = static_cast<int>(i % 2);
    for (Index j = 0; j < 3; ++j) xl(i, j) = rng.gaussian();
  }
  LocalModel m = small_model(3, 2, 47);
  const Mat before = m.params.layers[0].weight;
  SslConfig cfg;
  cfg.epochs = 0;
  Rng r1(1);
  local_ssl_train(m, xl, yl, Mat(0, 3), cfg, make_aug(0.2, 0.1, 3), r1);
  CHECK((m.params.layers[0].weight - before).cwiseAbs().maxCoeff() == 0.0);

  cfg.epochs = 2;
  Rng r2(2);
  const SslTrainStats stats = local_ssl_train(m, xl, yl, Mat(0, 3), cfg, make_aug(0.2, 0.1, 3), r2);
  CHECK(stats.steps > 0);
  CHECK((m.params.layers[0].weight - before).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("fully labeled supervised limit fits a linear task") {
  SyntheticSpec spec;
  spec.task = SyntheticTask::Linear;
  spec.n = 256;
  spec.d_per_client = 2;
  spec.classes = 2;
  spec.noise = 0.0;
  spec.seed = 53;
  spec.verify = false;
  const Dataset d = gen_synthetic(spec);
  const auto [z, stats] = standardize(d);

  LocalModel m = small_model(4, 2, 59);
  SslConfig cfg;
  cfg.epochs = 150;
  // Identity augmentation: with every sample labeled this is plain
  // supervised SGD, which must fit a separable task.
  AugmentConfig aug = make_aug(0.0, 0.0, 4);
  Rng rng(61);
  local_ssl_train(m, z.features, z.labels, Mat(0, 4), cfg, aug, rng);
  const double train_acc = accuracy(argmax_rows(predict_proba(m.params, z.features)), z.labels);
  CHECK(train_acc >= 0.95);
}

}  // TEST_SUITE
