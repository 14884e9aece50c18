#pragma once

#include "vfl/nn.hpp"
#include "vfl/types.hpp"

namespace vfl {

// How r_m is read. The prose convention ("fraction of elements masked") is
// the default; keep_fraction treats r_m as the per-element keep probability.
enum class MaskSemantics { MaskedFraction, KeepFraction };

struct AugmentConfig {
  double r_m = 0.2;
  double sigma = 0.1;
  Vec feature_means;  // replacement values for masked elements
  MaskSemantics mask_semantics = MaskSemantics::MaskedFraction;
  // One mask drawn per sample and shared between the weak and strong views
  // of that sample; the strong view adds noise on top.
  bool shared_mask = true;

  double keep_prob() const {
    return mask_semantics == MaskSemantics::MaskedFraction ? 1.0 - r_m : r_m;
  }
};

// Weak view: per-element Bernoulli keep, masked elements replaced by the
// local feature mean.
Vec weak_augment(const Vec& x, const AugmentConfig& cfg, Rng& rng);
// Strong view: weak view plus N(0, sigma^2) noise on every element.
Vec strong_augment(const Vec& x, const AugmentConfig& cfg, Rng& rng);

struct AugmentedPair {
  Vec weak;
  Vec strong;
};

// The weak/strong pair for one sample, sharing the mask when configured.
AugmentedPair augment_pair(const Vec& x, const AugmentConfig& cfg, Rng& rng);

struct SslConfig {
  double lambda_u = 1.0;
  double tau_fm = 0.95;  // confidence gate on the weak view
  int epochs = 50;       // E_c
  int batch = 32;
  double lr = 0.01;
};

// Client-side model: feature extractor followed by a small labeled head.
// One parameter chain so training backpropagates through both at once; the
// representation is the activation at the extractor/head boundary.
struct LocalModel {
  MlpParams params;
  std::size_t extractor_layers = 0;

  MlpParams extractor() const { return params.slice(0, extractor_layers); }
};

struct SslStepStats {
  double loss_supervised = 0.0;
  double loss_unsupervised = 0.0;
  double loss_total = 0.0;
  double lambda_u = 0.0;
  int unlabeled_seen = 0;
  int unlabeled_confident = 0;
};

// One SGD step on l_s + lambda_u * l_u. l_s is cross-entropy on the weakly
// augmented labeled batch. l_u is cross-entropy of strong-view predictions
// against weak-view pseudo-labels, averaged over samples whose weak-view
// confidence reaches tau_fm (zero when none qualify). Pseudo-labels are
// detached: no gradient flows through the weak unlabeled pass.
SslStepStats ssl_step(LocalModel& model, const Mat& x_labeled, const IVec& y_labeled,
                      const Mat& x_unlabeled, const SslConfig& cfg, const AugmentConfig& aug,
                      Rng& rng);

struct SslTrainStats {
  int steps = 0;
  double final_loss_supervised = 0.0;
  double final_loss_unsupervised = 0.0;
  double confident_fraction = 0.0;  // over the whole run
};

// cfg.epochs passes over the labeled set in batches of cfg.batch, paired
// with equally sized unlabeled batches drawn from a persistent shuffled
// cycle (reshuffled on wrap, carried across epochs). An empty unlabeled set
// drops the consistency term.
SslTrainStats local_ssl_train(LocalModel& model, const Mat& x_labeled, const IVec& y_labeled,
                              const Mat& x_unlabeled, const SslConfig& cfg,
                              const AugmentConfig& aug, Rng& rng);

}  // namespace vfl
