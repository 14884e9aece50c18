#include "vfl/ssl.hpp"

#include <numeric>
#include <stdexcept>
#include <vector>

namespace vfl {

namespace {

void check_aug(const AugmentConfig& cfg, Index dim) {
  if (cfg.r_m < 0.0 || cfg.r_m > 1.0)
    throw std::invalid_argument("augment: r_m must be in [0,1]");
  if (cfg.sigma < 0.0) throw std::invalid_argument("augment: sigma must be >= 0");
  if (cfg.feature_means.size() != dim)
    throw std::invalid_argument("augment: feature_means dimension mismatch");
}

Vec masked_view(const Vec& x, const AugmentConfig& cfg, Rng& rng) {
  const double keep = cfg.keep_prob();
  Vec out(x.size());
  for (Index i = 0; i < x.size(); ++i)
    out[i] = rng.bernoulli(keep) ? x[i] : cfg.feature_means[i];
  return out;
}

Vec add_noise(Vec v, double sigma, Rng& rng) {
  for (Index i = 0; i < v.size(); ++i) v[i] += sigma * rng.gaussian();
  return v;
}

}  // namespace

Vec weak_augment(const Vec& x, const AugmentConfig& cfg, Rng& rng) {
  check_aug(cfg, x.size());
  return masked_view(x, cfg, rng);
}

Vec strong_augment(const Vec& x, const AugmentConfig& cfg, Rng& rng) {
  check_aug(cfg, x.size());
  return add_noise(masked_view(x, cfg, rng), cfg.sigma, rng);
}

AugmentedPair augment_pair(const Vec& x, const AugmentConfig& cfg, Rng& rng) {
  check_aug(cfg, x.size());
  AugmentedPair pair;
  pair.weak = masked_view(x, cfg, rng);
  if (cfg.shared_mask) {
    pair.strong = add_noise(pair.weak, cfg.sigma, rng);
  } else {
    pair.strong = add_noise(masked_view(x, cfg, rng), cfg.sigma, rng);
  }
  return pair;
}

SslStepStats ssl_step(LocalModel& model, const Mat& x_labeled, const IVec& y_labeled,
                      const Mat& x_unlabeled, const SslConfig& cfg, const AugmentConfig& aug,
                      Rng& rng) {
  if (model.params.empty()) throw std::invalid_argument("ssl_step: uninitialized model");
  if (x_labeled.rows() == 0) throw std::invalid_argument("ssl_step: empty labeled batch");
  if (x_labeled.rows() != y_labeled.size())
    throw std::invalid_argument("ssl_step: labeled batch/label mismatch");

  SslStepStats stats;
  stats.lambda_u = cfg.lambda_u;

  // Supervised half: weak views of the labeled batch.
  Mat xl(x_labeled.rows(), x_labeled.cols());
  for (Index i = 0; i < x_labeled.rows(); ++i)
    xl.row(i) = weak_augment(x_labeled.row(i).transpose(), aug, rng).transpose();
  const ForwardTrace trace_s = forward(model.params, xl);
  const XentResult xent_s = softmax_cross_entropy(trace_s.output(), y_labeled);
  Gradients grads = backward(model.params, trace_s, xent_s.dlogits);
  stats.loss_supervised = xent_s.loss;

  // Consistency half: confident weak-view pseudo-labels supervise the strong view.
  stats.unlabeled_seen = static_cast<int>(x_unlabeled.rows());
  if (x_unlabeled.rows() > 0 && cfg.lambda_u != 0.0) {
    Mat xw(x_unlabeled.rows(), x_unlabeled.cols());
    Mat xs(x_unlabeled.rows(), x_unlabeled.cols());
    for (Index i = 0; i < x_unlabeled.rows(); ++i) {
      const AugmentedPair pair = augment_pair(x_unlabeled.row(i).transpose(), aug, rng);
      xw.row(i) = pair.weak.transpose();
      xs.row(i) = pair.strong.transpose();
    }
    const Mat probs = predict_proba(model.params, xw);
    std::vector<Index> confident;
    IVec pseudo_all = argmax_rows(probs);
    for (Index i = 0; i < probs.rows(); ++i)
      if (probs.row(i).maxCoeff() >= cfg.tau_fm) confident.push_back(i);
    stats.unlabeled_confident = static_cast<int>(confident.size());

    if (!confident.empty()) {
      Mat xsc(static_cast<Index>(confident.size()), xs.cols());
      IVec pseudo(static_cast<Index>(confident.size()));
      for (std::size_t i = 0; i < confident.size(); ++i) {
        xsc.row(static_cast<Index>(i)) = xs.row(confident[i]);
        pseudo[static_cast<Index>(i)] = pseudo_all[confident[i]];
      }
      const ForwardTrace trace_u = forward(model.params, xsc);
      const XentResult xent_u = softmax_cross_entropy(trace_u.output(), pseudo);
      const Gradients grads_u = backward(model.params, trace_u, xent_u.dlogits);
      add_scaled(grads.params, grads_u.params, cfg.lambda_u);
      stats.loss_unsupervised = xent_u.loss;
    }
  }

  stats.loss_total = stats.loss_supervised + cfg.lambda_u * stats.loss_unsupervised;
  model.params = sgd_step(model.params, grads.params, cfg.lr);
  return stats;
}

SslTrainStats local_ssl_train(LocalModel& model, const Mat& x_labeled, const IVec& y_labeled,
                              const Mat& x_unlabeled, const SslConfig& cfg,
                              const AugmentConfig& aug, Rng& rng) {
  if (x_labeled.rows() == 0) throw std::invalid_argument("local_ssl_train: no labeled data");
  if (cfg.batch < 1) throw std::invalid_argument("local_ssl_train: batch must be >= 1");
  if (cfg.epochs < 0) throw std::invalid_argument("local_ssl_train: negative epochs");

  SslTrainStats out;
  const Index n_l = x_labeled.rows();
  const Index n_u = x_unlabeled.rows();
  std::vector<int> order_l(static_cast<std::size_t>(n_l));
  std::iota(order_l.begin(), order_l.end(), 0);
  std::vector<int> order_u(static_cast<std::size_t>(n_u));
  std::iota(order_u.begin(), order_u.end(), 0);
  std::size_t cursor_u = order_u.size();  // forces a shuffle on first use

  long long confident = 0, seen = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order_l);
    for (Index start = 0; start < n_l; start += cfg.batch) {
      const Index b = std::min<Index>(cfg.batch, n_l - start);
      Mat xb(b, x_labeled.cols());
      IVec yb(b);
      for (Index i = 0; i < b; ++i) {
        xb.row(i) = x_labeled.row(order_l[static_cast<std::size_t>(start + i)]);
        yb[i] = y_labeled[order_l[static_cast<std::size_t>(start + i)]];
      }
      Mat ub(std::min<Index>(cfg.batch, n_u), x_unlabeled.cols());
      for (Index i = 0; i < ub.rows(); ++i) {
        if (cursor_u == order_u.size()) {
          rng.shuffle(order_u);
          cursor_u = 0;
        }
        ub.row(i) = x_unlabeled.row(order_u[cursor_u++]);
      }
      const SslStepStats step = ssl_step(model, xb, yb, ub, cfg, aug, rng);
      ++out.steps;
      confident += step.unlabeled_confident;
      seen += step.unlabeled_seen;
      out.final_loss_supervised = step.loss_supervised;
      out.final_loss_unsupervised = step.loss_unsupervised;
    }
  }
  out.confident_fraction = seen > 0 ? static_cast<double>(confident) / static_cast<double>(seen) : 0.0;
  return out;
}

}  // namespace vfl
