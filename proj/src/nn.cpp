#include "vfl/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vfl {

namespace {

void check_chain(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("mlp_init: empty layer list");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].in_dim <= 0 || specs[i].out_dim <= 0)
      throw std::invalid_argument("mlp_init: non-positive dimension at layer " + std::to_string(i));
    if (i > 0 && specs[i].in_dim != specs[i - 1].out_dim)
      throw std::invalid_argument("mlp_init: dimension mismatch between layers " +
                                  std::to_string(i - 1) + " and " + std::to_string(i));
  }
}

Mat apply_activation(const Mat& z, Activation act) {
  if (act == Activation::ReLU) return z.cwiseMax(0.0);
  return z;
}

}  // namespace

MlpParams MlpParams::slice(std::size_t first, std::size_t count) const {
  if (first + count > layers.size())
    throw std::invalid_argument("MlpParams::slice: range out of bounds");
  MlpParams out;
  out.layers.assign(layers.begin() + static_cast<std::ptrdiff_t>(first),
                    layers.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

MlpParams mlp_init(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  check_chain(specs);
  Rng rng(seed);
  MlpParams p;
  p.layers.reserve(specs.size());
  for (const LayerSpec& s : specs) {
    Layer layer;
    layer.weight.resize(s.in_dim, s.out_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in_dim));
    // Fixed draw order (row-major) is part of the determinism contract.
    for (Index i = 0; i < s.in_dim; ++i)
      for (Index j = 0; j < s.out_dim; ++j) layer.weight(i, j) = rng.uniform(-bound, bound);
    layer.bias = Vec::Zero(s.out_dim);
    layer.activation = s.activation;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ForwardTrace forward(const MlpParams& p, const Mat& x) {
  if (p.empty()) throw std::invalid_argument("forward: uninitialized params");
  if (x.cols() != p.in_dim())
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " features, model expects " + std::to_string(p.in_dim()));
  if (!all_finite(x)) throw std::invalid_argument("forward: non-finite input");

  ForwardTrace t;
  t.input = x;
  t.pre.reserve(p.layers.size());
  t.post.reserve(p.layers.size());
  const Mat* a = &t.input;
  for (const Layer& layer : p.layers) {
    Mat z = (*a) * layer.weight;
    z.rowwise() += layer.bias.transpose();
    t.post.push_back(apply_activation(z, layer.activation));
    t.pre.push_back(std::move(z));
    a = &t.post.back();
  }
  return t;
}

Mat forward_output(const MlpParams& p, const Mat& x) { return forward(p, x).output(); }

XentResult softmax_cross_entropy(const Mat& logits, const IVec& labels) {
  const Index n = logits.rows();
  const Index c = logits.cols();
  if (n == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
  if (labels.size() != n)
    throw std::invalid_argument("softmax_cross_entropy: batch/label size mismatch");
  for (Index i = 0; i < n; ++i)
    if (labels[i] < 0 || labels[i] >= c)
      throw std::invalid_argument("softmax_cross_entropy: label out of range at row " +
                                  std::to_string(i));

  XentResult r;
  r.dlogits.resize(n, c);
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    const Vec shifted = (logits.row(i).array() - m).transpose();
    const Vec e = shifted.array().exp();
    const double s = e.sum();
    loss -= shifted[labels[i]] - std::log(s);
    r.dlogits.row(i) = (e / s).transpose();
    r.dlogits(i, labels[i]) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  r.loss = loss * inv_n;
  r.dlogits *= inv_n;
  return r;
}

Gradients backward(const MlpParams& p, const ForwardTrace& trace, const Mat& dout) {
  const std::size_t L = p.layers.size();
  if (L == 0) throw std::invalid_argument("backward: uninitialized params");
  if (trace.pre.size() != L || trace.post.size() != L)
    throw std::invalid_argument("backward: trace does not match model depth");
  if (dout.rows() != trace.input.rows() || dout.cols() != p.out_dim())
    throw std::invalid_argument("backward: dout shape mismatch");

  Gradients g;
  g.params.layers.resize(L);
  Mat da = dout;
  for (std::size_t li = L; li-- > 0;) {
    const Layer& layer = p.layers[li];
    Mat dz;
    if (layer.activation == Activation::ReLU) {
      // Subgradient 0 at exactly 0.
      dz = da.cwiseProduct((trace.pre[li].array() > 0.0).cast<double>().matrix());
    } else {
      dz = std::move(da);
    }
    const Mat& a_prev = (li == 0) ? trace.input : trace.post[li - 1];
    Layer& gl = g.params.layers[li];
    gl.weight = a_prev.transpose() * dz;
    gl.bias = dz.colwise().sum().transpose();
    gl.activation = layer.activation;
    da = dz * layer.weight.transpose();
  }
  g.input = std::move(da);
  return g;
}

MlpParams sgd_step(const MlpParams& p, const MlpParams& grads, double lr) {
  if (p.layers.size() != grads.layers.size())
    throw std::invalid_argument("sgd_step: params/grads depth mismatch");
  MlpParams out = p;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    if (out.layers[i].weight.rows() != grads.layers[i].weight.rows() ||
        out.layers[i].weight.cols() != grads.layers[i].weight.cols())
      throw std::invalid_argument("sgd_step: params/grads shape mismatch at layer " +
                                  std::to_string(i));
    out.layers[i].weight -= lr * grads.layers[i].weight;
    out.layers[i].bias -= lr * grads.layers[i].bias;
  }
  return out;
}

void add_scaled(MlpParams& acc, const MlpParams& g, double scale) {
  if (acc.layers.size() != g.layers.size())
    throw std::invalid_argument("add_scaled: depth mismatch");
  for (std::size_t i = 0; i < acc.layers.size(); ++i) {
    acc.layers[i].weight += scale * g.layers[i].weight;
    acc.layers[i].bias += scale * g.layers[i].bias;
  }
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

Mat predict_proba(const MlpParams& p, const Mat& x) {
  return softmax_rows(forward_output(p, x));
}

IVec argmax_rows(const Mat& m) {
  IVec out(m.rows());
  for (Index i = 0; i < m.rows(); ++i) {
    Index j = 0;
    m.row(i).maxCoeff(&j);  // Eigen returns the first maximum: lowest index on ties
    out[i] = static_cast<int>(j);
  }
  return out;
}

}  // namespace vfl
