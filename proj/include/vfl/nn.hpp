#pragma once

#include "vfl/types.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace vfl {

enum class Activation { ReLU, Identity };

struct LayerSpec {
  Index in_dim = 0;
  Index out_dim = 0;
  Activation activation = Activation::ReLU;
};

struct Layer {
  Mat weight;  // in_dim x out_dim
  Vec bias;    // out_dim
  Activation activation = Activation::ReLU;
};

// A dense chain. Doubles as the gradient container (same shapes).
struct MlpParams {
  std::vector<Layer> layers;

  Index in_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
  Index out_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }
  bool empty() const { return layers.empty(); }

  // Sub-chain [first, first+count). Shapes are small; copying is fine.
  MlpParams slice(std::size_t first, std::size_t count) const;
};

// Uniform init in [-1/sqrt(in_dim), +1/sqrt(in_dim)], biases zero.
// Same seed gives bit-identical parameters.
MlpParams mlp_init(const std::vector<LayerSpec>& specs, std::uint64_t seed);

// Everything backward needs: input plus per-layer pre/post activations.
struct ForwardTrace {
  Mat input;
  std::vector<Mat> pre;   // z_l = a_{l-1} W_l + b_l
  std::vector<Mat> post;  // a_l = act(z_l)

  const Mat& output() const { return post.back(); }
};

ForwardTrace forward(const MlpParams& p, const Mat& x);
Mat forward_output(const MlpParams& p, const Mat& x);

struct XentResult {
  double loss = 0.0;
  Mat dlogits;  // (softmax - onehot) / batch_size
};

// Mean negative log softmax probability of the true class. Max-subtracted,
// so arbitrarily large logits stay finite.
XentResult softmax_cross_entropy(const Mat& logits, const IVec& labels);

struct Gradients {
  MlpParams params;  // same shapes as the model
  Mat input;         // dLoss/dx, needed by the split-network protocol
};

// dout is dLoss/d(output activations).
Gradients backward(const MlpParams& p, const ForwardTrace& trace, const Mat& dout);

MlpParams sgd_step(const MlpParams& p, const MlpParams& grads, double lr);

// acc += scale * g, layer by layer.
void add_scaled(MlpParams& acc, const MlpParams& g, double scale);

Mat softmax_rows(const Mat& logits);
Mat predict_proba(const MlpParams& p, const Mat& x);
IVec argmax_rows(const Mat& m);

}  // namespace vfl
