#include "vfl/nn.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace vfl;

namespace {

Mat random_input(Index rows, Index cols, Rng& rng) {
  Mat x(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) x(i, j) = rng.gaussian();
  return x;
}

IVec random_labels(Index rows, int classes, Rng& rng) {
  IVec y(rows);
  for (Index i = 0; i < rows; ++i) y[i] = static_cast<int>(rng.uniform_index(classes));
  return y;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("init shapes, zero biases, bound, determinism") {
  const std::vector<LayerSpec> specs = {{5, 7, Activation::ReLU}, {7, 3, Activation::Identity}};
  const MlpParams a = mlp_init(specs, 42);
  const MlpParams b = mlp_init(specs, 42);
  const MlpParams c = mlp_init(specs, 43);
  REQUIRE(a.layers.size() == 2);
  CHECK(a.layers[0].weight.rows() == 5);
  CHECK(a.layers[0].weight.cols() == 7);
  CHECK(a.layers[1].weight.rows() == 7);
  CHECK(a.layers[1].weight.cols() == 3);
  CHECK(a.in_dim() == 5);
  CHECK(a.out_dim() == 3);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(a.layers[l].bias.isZero(0.0));
    const double bound = 1.0 / std::sqrt(static_cast<double>(a.layers[l].weight.rows()));
    CHECK(a.layers[l].weight.cwiseAbs().maxCoeff() <= bound);
    CHECK((a.layers[l].weight - b.layers[l].weight).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((a.layers[0].weight - c.layers[0].weight).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("init rejects a broken chain") {
  CHECK_THROWS_AS(mlp_init({{5, 7, Activation::ReLU}, {6, 3, Activation::Identity}}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(mlp_init({}, 1), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init({{0, 3, Activation::ReLU}}, 1), std::invalid_argument);
}

TEST_CASE("forward equals the scalar-loop oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Index in = 1 + static_cast<Index>(rng.uniform_index(6));
    const Index hidden = 1 + static_cast<Index>(rng.uniform_index(6));
    const Index out = 1 + static_cast<Index>(rng.uniform_index(4));
    const MlpParams p = mlp_init(
        {{in, hidden, Activation::ReLU}, {hidden, out, Activation::Identity}},
        1000 + static_cast<std::uint64_t>(trial));
    const Mat x = random_input(4, in, rng);
    const Mat got = forward_output(p, x);
    for (Index r = 0; r < x.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(in));
      for (Index c = 0; c < in; ++c) row[static_cast<std::size_t>(c)] = x(r, c);
      const std::vector<double> want = oracles::naive_forward(p, row);
      for (Index c = 0; c < out; ++c)
        CHECK(got(r, c) == doctest::Approx(want[static_cast<std::size_t>(c)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward rejects bad input") {
  const MlpParams p = mlp_init({{3, 2, Activation::Identity}}, 1);
  Rng rng(1);
  CHECK_THROWS_AS(forward(MlpParams{}, random_input(2, 3, rng)), std::invalid_argument);
  CHECK_THROWS_AS(forward(p, random_input(2, 4, rng)), std::invalid_argument);
  Mat bad = random_input(2, 3, rng);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(forward(p, bad), std::invalid_argument);
}

TEST_CASE("uniform logits give ln C loss and centered gradients") {
  const int c = 10;
  const Mat logits = Mat::Constant(4, c, 1.7);
  IVec y(4);
  y << 0, 3, 9, 5;
  const XentResult r = softmax_cross_entropy(logits, y);
  CHECK(r.loss == doctest::Approx(2.302585092994046).epsilon(1e-12));
  for (Index i = 0; i < 4; ++i) {
    CHECK(r.dlogits.row(i).sum() == doctest::Approx(0.0).epsilon(1e-12));
    // (1/C - 1) / N on the true class, (1/C) / N elsewhere
    CHECK(r.dlogits(i, y[i]) == doctest::Approx((1.0 / c - 1.0) / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("saturated logits give near-zero loss and survive a huge shift") {
  Mat logits(2, 3);
  logits << 50, 0, 0, 0, 0, 50;
  IVec y(2);
  y << 0, 2;
  CHECK(softmax_cross_entropy(logits, y).loss == doctest::Approx(0.0).epsilon(1e-12));
  logits.array() += 1e8;  // max subtraction keeps this finite
  const XentResult r = softmax_cross_entropy(logits, y);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cross entropy rejects bad labels and empty batches") {
  const Mat logits = Mat::Zero(2, 3);
  IVec y(2);
  y << 0, 3;
  CHECK_THROWS_AS(softmax_cross_entropy(logits, y), std::invalid_argument);
  y << -1, 0;
  CHECK_THROWS_AS(softmax_cross_entropy(logits, y), std::invalid_argument);
  CHECK_THROWS_AS(softmax_cross_entropy(Mat(0, 3), IVec(0)), std::invalid_argument);
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(11);
  int done = 0;
  std::uint64_t net_seed = 500;
  while (done < 8) {
    const Index in = 2 + static_cast<Index>(rng.uniform_index(3));
    const Index hidden = 2 + static_cast<Index>(rng.uniform_index(3));
    const int classes = 2 + static_cast<int>(rng.uniform_index(2));
    MlpParams p = mlp_init(
        {{in, hidden, Activation::ReLU}, {hidden, static_cast<Index>(classes), Activation::Identity}},
        ++net_seed);
    Mat x = random_input(3, in, rng);
    const IVec y = random_labels(3, classes, rng);
    if (oracles::min_preactivation_margin(p, x) < 1e-3) continue;  // too close to a kink
    ++done;

    const ForwardTrace trace = forward(p, x);
    const XentResult xent = softmax_cross_entropy(trace.output(), y);
    const Gradients g = backward(p, trace, xent.dlogits);

    const double h = 1e-5;
    auto rel_err = [](double a, double b) {
      return std::abs(a - b) / std::max({1e-3, std::abs(a), std::abs(b)});
    };
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      for (Index i = 0; i < p.layers[l].weight.rows(); ++i)
        for (Index j = 0; j < p.layers[l].weight.cols(); ++j) {
          const double fd = oracles::fd_loss_derivative(p, x, y, p.layers[l].weight(i, j), h);
          CHECK(rel_err(g.params.layers[l].weight(i, j), fd) < 1e-4);
        }
      for (Index j = 0; j < p.layers[l].bias.size(); ++j) {
        const double fd = oracles::fd_loss_derivative(p, x, y, p.layers[l].bias[j], h);
        CHECK(rel_err(g.params.layers[l].bias[j], fd) < 1e-4);
      }
    }
    for (Index r = 0; r < x.rows(); ++r)
      for (Index c = 0; c < x.cols(); ++c) {
        const double fd = oracles::fd_loss_derivative(p, x, y, x(r, c), h);
        CHECK(rel_err(g.input(r, c), fd) < 1e-4);
      }
  }
}

TEST_CASE("relu passes no gradient at an exactly zero preactivation") {
  MlpParams p = mlp_init({{1, 1, Activation::ReLU}, {1, 1, Activation::Identity}}, 3);
  p.layers[0].weight(0, 0) = 2.0;
  p.layers[0].bias[0] = 0.0;
  p.layers[1].weight(0, 0) = 1.5;
  Mat x(1, 1);
  x << 0.0;  // preactivation exactly 0
  const ForwardTrace t = forward(p, x);
  Mat dout(1, 1);
  dout << 1.0;
  const Gradients g = backward(p, t, dout);
  CHECK(g.input(0, 0) == 0.0);
  CHECK(g.params.layers[0].weight(0, 0) == 0.0);
}

TEST_CASE("sgd step is w minus lr g, and validates shapes") {
  const MlpParams p = mlp_init({{2, 2, Activation::Identity}}, 5);
  MlpParams g = p;
  g.layers[0].weight.setConstant(0.5);
  g.layers[0].bias.setConstant(2.0);
  const MlpParams next = sgd_step(p, g, 0.1);
  CHECK((next.layers[0].weight - (p.layers[0].weight.array() - 0.05).matrix())
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(next.layers[0].bias.isConstant(-0.2));
  const MlpParams wrong = mlp_init({{2, 3, Activation::Identity}}, 5);
  CHECK_THROWS_AS(sgd_step(p, wrong, 0.1), std::invalid_argument);
}

TEST_CASE("add_scaled accumulates layer by layer") {
  MlpParams acc = mlp_init({{2, 2, Activation::Identity}}, 5);
  acc.layers[0].weight.setZero();
  acc.layers[0].bias.setZero();
  MlpParams g = acc;
  g.layers[0].weight.setConstant(1.0);
  g.layers[0].bias.setConstant(1.0);
  add_scaled(acc, g, 0.25);
  add_scaled(acc, g, 0.25);
  CHECK(acc.layers[0].weight.isConstant(0.5));
  CHECK(acc.layers[0].bias.isConstant(0.5));
}

TEST_CASE("softmax rows sum to one; argmax ties resolve to the lowest index") {
  Rng rng(9);
  const Mat x = random_input(6, 4, rng);
  const Mat s = softmax_rows(x * 3.0);
  for (Index i = 0; i < s.rows(); ++i)
    CHECK(s.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  Mat tie(2, 3);
  tie << 1.0, 1.0, 0.0, 0.5, 2.0, 2.0;
  const IVec am = argmax_rows(tie);
  CHECK(am[0] == 0);
  CHECK(am[1] == 1);
}

TEST_CASE("slice keeps the requested sub-chain") {
  const MlpParams p = mlp_init(
      {{3, 4, Activation::ReLU}, {4, 5, Activation::ReLU}, {5, 2, Activation::Identity}}, 21);
  const MlpParams front = p.slice(0, 2);
  REQUIRE(front.layers.size() == 2);
  CHECK(front.out_dim() == 5);
  CHECK((front.layers[1].weight - p.layers[1].weight).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(p.slice(1, 3), std::invalid_argument);
}

}  // TEST_SUITE
