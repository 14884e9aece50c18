#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>
#include <vector>

namespace vfl {

// Row = sample, column = feature, everywhere.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using IVec = Eigen::VectorXi;
using Index = Eigen::Index;

bool all_finite(const Mat& m);
bool all_finite(const Vec& v);

// splitmix64 step; also the mixer behind seed derivation.
std::uint64_t splitmix64(std::uint64_t& state);

// Derive an independent stream seed from one root seed and a purpose tag.
// Every consumer (per-client init, k-means, SSL, server training, ...) gets
// its own tag so adding a consumer never shifts another stream.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);

// Deterministic RNG with hand-rolled distributions. std::*_distribution is
// implementation-defined, which would tie reproducibility to the standard
// library build; everything here is pinned by this code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform on [0,1) with 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller, one spare cached.
  double gaussian();
  // Uniform integer in [0,n), n > 0. Rejection sampling, no modulo bias.
  Index uniform_index(Index n);
  bool bernoulli(double p);

  void shuffle(std::vector<int>& v);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace vfl
