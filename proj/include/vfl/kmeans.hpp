#pragma once

#include "vfl/types.hpp"

#include <cstdint>

namespace vfl {

struct KMeansOptions {
  int max_iter = 300;
  double tol = 1e-6;  // max centroid movement that counts as converged
  int restarts = 10;
};

struct KMeansResult {
  Mat centroids;                 // k x d
  std::vector<int> assignments;  // size n, values in [0,k)
  double inertia = 0.0;          // sum of squared distances to assigned centroid
  int iterations_run = 0;
  std::vector<double> inertia_history;  // after each assignment step, non-increasing
};

// Lloyd iterations from explicit initial centroids. Distance ties go to the
// lowest cluster index; an emptied cluster is repaired by moving in the
// point farthest from its own centroid.
KMeansResult kmeans_lloyd(const Mat& points, const Mat& initial_centroids,
                          const KMeansOptions& opt);

// k-means++ seeded restarts; the restart with the lowest inertia wins,
// earliest restart on exact ties. Deterministic given the seed.
KMeansResult kmeans(const Mat& points, int k, const KMeansOptions& opt, std::uint64_t seed);

struct TempLabelOptions {
  bool normalize_rows = true;  // L2-normalize gradient rows before clustering
  KMeansOptions kmeans;
};

// Cluster per-sample gradient rows into num_classes groups and use the
// cluster ids as temporary labels. Cluster ids are an arbitrary permutation
// of the real classes; downstream training only needs consistency.
IVec gradients_to_temp_labels(const Mat& grads, int num_classes, const TempLabelOptions& opt,
                              std::uint64_t seed);

// Best-majority-match agreement between cluster assignments and reference
// labels: sum over clusters of the majority class count, divided by n.
double cluster_purity(const IVec& assignments, const IVec& truth);

}  // namespace vfl
