#include "vfl/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace vfl {

namespace {

// Squared distances from every point to every centroid, and the lowest-index
// nearest centroid per point.
void assign_points(const Mat& points, const Mat& centroids, std::vector<int>& assignments,
                   Vec& dist_to_own) {
  const Index n = points.rows();
  const Index k = centroids.rows();
  assignments.resize(static_cast<std::size_t>(n));
  dist_to_own.resize(n);
  for (Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
    for (Index c = 1; c < k; ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best_d) {  // strict: ties keep the lowest index
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    assignments[static_cast<std::size_t>(i)] = best;
    dist_to_own[i] = best_d;
  }
}

void repair_empty_clusters(const Mat& points, Mat& centroids, std::vector<int>& assignments,
                           Vec& dist_to_own) {
  const Index k = centroids.rows();
  std::vector<Index> count(static_cast<std::size_t>(k), 0);
  for (int a : assignments) ++count[static_cast<std::size_t>(a)];
  for (Index c = 0; c < k; ++c) {
    if (count[static_cast<std::size_t>(c)] > 0) continue;
    // Farthest point from its own centroid becomes this cluster.
    Index far = 0;
    double far_d = -1.0;
    for (Index i = 0; i < points.rows(); ++i) {
      const auto owner = static_cast<std::size_t>(assignments[static_cast<std::size_t>(i)]);
      if (count[owner] <= 1) continue;  // never empty another cluster
      if (dist_to_own[i] > far_d) {
        far_d = dist_to_own[i];
        far = i;
      }
    }
    --count[static_cast<std::size_t>(assignments[static_cast<std::size_t>(far)])];
    assignments[static_cast<std::size_t>(far)] = static_cast<int>(c);
    count[static_cast<std::size_t>(c)] = 1;
    centroids.row(c) = points.row(far);
    dist_to_own[far] = 0.0;
  }
}

double inertia_of(const Mat& points, const Mat& centroids, const std::vector<int>& assignments) {
  double s = 0.0;
  for (Index i = 0; i < points.rows(); ++i)
    s += (points.row(i) - centroids.row(assignments[static_cast<std::size_t>(i)])).squaredNorm();
  return s;
}

Mat kmeanspp_seed(const Mat& points, int k, Rng& rng) {
  const Index n = points.rows();
  Mat centroids(k, points.cols());
  centroids.row(0) = points.row(rng.uniform_index(n));
  Vec min_d = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = min_d.sum();
    Index pick = 0;
    if (total > 0.0) {
      // Sample proportional to squared distance via the cumulative sum.
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += min_d[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_index(n);  // all points identical to chosen centroids
    }
    centroids.row(c) = points.row(pick);
    for (Index i = 0; i < n; ++i)
      min_d[i] = std::min(min_d[i], (points.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans_lloyd(const Mat& points, const Mat& initial_centroids,
                          const KMeansOptions& opt) {
  const Index n = points.rows();
  const Index k = initial_centroids.rows();
  if (n == 0) throw std::invalid_argument("kmeans: no points");
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: k out of range");
  if (initial_centroids.cols() != points.cols())
    throw std::invalid_argument("kmeans: centroid dimension mismatch");
  if (!all_finite(points)) throw std::invalid_argument("kmeans: non-finite points");

  KMeansResult r;
  r.centroids = initial_centroids;
  Vec dist_to_own;
  for (int it = 0; it < opt.max_iter; ++it) {
    assign_points(points, r.centroids, r.assignments, dist_to_own);
    repair_empty_clusters(points, r.centroids, r.assignments, dist_to_own);
    r.inertia_history.push_back(inertia_of(points, r.centroids, r.assignments));
    r.iterations_run = it + 1;

    Mat next = Mat::Zero(k, points.cols());
    std::vector<Index> count(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      next.row(r.assignments[static_cast<std::size_t>(i)]) += points.row(i);
      ++count[static_cast<std::size_t>(r.assignments[static_cast<std::size_t>(i)])];
    }
    double movement = 0.0;
    for (Index c = 0; c < k; ++c) {
      next.row(c) /= static_cast<double>(count[static_cast<std::size_t>(c)]);
      movement = std::max(movement, (next.row(c) - r.centroids.row(c)).norm());
    }
    r.centroids = std::move(next);
    if (movement < opt.tol) break;
  }
  assign_points(points, r.centroids, r.assignments, dist_to_own);
  repair_empty_clusters(points, r.centroids, r.assignments, dist_to_own);
  r.inertia = inertia_of(points, r.centroids, r.assignments);
  r.inertia_history.push_back(r.inertia);
  return r;
}

KMeansResult kmeans(const Mat& points, int k, const KMeansOptions& opt, std::uint64_t seed) {
  if (opt.restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  if (k < 1 || k > points.rows()) throw std::invalid_argument("kmeans: k out of range");

  KMeansResult best;
  bool have_best = false;
  for (int restart = 0; restart < opt.restarts; ++restart) {
    Rng rng(derive_seed(seed, "kmeans/restart/" + std::to_string(restart)));
    KMeansResult r = kmeans_lloyd(points, kmeanspp_seed(points, k, rng), opt);
    if (!have_best || r.inertia < best.inertia) {  // strict: earliest restart wins ties
      best = std::move(r);
      have_best = true;
    }
  }
  return best;
}

IVec gradients_to_temp_labels(const Mat& grads, int num_classes, const TempLabelOptions& opt,
                              std::uint64_t seed) {
  if (num_classes < 1) throw std::invalid_argument("gradients_to_temp_labels: C < 1");
  if (grads.rows() < num_classes)
    throw std::invalid_argument("gradients_to_temp_labels: more clusters than samples");

  Mat rows = grads;
  if (opt.normalize_rows) {
    for (Index i = 0; i < rows.rows(); ++i) {
      const double norm = rows.row(i).norm();
      if (norm > 1e-300) rows.row(i) /= norm;  // zero rows stay zero
    }
  }
  const KMeansResult r = kmeans(rows, num_classes, opt.kmeans, seed);
  IVec labels(rows.rows());
  for (Index i = 0; i < labels.size(); ++i) labels[i] = r.assignments[static_cast<std::size_t>(i)];
  return labels;
}

double cluster_purity(const IVec& assignments, const IVec& truth) {
  if (assignments.size() == 0 || assignments.size() != truth.size())
    throw std::invalid_argument("cluster_purity: bad input sizes");
  std::map<int, std::map<int, int>> counts;
  for (Index i = 0; i < assignments.size(); ++i) ++counts[assignments[i]][truth[i]];
  Index majority_total = 0;
  for (const auto& [cluster, by_class] : counts) {
    int best = 0;
    for (const auto& [cls, count] : by_class) best = std::max(best, count);
    majority_total += best;
  }
  return static_cast<double>(majority_total) / static_cast<double>(assignments.size());
}

}  // namespace vfl
