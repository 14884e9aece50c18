#include "vfl/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace vfl {

double accuracy(const IVec& pred, const IVec& truth) {
  if (pred.size() == 0) throw std::invalid_argument("accuracy: empty input");
  if (pred.size() != truth.size())
    throw std::invalid_argument("accuracy: size mismatch");
  Index hits = 0;
  for (Index i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double auc(const Vec& scores, const IVec& labels) {
  const Index n = scores.size();
  if (n == 0) throw std::invalid_argument("auc: empty input");
  if (labels.size() != n) throw std::invalid_argument("auc: size mismatch");

  Index n_pos = 0;
  for (Index i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("auc: labels must be 0 or 1");
    n_pos += labels[i];
  }
  const Index n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: needs both classes present");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return scores[a] < scores[b]; });

  // Midranks: tied scores share the mean of the ranks they span.
  double rank_sum_pos = 0.0;
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
    for (Index k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace vfl
