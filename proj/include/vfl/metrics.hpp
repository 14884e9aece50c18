#pragma once

#include "vfl/types.hpp"

namespace vfl {

// Fraction of positions where pred == truth. Errors on empty or mismatched input.
double accuracy(const IVec& pred, const IVec& truth);

// Area under the ROC curve for binary labels in {0,1}, computed from ranks
// with midrank tie handling (ties count 1/2). Invariant under strictly
// increasing score transforms. Errors if either class is absent.
double auc(const Vec& scores, const IVec& labels);

}  // namespace vfl
