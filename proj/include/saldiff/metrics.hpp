#pragma once

#include <utility>
#include <vector>

#include "saldiff/tensor.hpp"

namespace saldiff {

struct FixationSet {
    std::vector<std::pair<int, int>> points;  // (row, col); duplicates allowed
    int map_h = 0, map_w = 0;
};

// Histogram intersection of the two sum-normalized maps.
double sim(const Tensor& pred, const Tensor& gt);

// Pearson correlation over all pixels.
double cc(const Tensor& pred, const Tensor& gt);

// Mean of the z-scored prediction (population std) at the fixation points.
double nss(const Tensor& pred, const FixationSet& fix);

// Judd-variant ROC area: thresholds at fixated saliency values, positives
// are fixations, negatives the non-fixated pixels; strict >= at thresholds,
// curve closed with (0,0) and (1,1), trapezoidal area.
double auc_judd(const Tensor& pred, const FixationSet& fix);

}  // namespace saldiff
