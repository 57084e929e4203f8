#pragma once

#include <vector>

namespace regram {

// 100 · mean(|pred − truth| / truth), on currency values; every truth must be
// strictly positive.
double mape(const std::vector<double>& preds, const std::vector<double>& truths);

// 100 · fraction of cases with |pred − truth|/truth ≤ threshold_percent/100
// (inclusive at the boundary).
double hit_rate(const std::vector<double>& preds, const std::vector<double>& truths,
                double threshold_percent);

}  // namespace regram
