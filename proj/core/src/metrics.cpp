#include "regram/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace regram {

namespace {

void check_pairs(const std::vector<double>& preds, const std::vector<double>& truths) {
  if (preds.size() != truths.size()) {
    throw std::invalid_argument("metrics: prediction/truth size mismatch (" +
                                std::to_string(preds.size()) + " vs " +
                                std::to_string(truths.size()) + ")");
  }
  if (preds.empty()) {
    throw std::invalid_argument("metrics: empty input");
  }
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (!(truths[i] > 0.0)) {
      throw std::invalid_argument("metrics: non-positive truth value at index " +
                                  std::to_string(i));
    }
  }
}

}  // namespace

double mape(const std::vector<double>& preds, const std::vector<double>& truths) {
  check_pairs(preds, truths);
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    acc += std::abs(preds[i] - truths[i]) / truths[i];
  }
  return 100.0 * acc / static_cast<double>(preds.size());
}

double hit_rate(const std::vector<double>& preds, const std::vector<double>& truths,
                double threshold_percent) {
  check_pairs(preds, truths);
  if (!(threshold_percent > 0.0)) {
    throw std::invalid_argument("metrics: threshold must be positive");
  }
  const double limit = threshold_percent / 100.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (std::abs(preds[i] - truths[i]) / truths[i] <= limit) {
      ++hits;
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
}

}  // namespace regram
