#include "regram/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace regram {

double knn_predict(const std::vector<KnnEntry>& pool, const std::vector<double>& query, int k) {
  if (pool.empty()) {
    throw std::invalid_argument("knn: empty pool");
  }
  if (k < 1) {
    throw std::invalid_argument("knn: k must be at least 1");
  }
  struct Scored {
    double dist2;
    const KnnEntry* entry;
  };
  std::vector<Scored> scored;
  scored.reserve(pool.size());
  for (const KnnEntry& e : pool) {
    if (e.features.size() != query.size()) {
      throw std::invalid_argument("knn: feature dimension mismatch for entry '" + e.id + "'");
    }
    double d2 = 0.0;
    for (size_t i = 0; i < query.size(); ++i) {
      const double diff = e.features[i] - query[i];
      d2 += diff * diff;
    }
    scored.push_back({d2, &e});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
    return a.entry->id < b.entry->id;
  });
  const size_t take = std::min<size_t>(static_cast<size_t>(k), scored.size());
  double acc = 0.0;
  for (size_t i = 0; i < take; ++i) acc += scored[i].entry->price;
  return acc / static_cast<double>(take);
}

void LinearRegressor::fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                          double ridge) {
  if (X.empty() || X.size() != y.size()) {
    throw std::invalid_argument("linear regression: empty or mismatched training data");
  }
  const size_t n = X.size();
  const size_t d = X[0].size();
  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d + 1));
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) {
    if (X[i].size() != d) {
      throw std::invalid_argument("linear regression: ragged feature rows");
    }
    for (size_t j = 0; j < d; ++j) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[i][j];
    A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = 1.0;
    b(static_cast<Eigen::Index>(i)) = y[i];
  }
  Eigen::MatrixXd normal = A.transpose() * A;
  // Penalize the feature weights only, not the intercept slot.
  for (size_t j = 0; j < d; ++j) {
    normal(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += ridge;
  }
  Eigen::VectorXd w = normal.ldlt().solve(A.transpose() * b);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (!std::isfinite(w(j))) {
      throw std::runtime_error("linear regression solve failed (singular system)");
    }
  }
  coef_.assign(static_cast<size_t>(d), 0.0);
  for (size_t j = 0; j < d; ++j) coef_[j] = w(static_cast<Eigen::Index>(j));
  intercept_ = w(static_cast<Eigen::Index>(d));
  fitted_ = true;
}

double LinearRegressor::predict(const std::vector<double>& x) const {
  if (!fitted_) {
    throw std::logic_error("linear regression: predict before fit");
  }
  if (x.size() != coef_.size()) {
    throw std::invalid_argument("linear regression: feature dimension mismatch");
  }
  double acc = intercept_;
  for (size_t j = 0; j < x.size(); ++j) acc += coef_[j] * x[j];
  return acc;
}

}  // namespace regram
