#pragma once

#include <string>
#include <vector>

namespace regram {

struct KnnEntry {
  std::string id;
  std::vector<double> features;
  double price = 0.0;
};

// Mean price of the k nearest pool entries by Euclidean feature distance.
// Ties break on the lexicographically smaller id; a pool smaller than k is
// used whole; an empty pool is an error.
double knn_predict(const std::vector<KnnEntry>& pool, const std::vector<double>& query, int k);

// Ordinary least squares with a small ridge term for numerical safety.
class LinearRegressor {
 public:
  void fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
           double ridge = 1e-6);
  double predict(const std::vector<double>& x) const;

  const std::vector<double>& coefficients() const { return coef_; }
  double intercept() const { return intercept_; }
  bool fitted() const { return fitted_; }

 private:
  std::vector<double> coef_;
  double intercept_ = 0.0;
  bool fitted_ = false;
};

}  // namespace regram
