#pragma once

#include <string>
#include <utility>
#include <vector>

#include "regram/records.hpp"

namespace regram {

struct FieldStats {
  std::string name;
  double mean = 0.0;
  double std = 1.0;
};

struct CategoricalField {
  std::string name;
  std::vector<std::string> values;  // sorted lexicographically; one slot each
};

struct FeatureVec {
  std::vector<double> s_env;
  std::vector<double> s_obj;
  double p_norm = 0.0;
};

// Per-city feature codec fitted on training records only.  Numeric fields are
// z-scored with the population standard deviation (replaced by 1 when below
// 1e-12); categorical fields become one-hot blocks over the lexicographically
// sorted training vocabulary, and a value never seen in training encodes as
// an all-zero block.
class Normalizer {
 public:
  static Normalizer fit(const std::vector<TransactionRecord>& train_records,
                        const std::string& city);

  FeatureVec encode(const TransactionRecord& rec) const;
  double normalize_price(double price) const;
  double denormalize_price(double p_norm) const;

  const std::string& city() const { return city_; }
  size_t env_dim() const;
  size_t obj_dim() const;

  // Half-open index span of the z-scored point-of-interest features inside
  // s_env (used for community similarity vectors).
  std::pair<size_t, size_t> poi_span() const { return {poi_begin_, poi_end_}; }
  std::vector<double> poi_features(const TransactionRecord& rec) const;

  double price_mean() const { return price_.mean; }
  double price_std() const { return price_.std; }
  const std::vector<FieldStats>& env_numeric() const { return env_numeric_; }
  const std::vector<FieldStats>& obj_numeric() const { return obj_numeric_; }
  const std::vector<CategoricalField>& env_categorical() const { return env_categorical_; }
  const std::vector<CategoricalField>& obj_categorical() const { return obj_categorical_; }

  std::string to_json_string() const;
  static Normalizer from_json_string(const std::string& text);

 private:
  std::string city_;
  FieldStats price_;
  std::vector<FieldStats> env_numeric_;
  std::vector<CategoricalField> env_categorical_;
  std::vector<FieldStats> obj_numeric_;
  std::vector<CategoricalField> obj_categorical_;
  size_t poi_begin_ = 0;
  size_t poi_end_ = 0;
};

}  // namespace regram
