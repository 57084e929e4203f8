#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "regram/baselines.hpp"
#include "regram/graph.hpp"
#include "regram/model.hpp"

namespace regram {

struct EvalCase {
  TransactionRecord record;
  TargetRef ref;                          // resolved against CityEvalData::store
  std::vector<double> baseline_features;  // encoded s_env ⊕ s_obj
  double truth = 0.0;                     // currency
};

// Everything needed to score one city's held-out targets: history is the
// record set models may look at, targets are scored cases.
struct CityEvalData {
  std::string city;
  Normalizer normalizer;
  EncodedStore store;  // history ∪ targets
  std::vector<EvalCase> cases;
  std::vector<KnnEntry> knn_pool;         // history entries, currency prices
  std::vector<std::vector<double>> lr_x;  // history features
  std::vector<double> lr_y_norm;          // history prices, normalized
};

CityEvalData build_city_eval_data(const std::vector<TransactionRecord>& history,
                                  const std::vector<TransactionRecord>& targets,
                                  const Normalizer& normalizer, const GraphConfig& cfg = {});

// Currency predictions parallel to data.cases.
std::vector<double> predict_regram(Model& model, const CityEvalData& data);
std::vector<double> predict_knn(const CityEvalData& data, int k = 5);
std::vector<double> predict_lr(const CityEvalData& data);

struct EvalRow {
  std::string model;
  std::string city;
  size_t n = 0;
  double mape = 0.0;
  double hit10 = 0.0;
  double hit20 = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string to_csv() const;
  std::string to_table() const;
};

struct ModelPredictions {
  std::string model;  // display name
  std::unordered_map<std::string, std::vector<double>> by_city;  // parallel to cases
};

// One row per model and city (cities sorted by name) plus an "Average" row per
// model: the unweighted mean of its city metrics with n summed.
EvalReport summarize(const std::vector<CityEvalData>& cities,
                     const std::vector<ModelPredictions>& predictions);

}  // namespace regram
