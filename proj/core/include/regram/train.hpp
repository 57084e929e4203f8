#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "regram/graph.hpp"
#include "regram/model.hpp"
#include "regram/records.hpp"

namespace regram {

struct TrainConfig {
  ModelConfig model;        // d_e/d_o filled per city from the fitted Normalizer
  GraphConfig graph;        // neighbor cap, community window, radii
  double lr = 0.001;
  int batch_size = 64;
  int epochs = 50;
  uint64_t seed = 1;
  int val_months = 3;
  int test_months = 3;
};

std::string train_config_to_json_string(const TrainConfig& cfg);
TrainConfig train_config_from_json_string(const std::string& text);

struct SplitResult {
  std::vector<TransactionRecord> train;
  std::vector<TransactionRecord> val;
  std::vector<TransactionRecord> test;
  YearMonth val_start;   // first calendar month of the validation span
  YearMonth test_start;  // first calendar month of the test span
};

// Calendar-month-aligned chronological split: the last `test_months` months of
// data become test, the `val_months` before become validation, the rest train.
SplitResult chronological_split(const std::vector<TransactionRecord>& records, int val_months = 3,
                                int test_months = 3);

// (1/n)·Σ (pred − truth)²; errors on empty or mismatched input.
double mse(const std::vector<double>& preds, const std::vector<double>& truths);

struct TrainReport {
  std::vector<double> train_loss;  // one entry per epoch
  std::vector<double> val_mape;    // NaN when the validation split is empty
  int best_epoch = -1;             // 0-based
  double wall_seconds = 0.0;
};

struct TrainedCity {
  std::string city;
  Normalizer normalizer;
  Model model;
  TrainReport report;
};

// Trains one city's model.  `train_records`/`val_records` must already be
// filtered to `normalizer.city()`; `bundle` must be built over train_records.
// Progress lines go to `log` when provided.
TrainedCity train_city(const TrainConfig& cfg, const std::vector<TransactionRecord>& train_records,
                       const std::vector<TransactionRecord>& val_records,
                       const GraphBundle& bundle, const Normalizer& normalizer,
                       std::ostream* log = nullptr);

}  // namespace regram
