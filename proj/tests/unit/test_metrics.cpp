#include "regram/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "regram/baselines.hpp"
#include "regram/evaluate.hpp"
#include "regram/rng.hpp"
#include "regram/synth.hpp"
#include "regram/train.hpp"
#include "test_helpers.hpp"

using testutil::contains;
using testutil::thrown_message;

TEST(Mape, HandValuesAndErrors) {
  EXPECT_DOUBLE_EQ(regram::mape({110.0}, {100.0}), 10.0);
  EXPECT_DOUBLE_EQ(regram::mape({90.0, 120.0}, {100.0, 100.0}), 15.0);
  EXPECT_DOUBLE_EQ(regram::mape({100.0}, {100.0}), 0.0);

  EXPECT_TRUE(contains(thrown_message([] { regram::mape({}, {}); }), "empty"));
  EXPECT_TRUE(contains(thrown_message([] { regram::mape({1.0}, {1.0, 2.0}); }), "mismatch"));
  EXPECT_TRUE(
      contains(thrown_message([] { regram::mape({1.0}, {0.0}); }), "non-positive truth"));
  EXPECT_TRUE(
      contains(thrown_message([] { regram::mape({1.0}, {-5.0}); }), "non-positive truth"));
}

TEST(HitRate, BoundaryIsInclusive) {
  // Errors of exactly 10% and 20% count for their thresholds.
  const std::vector<double> truths = {100.0, 100.0, 100.0, 100.0};
  const std::vector<double> preds = {110.0, 120.0, 121.0, 100.0};
  EXPECT_DOUBLE_EQ(regram::hit_rate(preds, truths, 10.0), 50.0);   // 110 and 100
  EXPECT_DOUBLE_EQ(regram::hit_rate(preds, truths, 20.0), 75.0);   // all but 121
  EXPECT_DOUBLE_EQ(regram::hit_rate(preds, truths, 100.0), 100.0);
  EXPECT_TRUE(
      contains(thrown_message([&] { regram::hit_rate(preds, truths, 0.0); }), "threshold"));
}

TEST(HitRate, TwentyNeverBelowTen) {
  regram::Rng rng(77);
  std::vector<double> preds, truths;
  for (int i = 0; i < 200; ++i) {
    truths.push_back(50.0 + 100.0 * rng.uniform());
    preds.push_back(truths.back() * (0.7 + 0.6 * rng.uniform()));
  }
  EXPECT_GE(regram::hit_rate(preds, truths, 20.0), regram::hit_rate(preds, truths, 10.0));
}

TEST(Knn, AveragesTheNearestAndBreaksTiesById) {
  const std::vector<regram::KnnEntry> pool = {
      {"b", {1.0}, 10.0},  // distance 1 from query 0
      {"a", {-1.0}, 20.0}, // distance 1, tie: smaller id wins
      {"c", {3.0}, 40.0},  // distance 3
  };
  EXPECT_DOUBLE_EQ(regram::knn_predict(pool, {0.0}, 1), 20.0);          // "a" by tie-break
  EXPECT_DOUBLE_EQ(regram::knn_predict(pool, {0.0}, 2), 15.0);          // a, b
  EXPECT_DOUBLE_EQ(regram::knn_predict(pool, {0.0}, 3), 70.0 / 3.0);    // whole pool
  EXPECT_DOUBLE_EQ(regram::knn_predict(pool, {0.0}, 50), 70.0 / 3.0);   // pool smaller than k
  EXPECT_DOUBLE_EQ(regram::knn_predict(pool, {2.9}, 1), 40.0);

  EXPECT_TRUE(contains(thrown_message([&] { regram::knn_predict({}, {0.0}, 1); }), "empty"));
  EXPECT_TRUE(contains(thrown_message([&] { regram::knn_predict(pool, {0.0}, 0); }), "k"));
  EXPECT_TRUE(
      contains(thrown_message([&] { regram::knn_predict(pool, {0.0, 1.0}, 1); }), "dimension"));
}

TEST(LinearRegressor, RecoversAffineLaw) {
  // y = 2·x0 − 3·x1 + 1, exactly representable.
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  regram::Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const double a = 2.0 * rng.uniform() - 1.0;
    const double b = 2.0 * rng.uniform() - 1.0;
    X.push_back({a, b});
    y.push_back(2.0 * a - 3.0 * b + 1.0);
  }
  regram::LinearRegressor lr;
  EXPECT_FALSE(lr.fitted());
  lr.fit(X, y);
  ASSERT_TRUE(lr.fitted());
  ASSERT_EQ(lr.coefficients().size(), 2u);
  EXPECT_NEAR(lr.coefficients()[0], 2.0, 1e-5);
  EXPECT_NEAR(lr.coefficients()[1], -3.0, 1e-5);
  EXPECT_NEAR(lr.intercept(), 1.0, 1e-5);
  EXPECT_NEAR(lr.predict({0.5, 0.25}), 2.0 * 0.5 - 3.0 * 0.25 + 1.0, 1e-5);

  EXPECT_TRUE(contains(thrown_message([&] { lr.predict({1.0}); }), "dimension"));
  EXPECT_TRUE(contains(thrown_message([] {
                regram::LinearRegressor fresh;
                fresh.predict({1.0});
              }),
                       "before fit"));
  EXPECT_TRUE(contains(thrown_message([&] { lr.fit({}, {}); }), "empty"));
  EXPECT_TRUE(contains(thrown_message([&] { lr.fit({{1.0}, {1.0, 2.0}}, {1.0, 2.0}); }),
                       "ragged"));
}

namespace {

struct EvalFixture : ::testing::Test {
  std::vector<regram::TransactionRecord> records;
  regram::SplitResult split;
  regram::Normalizer normalizer{};
  regram::CityEvalData data;

  void SetUp() override {
    regram::SynthConfig cfg;
    cfg.cities = 1;
    cfg.buildings_per_city = 40;
    cfg.seed = 23;
    records = regram::generate(cfg).records;
    split = regram::chronological_split(records);
    normalizer = regram::Normalizer::fit(split.train, "arden");
    std::vector<regram::TransactionRecord> history = split.train;
    history.insert(history.end(), split.val.begin(), split.val.end());
    data = regram::build_city_eval_data(history, split.test, normalizer);
  }
};

}  // namespace

TEST_F(EvalFixture, HasOneCasePerTargetWithConsistentShapes) {
  ASSERT_EQ(data.cases.size(), split.test.size());
  EXPECT_EQ(data.city, "arden");
  const size_t feat_dim = normalizer.env_dim() + normalizer.obj_dim();
  EXPECT_EQ(data.store.size(), split.train.size() + split.val.size() + split.test.size());
  for (const auto& c : data.cases) {
    EXPECT_EQ(c.baseline_features.size(), feat_dim);
    EXPECT_GT(c.truth, 0.0);
    EXPECT_DOUBLE_EQ(c.truth, c.record.unit_price);
  }
  ASSERT_EQ(data.knn_pool.size(), split.train.size() + split.val.size());
  ASSERT_EQ(data.lr_x.size(), data.knn_pool.size());
  ASSERT_EQ(data.lr_y_norm.size(), data.knn_pool.size());
  for (const auto& e : data.knn_pool) EXPECT_EQ(e.features.size(), feat_dim);
}

TEST_F(EvalFixture, TargetsNeverAppearInTheirOwnHistory) {
  std::set<std::string> history_ids;
  for (const auto& e : data.knn_pool) history_ids.insert(e.id);
  for (const auto& c : data.cases) {
    EXPECT_EQ(history_ids.count(c.record.id), 0u);
    for (const auto& nb : c.ref.neighbor_ids) {
      EXPECT_NE(nb, c.record.id);
      EXPECT_EQ(history_ids.count(nb), 1u) << nb << " is not a history record";
    }
    for (const auto& comm : c.ref.communities) {
      for (size_t slot : comm.member_slots) {
        EXPECT_EQ(history_ids.count(data.store.ids[slot]), 1u);
      }
    }
  }
}

TEST_F(EvalFixture, BaselinePredictionsAreFiniteCurrency) {
  const auto knn = regram::predict_knn(data);
  const auto lr = regram::predict_lr(data);
  ASSERT_EQ(knn.size(), data.cases.size());
  ASSERT_EQ(lr.size(), data.cases.size());
  for (double p : knn) EXPECT_TRUE(std::isfinite(p));
  for (double p : lr) EXPECT_TRUE(std::isfinite(p));
  // Sanity: both land within an order of magnitude of the truth on average.
  std::vector<double> truths;
  for (const auto& c : data.cases) truths.push_back(c.truth);
  EXPECT_LT(regram::mape(knn, truths), 100.0);
  EXPECT_LT(regram::mape(lr, truths), 100.0);
}

TEST_F(EvalFixture, RejectsRecordsFromOtherCities) {
  auto bad_targets = split.test;
  bad_targets.front().city = "zzz";
  const std::string msg = thrown_message([&] {
    regram::build_city_eval_data(split.train, bad_targets, normalizer);
  });
  EXPECT_TRUE(contains(msg, "from city 'zzz'")) << msg;
}

namespace {

regram::CityEvalData trivial_city(const std::string& name, std::vector<double> truths) {
  regram::CityEvalData d;
  d.city = name;
  for (size_t i = 0; i < truths.size(); ++i) {
    regram::EvalCase c;
    c.truth = truths[i];
    c.record.id = name + "-" + std::to_string(i);
    d.cases.push_back(std::move(c));
  }
  return d;
}

}  // namespace

TEST(Summarize, AverageRowIsUnweightedWithSummedN) {
  const std::vector<regram::CityEvalData> cities = {
      trivial_city("astra", {100.0}),
      trivial_city("borea", {100.0, 100.0, 100.0}),
  };
  regram::ModelPredictions mp;
  mp.model = "toy";
  mp.by_city["astra"] = {110.0};                  // MAPE 10, hit10 100, hit20 100
  mp.by_city["borea"] = {130.0, 100.0, 100.0};    // MAPE 10, hit10 ~66.7, hit20 ~66.7
  const auto report = regram::summarize(cities, {mp});

  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].city, "astra");
  EXPECT_EQ(report.rows[1].city, "borea");
  EXPECT_EQ(report.rows[2].city, "Average");
  EXPECT_EQ(report.rows[2].n, 4u);
  EXPECT_DOUBLE_EQ(report.rows[2].mape, 10.0);  // mean of 10 and 10, not 4-case pooled
  EXPECT_NEAR(report.rows[2].hit10, (100.0 + 200.0 / 3.0) / 2.0, 1e-9);
  EXPECT_DOUBLE_EQ(report.rows[2].hit10, report.rows[2].hit20);

  const std::string csv = report.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,city,n,mape,hit10,hit20");
  EXPECT_TRUE(contains(csv, "toy,astra,1,"));
  EXPECT_TRUE(contains(csv, "toy,Average,4,"));
  EXPECT_TRUE(contains(report.to_table(), "Average"));
}

TEST(Summarize, MissingCityPredictionsAreAnError) {
  const std::vector<regram::CityEvalData> cities = {trivial_city("astra", {100.0})};
  regram::ModelPredictions mp;
  mp.model = "toy";
  const std::string msg = thrown_message([&] { regram::summarize(cities, {mp}); });
  EXPECT_TRUE(contains(msg, "no 'toy' predictions for city 'astra'")) << msg;

  mp.by_city["astra"] = {1.0, 2.0};
  const std::string msg2 = thrown_message([&] { regram::summarize(cities, {mp}); });
  EXPECT_TRUE(contains(msg2, "count mismatch")) << msg2;
}
