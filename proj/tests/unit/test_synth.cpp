#include "regram/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "regram/graph.hpp"
#include "regram/records.hpp"
#include "regram/rng.hpp"
#include "test_helpers.hpp"

using testutil::contains;
using testutil::make_record;
using testutil::thrown_message;

namespace {

regram::SynthConfig small_config(uint64_t seed = 3) {
  regram::SynthConfig cfg;
  cfg.cities = 2;
  cfg.buildings_per_city = 60;
  cfg.seed = seed;
  return cfg;
}

std::string records_csv(const std::vector<regram::TransactionRecord>& records) {
  std::ostringstream out;
  regram::write_transactions(out, records, regram::CsvSchema::default_schema());
  return out.str();
}

}  // namespace

TEST(Synth, DeterministicInTheSeed) {
  const auto a = regram::generate(small_config());
  const auto b = regram::generate(small_config());
  EXPECT_EQ(records_csv(a.records), records_csv(b.records));
  EXPECT_EQ(regram::latent_to_json_string(a.latent), regram::latent_to_json_string(b.latent));

  const auto c = regram::generate(small_config(4));
  EXPECT_NE(records_csv(a.records), records_csv(c.records));
}

TEST(Synth, RecordsAreValidWithUniqueIdsAndPlausibleRanges) {
  const auto result = regram::generate(small_config());
  ASSERT_FALSE(result.records.empty());
  std::set<std::string> ids;
  std::set<std::string> cities;
  for (const auto& r : result.records) {
    EXPECT_TRUE(ids.insert(r.id).second) << "duplicate id " << r.id;
    cities.insert(r.city);
    EXPECT_NO_THROW(regram::validate_record(r));
    EXPECT_GT(r.unit_price, 0.0);
    EXPECT_GE(r.house_age, 0.0);
    EXPECT_FALSE((r.trade_date < regram::Date{2019, 1, 1}));
    EXPECT_FALSE((regram::Date{2021, 6, 30} < r.trade_date));
    for (const auto& [k, v] : r.poi_counts) EXPECT_GE(v, 0.0) << k;
    for (const auto& [k, v] : r.poi_min_dist) EXPECT_GT(v, 0.0) << k;
  }
  EXPECT_EQ(cities, (std::set<std::string>{"arden", "bellmoor"}));
  EXPECT_EQ(result.latent.cities.size(), 2u);
}

TEST(Synth, ZeroNoiseMatchesTheOracleExactly) {
  auto cfg = small_config();
  cfg.noise_std = 0.0;
  const auto result = regram::generate(cfg);
  for (const auto& r : result.records) {
    const double oracle = regram::oracle_price(r, result.latent);
    EXPECT_NEAR(r.unit_price, oracle, 1e-9 * std::abs(oracle)) << r.id;
  }
}

TEST(Synth, NoiseIsTheOnlyDifferenceFromTheOracle) {
  auto cfg = small_config();
  cfg.noise_std = 80.0;
  const auto result = regram::generate(cfg);
  double mean_abs = 0.0;
  for (const auto& r : result.records) {
    mean_abs += std::abs(r.unit_price - regram::oracle_price(r, result.latent));
  }
  mean_abs /= double(result.records.size());
  // E|N(0, 80)| = 80·√(2/π) ≈ 63.8; resampling >0 barely moves it.
  EXPECT_GT(mean_abs, 30.0);
  EXPECT_LT(mean_abs, 130.0);
}

TEST(Synth, FlatMarketCollapsesToTheBasePrice) {
  auto cfg = small_config();
  cfg.field_amplitude = 0.0;  // also zeroes building quality effects
  cfg.depreciation = 0.0;
  cfg.coeff_area = 0.0;
  cfg.coeff_rooms = 0.0;
  cfg.coeff_floor = 0.0;
  cfg.noise_std = 0.0;
  const auto result = regram::generate(cfg);
  std::map<std::string, double> base;
  for (const auto& c : result.latent.cities) base[c.name] = c.base_price;
  for (const auto& r : result.records) {
    EXPECT_NEAR(r.unit_price, base.at(r.city), 1e-9 * base.at(r.city)) << r.id;
  }
}

TEST(Synth, DepreciationFollowsTheExponentialLaw) {
  // A neutral 10-year-old unit in a flat one-city market must price at
  // base · e^(−0.02·10).
  regram::LatentTruth latent;
  latent.config = regram::SynthConfig{};
  latent.config.depreciation = 0.02;
  regram::CityLatent city;
  city.name = "c";
  city.base_price = 1000.0;
  latent.cities.push_back(city);

  auto rec = make_record("r", "c", 24.0, 120.0, "2020-06-15", "2010-06", 0.0);
  rec.house_age = 10.0;
  const double expected = 1000.0 * 0.8187307530779819;  // 1000·e^(−0.2)
  EXPECT_NEAR(regram::oracle_price(rec, latent), expected, 1e-9);

  const std::string msg =
      thrown_message([&] { regram::oracle_price(make_record("x", "unknown", 24.0, 120.0,
                                                            "2020-06-15", "2010-06", 1.0),
                                                latent); });
  EXPECT_NE(msg, "");
}

TEST(Synth, SameBuildingPricesCorrelateMoreThanRandomPairs) {
  auto cfg = small_config(9);
  cfg.cities = 1;
  cfg.buildings_per_city = 120;
  const auto result = regram::generate(cfg);

  // Group records by exact coordinates (one building = one coordinate pair).
  std::map<std::pair<double, double>, std::vector<double>> by_building;
  for (const auto& r : result.records) {
    by_building[{r.latitude, r.longitude}].push_back(std::log(r.unit_price));
  }

  std::vector<std::pair<double, double>> same_pairs;
  for (const auto& [_, prices] : by_building) {
    for (size_t i = 0; i + 1 < prices.size(); ++i) {
      same_pairs.emplace_back(prices[i], prices[i + 1]);
    }
  }
  ASSERT_GT(same_pairs.size(), 50u);

  regram::Rng rng(17);
  std::vector<std::pair<double, double>> random_pairs;
  for (size_t i = 0; i < same_pairs.size(); ++i) {
    const auto& a = result.records[rng.below(result.records.size())];
    const auto& b = result.records[rng.below(result.records.size())];
    random_pairs.emplace_back(std::log(a.unit_price), std::log(b.unit_price));
  }

  auto correlation = [](const std::vector<std::pair<double, double>>& pairs) {
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pairs) mx += x, my += y;
    mx /= double(pairs.size());
    my /= double(pairs.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (const auto& [x, y] : pairs) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
      syy += (y - my) * (y - my);
    }
    return sxy / std::sqrt(sxx * syy);
  };
  const double same = correlation(same_pairs);
  const double random = correlation(random_pairs);
  EXPECT_GT(same, 0.6);
  EXPECT_GT(same, random + 0.2);
}

TEST(Synth, ProducesMultiMemberCommunities) {
  auto cfg = small_config(5);
  cfg.cities = 1;
  const auto records = regram::generate(cfg).records;
  const auto index = regram::make_grid_index(records, 500.0);
  const auto communities = regram::assign_communities(records, index);
  size_t multi = 0;
  for (const auto& [_, members] : communities.members) {
    if (members.size() >= 2) ++multi;
  }
  EXPECT_GT(multi, 0u);
}

TEST(SynthJson, LatentRoundTripIsExact) {
  const auto result = regram::generate(small_config());
  const std::string text = regram::latent_to_json_string(result.latent);
  const auto back = regram::latent_from_json_string(text);
  EXPECT_EQ(regram::latent_to_json_string(back), text);
  // The oracle survives the round trip bit-for-bit.
  for (size_t i = 0; i < result.records.size(); i += 17) {
    EXPECT_DOUBLE_EQ(regram::oracle_price(result.records[i], back),
                     regram::oracle_price(result.records[i], result.latent));
  }
}

TEST(SynthJson, ConfigRoundTripAndStrictKeys) {
  auto cfg = small_config();
  cfg.noise_std = 55.5;
  cfg.date_start = regram::Date{2018, 3, 1};
  const std::string text = regram::synth_config_to_json_string(cfg);
  const auto back = regram::synth_config_from_json_string(text);
  EXPECT_EQ(regram::synth_config_to_json_string(back), text);
  EXPECT_DOUBLE_EQ(back.noise_std, 55.5);
  EXPECT_EQ(back.date_start, (regram::Date{2018, 3, 1}));

  const std::string msg = thrown_message(
      [] { regram::synth_config_from_json_string(R"({"citties": 3})"); });
  EXPECT_TRUE(contains(msg, "unknown synthetic config key 'citties'")) << msg;
}

TEST(SynthConfigValidation, RejectsNonsense) {
  auto bad = small_config();
  bad.cities = 0;
  EXPECT_TRUE(contains(thrown_message([&] { regram::generate(bad); }),
                       "invalid synthetic config"));
  bad = small_config();
  bad.base_price_min = -1.0;
  EXPECT_TRUE(contains(thrown_message([&] { regram::generate(bad); }),
                       "invalid synthetic config"));
  bad = small_config();
  bad.date_end = regram::Date{2018, 1, 1};  // before default start
  EXPECT_TRUE(contains(thrown_message([&] { regram::generate(bad); }),
                       "invalid synthetic config"));
  bad = small_config();
  bad.neighbor_correlation_strength = 1.5;
  EXPECT_TRUE(contains(thrown_message([&] { regram::generate(bad); }),
                       "invalid synthetic config"));
}
