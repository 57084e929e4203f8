#include "regram/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include "regram/geo.hpp"
#include "regram/rng.hpp"

namespace regram {

namespace {

using nlohmann::json;

const std::vector<std::string> kCityNames = {"arden", "bellmoor", "caldera"};
const std::vector<std::string> kBuildingTypes = {"apartment", "highrise", "townhouse"};
const std::vector<std::string> kPurposes = {"commercial", "mixed", "residential"};
const std::vector<std::string> kLandUsages = {"commercial_zone", "residential_zone",
                                              "transit_zone"};

void validate_config(const SynthConfig& cfg) {
  auto fail = [](const std::string& why) {
    throw std::invalid_argument("invalid synthetic config: " + why);
  };
  if (cfg.cities < 1 || cfg.cities > 20) fail("city count must be in [1, 20]");
  if (cfg.buildings_per_city < 1) fail("buildings per city must be positive");
  if (cfg.txn_mean < 1.0) fail("mean transactions per building must be at least 1");
  if (!cfg.date_start.valid() || !cfg.date_end.valid()) fail("malformed date range");
  if (cfg.date_end < cfg.date_start) fail("date range end precedes start");
  if (!(cfg.base_price_min > 0.0)) fail("base price must be positive");
  if (cfg.base_price_max < cfg.base_price_min) fail("base price range inverted");
  if (cfg.field_amplitude < 0.0) fail("field amplitude must be non-negative");
  if (!(cfg.field_length_m > 0.0)) fail("field length scale must be positive");
  if (cfg.depreciation < 0.0) fail("depreciation must be non-negative");
  if (cfg.neighbor_correlation_strength < 0.0 || cfg.neighbor_correlation_strength > 1.0) {
    fail("neighbor correlation strength must be in [0, 1]");
  }
  if (cfg.market_trend_amplitude < 0.0) fail("market trend amplitude must be non-negative");
  if (!(cfg.market_trend_period_days > 0.0)) fail("market trend period must be positive");
  if (cfg.noise_std < 0.0) fail("noise std must be non-negative");
}

std::string city_name(int i) {
  if (i < static_cast<int>(kCityNames.size())) return kCityNames[static_cast<size_t>(i)];
  return "city" + std::to_string(i + 1);
}

double object_field(const TransactionRecord& rec, const std::string& name) {
  auto it = rec.object_fields.find(name);
  if (it == rec.object_fields.end()) {
    throw std::invalid_argument("record '" + rec.id + "' lacks object field '" + name + "'");
  }
  return it->second;
}

// Quality of the building at exactly these coordinates; 0 for coordinates
// the generator never emitted (hand-built records in tests).
double building_quality(const CityLatent& city, double lat, double lon) {
  for (const BuildingEffect& b : city.building_effects) {
    if (b.lat == lat && b.lon == lon) return b.log_quality;
  }
  return 0.0;
}

// The noiseless pricing formula shared by generation and the audit oracle.
double noiseless_price(const TransactionRecord& rec, const SynthConfig& cfg,
                       const CityLatent& city) {
  const double area = object_field(rec, "area_m2");
  const double rooms = object_field(rec, "room_count");
  const double floor = object_field(rec, "floor_number");
  const double total = object_field(rec, "total_floors");
  const double field = spatial_field(city, rec.latitude, rec.longitude);
  const double quality = building_quality(city, rec.latitude, rec.longitude);
  const double trend = market_trend(city, cfg.date_start, rec.trade_date);
  const double object_term = 1.0 + cfg.coeff_area * (area - 75.0) / 75.0 +
                             cfg.coeff_rooms * (rooms - 3.0) / 3.0 +
                             cfg.coeff_floor * (floor / total - 0.5);
  return city.base_price * std::exp(field + quality + trend) *
         std::exp(-cfg.depreciation * rec.house_age) * object_term;
}

struct Development {
  double lat = 0.0;
  double lon = 0.0;
  YearMonth era;
  std::string building_type;
  std::string main_purpose;
  std::string land_usage;
  double log_quality = 0.0;
};

json config_to_json(const SynthConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["cities"] = cfg.cities;
  j["buildings_per_city"] = cfg.buildings_per_city;
  j["txn_mean"] = cfg.txn_mean;
  j["date_start"] = cfg.date_start.to_string();
  j["date_end"] = cfg.date_end.to_string();
  j["base_price_min"] = cfg.base_price_min;
  j["base_price_max"] = cfg.base_price_max;
  j["field_amplitude"] = cfg.field_amplitude;
  j["field_length_m"] = cfg.field_length_m;
  j["depreciation"] = cfg.depreciation;
  j["coeff_area"] = cfg.coeff_area;
  j["coeff_rooms"] = cfg.coeff_rooms;
  j["coeff_floor"] = cfg.coeff_floor;
  j["neighbor_correlation_strength"] = cfg.neighbor_correlation_strength;
  j["market_trend_amplitude"] = cfg.market_trend_amplitude;
  j["market_trend_period_days"] = cfg.market_trend_period_days;
  j["noise_std"] = cfg.noise_std;
  return j;
}

// Tolerant: absent keys keep their defaults, unknown keys are rejected so a
// typo in a config file cannot silently do nothing.
SynthConfig config_from_json(const json& j) {
  static const std::set<std::string> known = {
      "seed",          "cities",          "buildings_per_city",
      "txn_mean",      "date_start",      "date_end",
      "base_price_min", "base_price_max", "field_amplitude",
      "field_length_m", "depreciation",   "coeff_area",
      "coeff_rooms",   "coeff_floor",     "neighbor_correlation_strength",
      "market_trend_amplitude", "market_trend_period_days", "noise_std"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw std::invalid_argument("unknown synthetic config key '" + item.key() + "'");
    }
  }
  SynthConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.cities = j.value("cities", cfg.cities);
  cfg.buildings_per_city = j.value("buildings_per_city", cfg.buildings_per_city);
  cfg.txn_mean = j.value("txn_mean", cfg.txn_mean);
  cfg.date_start = Date::parse(j.value("date_start", cfg.date_start.to_string()));
  cfg.date_end = Date::parse(j.value("date_end", cfg.date_end.to_string()));
  cfg.base_price_min = j.value("base_price_min", cfg.base_price_min);
  cfg.base_price_max = j.value("base_price_max", cfg.base_price_max);
  cfg.field_amplitude = j.value("field_amplitude", cfg.field_amplitude);
  cfg.field_length_m = j.value("field_length_m", cfg.field_length_m);
  cfg.depreciation = j.value("depreciation", cfg.depreciation);
  cfg.coeff_area = j.value("coeff_area", cfg.coeff_area);
  cfg.coeff_rooms = j.value("coeff_rooms", cfg.coeff_rooms);
  cfg.coeff_floor = j.value("coeff_floor", cfg.coeff_floor);
  cfg.neighbor_correlation_strength =
      j.value("neighbor_correlation_strength", cfg.neighbor_correlation_strength);
  cfg.market_trend_amplitude = j.value("market_trend_amplitude", cfg.market_trend_amplitude);
  cfg.market_trend_period_days =
      j.value("market_trend_period_days", cfg.market_trend_period_days);
  cfg.noise_std = j.value("noise_std", cfg.noise_std);
  return cfg;
}

}  // namespace

double spatial_field(const CityLatent& city, double lat, double lon) {
  double acc = 0.0;
  for (const FieldBump& b : city.bumps) {
    const double d = distance_m(lat, lon, b.lat, b.lon);
    acc += b.amplitude * std::exp(-(d * d) / (2.0 * b.length_m * b.length_m));
  }
  return acc;
}

double market_trend(const CityLatent& city, const Date& start, const Date& on) {
  if (city.trend_amplitude == 0.0) return 0.0;
  const double t = static_cast<double>(days_between(start, on));
  return city.trend_amplitude *
         std::sin(2.0 * std::numbers::pi * t / city.trend_period_days + city.trend_phase);
}

double oracle_price(const TransactionRecord& rec, const LatentTruth& latent) {
  for (const CityLatent& city : latent.cities) {
    if (city.name == rec.city) {
      return noiseless_price(rec, latent.config, city);
    }
  }
  throw std::invalid_argument("latent truth has no city named '" + rec.city + "'");
}

SynthResult generate(const SynthConfig& cfg) {
  validate_config(cfg);
  const CsvSchema schema = CsvSchema::default_schema();
  const long day_span = days_between(cfg.date_start, cfg.date_end) + 1;
  const YearMonth start_month = year_month(cfg.date_start);

  SynthResult result;
  result.latent.config = cfg;

  for (int ci = 0; ci < cfg.cities; ++ci) {
    // Per-city generator stream; the draw order below is frozen so a given
    // (seed, config) pair always reproduces the same dataset.
    Rng rng = Rng::stream(cfg.seed, 1000 + static_cast<uint64_t>(ci));

    CityLatent city;
    city.name = city_name(ci);
    city.center_lat = 24.0 + 3.0 * ci;
    city.center_lon = 120.0 + 1.5 * ci;
    city.base_price = rng.uniform(cfg.base_price_min, cfg.base_price_max);
    city.trend_amplitude = cfg.market_trend_amplitude;
    city.trend_period_days = cfg.market_trend_period_days;
    city.trend_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    // Location-value field in three layers.  The coarse layer sets district
    // character; the dense medium layer has far more centers than any linear
    // feature basis can interpolate, so location value genuinely requires
    // looking at nearby past prices; the fine layer adds sub-neighborhood
    // texture whose amplitude shrinks as the correlation knob rises.
    struct Layer {
      int count;
      double length_frac;
      double amp_frac;
    };
    const Layer layers[3] = {
        {6, 1.0, 1.0},
        {40, 0.3, 0.5},
        {300, 0.12, 0.45 * (1.0 - cfg.neighbor_correlation_strength)}};
    for (const Layer& layer : layers) {
      for (int b = 0; b < layer.count; ++b) {
        FieldBump bump;
        bump.lat = city.center_lat + rng.uniform(-0.05, 0.05);
        bump.lon = city.center_lon + rng.uniform(-0.05, 0.05);
        bump.amplitude = rng.uniform(-1.0, 1.0) * cfg.field_amplitude * layer.amp_frac;
        bump.length_m = cfg.field_length_m * layer.length_frac * rng.uniform(0.7, 1.3);
        city.bumps.push_back(bump);
      }
    }

    for (const std::string& cat : schema.poi_categories) {
      const uint64_t sites = 3 + rng.below(4);
      for (uint64_t s = 0; s < sites; ++s) {
        PoiSite site;
        site.category = cat;
        site.lat = city.center_lat + rng.uniform(-0.05, 0.05);
        site.lon = city.center_lon + rng.uniform(-0.05, 0.05);
        city.poi_sites.push_back(site);
      }
    }

    // A development is a batch of buildings completed together; with one
    // completion month per development the same-month-within-radius grouping
    // recovers developments as communities, each with enough members that
    // the recency window around any target date is rarely empty.
    const int n_dev = std::max(3, cfg.buildings_per_city / 25);
    std::vector<Development> devs;
    devs.reserve(static_cast<size_t>(n_dev));
    for (int d = 0; d < n_dev; ++d) {
      Development dev;
      dev.lat = city.center_lat + rng.uniform(-0.04, 0.04);
      dev.lon = city.center_lon + rng.uniform(-0.04, 0.04);
      dev.era = add_months(start_month, -static_cast<int>(12 + rng.below(289)));
      dev.building_type = kBuildingTypes[rng.below(kBuildingTypes.size())];
      dev.main_purpose = kPurposes[rng.below(kPurposes.size())];
      dev.land_usage = kLandUsages[rng.below(kLandUsages.size())];
      dev.log_quality = rng.normal(0.0, 0.25 * cfg.field_amplitude);
      devs.push_back(dev);
    }

    const double sigma_lat = 150.0 / kMetersPerDegreeLat;
    const double sigma_lon =
        150.0 / (kMetersPerDegreeLat * std::cos(city.center_lat * std::numbers::pi / 180.0));

    uint64_t next_id = 1;
    for (int b = 0; b < cfg.buildings_per_city; ++b) {
      const Development& dev = devs[rng.below(devs.size())];
      const double blat = dev.lat + rng.normal(0.0, sigma_lat);
      const double blon = dev.lon + rng.normal(0.0, sigma_lon);
      const YearMonth completion = add_months(dev.era, static_cast<int>(rng.below(5)));
      const double total_floors = static_cast<double>(3 + rng.below(18));
      const std::string btype = rng.uniform() < 0.85
                                    ? dev.building_type
                                    : kBuildingTypes[rng.below(kBuildingTypes.size())];
      const std::string purpose =
          rng.uniform() < 0.85 ? dev.main_purpose : kPurposes[rng.below(kPurposes.size())];
      const bool small_house = rng.uniform() < 0.15;
      const bool shop = rng.uniform() < 0.10;
      const double quality = dev.log_quality + rng.normal(0.0, 0.18 * cfg.field_amplitude);
      city.building_effects.push_back(BuildingEffect{blat, blon, quality});

      const int n_txn = 1 + rng.poisson(cfg.txn_mean - 1.0);
      for (int t = 0; t < n_txn; ++t) {
        TransactionRecord rec;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "%s-%05llu", city.name.c_str(),
                      static_cast<unsigned long long>(next_id++));
        rec.id = idbuf;
        rec.city = city.name;
        rec.latitude = blat;
        rec.longitude = blon;
        rec.trade_date =
            Date::from_days(cfg.date_start.to_days() +
                            std::chrono::days(static_cast<long>(rng.below(day_span))));
        rec.completion_date = completion;
        rec.building_type = btype;
        rec.main_purpose = purpose;
        rec.small_house_flag = small_house;
        rec.shop_flag = shop;
        rec.first_floor_flag = false;  // set from the floor draw below
        rec.land_usage = dev.land_usage;
        rec.house_age = years_between(completion, rec.trade_date);

        const double area =
            std::clamp(std::exp(rng.normal(std::log(75.0), 0.35)), 22.0, 250.0);
        const double rooms = static_cast<double>(1 + rng.below(5));
        const double floor = static_cast<double>(1 + rng.below(static_cast<uint64_t>(total_floors)));
        rec.first_floor_flag = floor == 1.0;
        rec.object_fields["area_m2"] = area;
        rec.object_fields["room_count"] = rooms;
        rec.object_fields["floor_number"] = floor;
        rec.object_fields["total_floors"] = total_floors;

        for (const std::string& cat : schema.poi_categories) {
          double min_dist = std::numeric_limits<double>::infinity();
          std::map<int, double> counts;
          for (int radius : schema.poi_radii_m) counts[radius] = 0.0;
          for (const PoiSite& site : city.poi_sites) {
            if (site.category != cat) continue;
            const double d = distance_m(rec.latitude, rec.longitude, site.lat, site.lon);
            min_dist = std::min(min_dist, d);
            for (int radius : schema.poi_radii_m) {
              if (d <= radius) counts[radius] += 1.0;
            }
          }
          for (int radius : schema.poi_radii_m) {
            rec.poi_counts[schema.poi_count_column(cat, radius)] = counts[radius];
          }
          rec.poi_min_dist[schema.poi_dist_column(cat)] = min_dist;
        }

        const double det = noiseless_price(rec, cfg, city);
        double price = det;
        if (cfg.noise_std > 0.0) {
          int tries = 0;
          do {
            price = det + rng.normal(0.0, cfg.noise_std);
            if (++tries > 1000) {
              throw std::runtime_error("synthetic price for '" + rec.id +
                                       "' stayed non-positive after resampling");
            }
          } while (!(price > 0.0));
        } else if (!(price > 0.0)) {
          throw std::runtime_error("noiseless synthetic price for '" + rec.id +
                                   "' is non-positive");
        }
        rec.unit_price = price;

        validate_record(rec);
        result.records.push_back(std::move(rec));
      }
    }
    result.latent.cities.push_back(std::move(city));
  }
  return result;
}

std::string synth_config_to_json_string(const SynthConfig& cfg) {
  return config_to_json(cfg).dump();
}

SynthConfig synth_config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("synthetic config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

std::string latent_to_json_string(const LatentTruth& latent) {
  json j;
  j["format"] = "regram-latent";
  j["version"] = 1;
  j["config"] = config_to_json(latent.config);
  json cities = json::array();
  for (const CityLatent& c : latent.cities) {
    json cj;
    cj["name"] = c.name;
    cj["center_lat"] = c.center_lat;
    cj["center_lon"] = c.center_lon;
    cj["base_price"] = c.base_price;
    json bumps = json::array();
    for (const FieldBump& b : c.bumps) {
      bumps.push_back({{"lat", b.lat},
                       {"lon", b.lon},
                       {"amplitude", b.amplitude},
                       {"length_m", b.length_m}});
    }
    cj["bumps"] = std::move(bumps);
    json sites = json::array();
    for (const PoiSite& s : c.poi_sites) {
      sites.push_back({{"category", s.category}, {"lat", s.lat}, {"lon", s.lon}});
    }
    cj["poi_sites"] = std::move(sites);
    json effects = json::array();
    for (const BuildingEffect& b : c.building_effects) {
      effects.push_back({{"lat", b.lat}, {"lon", b.lon}, {"log_quality", b.log_quality}});
    }
    cj["building_effects"] = std::move(effects);
    cities.push_back(std::move(cj));
  }
  j["cities"] = std::move(cities);
  return j.dump(2) + "\n";
}

LatentTruth latent_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("latent truth is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "regram-latent") {
    throw std::runtime_error("latent truth document has unexpected format tag");
  }
  LatentTruth latent;
  latent.config = config_from_json(j.at("config"));
  for (const json& cj : j.at("cities")) {
    CityLatent c;
    c.name = cj.at("name").get<std::string>();
    c.center_lat = cj.at("center_lat").get<double>();
    c.center_lon = cj.at("center_lon").get<double>();
    c.base_price = cj.at("base_price").get<double>();
    for (const json& bj : cj.at("bumps")) {
      FieldBump b;
      b.lat = bj.at("lat").get<double>();
      b.lon = bj.at("lon").get<double>();
      b.amplitude = bj.at("amplitude").get<double>();
      b.length_m = bj.at("length_m").get<double>();
      c.bumps.push_back(b);
    }
    for (const json& sj : cj.at("poi_sites")) {
      PoiSite s;
      s.category = sj.at("category").get<std::string>();
      s.lat = sj.at("lat").get<double>();
      s.lon = sj.at("lon").get<double>();
      c.poi_sites.push_back(s);
    }
    for (const json& bj : cj.at("building_effects")) {
      BuildingEffect b;
      b.lat = bj.at("lat").get<double>();
      b.lon = bj.at("lon").get<double>();
      b.log_quality = bj.at("log_quality").get<double>();
      c.building_effects.push_back(b);
    }
    latent.cities.push_back(std::move(c));
  }
  return latent;
}

}  // namespace regram
