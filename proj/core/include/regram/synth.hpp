#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "regram/dates.hpp"
#include "regram/records.hpp"

namespace regram {

// Knobs of the synthetic market.  Every price is
//   base_city · exp(spatial_field) · exp(building quality) · exp(market trend)
//            · exp(−depreciation · age) · (1 + Σ object-feature terms)
//            + N(0, noise_std), resampled > 0,
// so the noiseless part is recomputable from the record plus the latent
// sidecar alone.  Building quality scales with field_amplitude (0.25·A per
// development, 0.18·A per building), so a zero amplitude flattens both the
// field and the quality effects.  The market trend is a slow city-wide
// sinusoid in log price: no feature column encodes the trade date, so the
// current market level is only observable through recent nearby prices.
struct SynthConfig {
  uint64_t seed = 1;
  int cities = 3;
  int buildings_per_city = 300;
  double txn_mean = 4.0;  // mean transactions per building (≥ 1; drawn 1 + Poisson(mean − 1))
  Date date_start{2019, 1, 1};
  Date date_end{2021, 6, 30};
  double base_price_min = 2500.0;
  double base_price_max = 5500.0;
  double field_amplitude = 0.35;  // log-price amplitude of the location-value field
  double field_length_m = 1500.0;
  double depreciation = 0.02;  // per year of house age
  double coeff_area = -0.06;   // · (area − 75)/75
  double coeff_rooms = 0.03;   // · (rooms − 3)/3
  double coeff_floor = 0.08;   // · (floor/total − 0.5)
  // Fraction of the field variance placed at super-neighborhood length
  // scales: fine-texture bump amplitude is scaled by (1 − strength), so 1
  // makes nearby prices move in lockstep and 0 decorrelates them fastest.
  double neighbor_correlation_strength = 0.8;
  // City-wide market level drift: amplitude (log-price units) and period of a
  // sinusoid over days since date_start, with a per-city random phase.  Zero
  // amplitude freezes the market level.
  double market_trend_amplitude = 0.10;
  double market_trend_period_days = 900.0;
  double noise_std = 80.0;
};

struct FieldBump {
  double lat = 0.0;
  double lon = 0.0;
  double amplitude = 0.0;  // log-price units
  double length_m = 0.0;   // Gaussian radial length scale
};

struct PoiSite {
  std::string category;
  double lat = 0.0;
  double lon = 0.0;
};

// Log-price quality of one building (development plus building draw), keyed
// by the building's exact coordinates.  Deliberately absent from the feature
// columns: it can only be recovered from nearby past prices, which is what
// separates graph-aware models from pure feature regression here.
struct BuildingEffect {
  double lat = 0.0;
  double lon = 0.0;
  double log_quality = 0.0;
};

struct CityLatent {
  std::string name;
  double center_lat = 0.0;
  double center_lon = 0.0;
  double base_price = 0.0;
  double trend_amplitude = 0.0;  // log-price units; 0 disables the trend
  double trend_period_days = 0.0;
  double trend_phase = 0.0;  // radians
  std::vector<FieldBump> bumps;  // coarse, then medium, then fine layer
  std::vector<PoiSite> poi_sites;
  std::vector<BuildingEffect> building_effects;
};

struct LatentTruth {
  SynthConfig config;
  std::vector<CityLatent> cities;
};

struct SynthResult {
  std::vector<TransactionRecord> records;  // city by city, id order
  LatentTruth latent;
};

// Σ over bumps of amplitude · exp(−d² / (2 · length²)) at the given point.
double spatial_field(const CityLatent& city, double lat, double lon);

// Log-price market level on a date: amplitude · sin(2π · t / period + phase)
// with t in days since `start`.  Zero whenever the amplitude is zero.
double market_trend(const CityLatent& city, const Date& start, const Date& on);

// Noiseless price of a record under the latent market; the generated
// unit_price differs from this only by the additive Gaussian noise.
double oracle_price(const TransactionRecord& rec, const LatentTruth& latent);

// Deterministic in the seed: same config → identical records and latent.
SynthResult generate(const SynthConfig& cfg);

std::string synth_config_to_json_string(const SynthConfig& cfg);
// Absent keys keep defaults; unknown keys are an error.
SynthConfig synth_config_from_json_string(const std::string& text);

std::string latent_to_json_string(const LatentTruth& latent);
LatentTruth latent_from_json_string(const std::string& text);

}  // namespace regram
