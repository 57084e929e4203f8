#include "regram/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace regram {

namespace {

constexpr double kStdFloor = 1e-12;

double numeric_value(const TransactionRecord& rec, const std::string& name) {
  if (name == "latitude") return rec.latitude;
  if (name == "longitude") return rec.longitude;
  if (name == "house_age") return rec.house_age;
  if (auto it = rec.object_fields.find(name); it != rec.object_fields.end()) return it->second;
  if (auto it = rec.poi_counts.find(name); it != rec.poi_counts.end()) return it->second;
  if (auto it = rec.poi_min_dist.find(name); it != rec.poi_min_dist.end()) return it->second;
  throw std::runtime_error("record " + rec.id + " lacks numeric field '" + name + "'");
}

std::string categorical_value(const TransactionRecord& rec, const std::string& name) {
  if (name == "land_usage") return rec.land_usage;
  if (name == "building_type") return rec.building_type;
  if (name == "main_purpose") return rec.main_purpose;
  if (name == "small_house_flag") return rec.small_house_flag ? "1" : "0";
  if (name == "shop_flag") return rec.shop_flag ? "1" : "0";
  if (name == "first_floor_flag") return rec.first_floor_flag ? "1" : "0";
  throw std::runtime_error("unknown categorical field '" + name + "'");
}

FieldStats fit_stats(const std::string& name, const std::vector<TransactionRecord>& records,
                     double (*extract)(const TransactionRecord&, const std::string&)) {
  FieldStats s;
  s.name = name;
  double sum = 0.0;
  for (const auto& r : records) sum += extract(r, name);
  s.mean = sum / double(records.size());
  double sq = 0.0;
  for (const auto& r : records) {
    const double d = extract(r, name) - s.mean;
    sq += d * d;
  }
  s.std = std::sqrt(sq / double(records.size()));
  if (s.std < kStdFloor) s.std = 1.0;
  return s;
}

double extract_numeric(const TransactionRecord& rec, const std::string& name) {
  return numeric_value(rec, name);
}

CategoricalField fit_categorical(const std::string& name,
                                 const std::vector<TransactionRecord>& records) {
  std::set<std::string> distinct;
  for (const auto& r : records) distinct.insert(categorical_value(r, name));
  CategoricalField f;
  f.name = name;
  f.values.assign(distinct.begin(), distinct.end());  // std::set iterates sorted
  return f;
}

void append_one_hot(std::vector<double>& out, const CategoricalField& field,
                    const std::string& value) {
  const size_t base = out.size();
  out.resize(base + field.values.size(), 0.0);
  const auto it = std::lower_bound(field.values.begin(), field.values.end(), value);
  if (it != field.values.end() && *it == value) {
    out[base + size_t(it - field.values.begin())] = 1.0;  // unseen values stay all-zero
  }
}

nlohmann::json stats_to_json(const std::vector<FieldStats>& fields) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : fields) arr.push_back({{"name", f.name}, {"mean", f.mean}, {"std", f.std}});
  return arr;
}

std::vector<FieldStats> stats_from_json(const nlohmann::json& arr) {
  std::vector<FieldStats> out;
  for (const auto& item : arr) {
    out.push_back({item.at("name").get<std::string>(), item.at("mean").get<double>(),
                   item.at("std").get<double>()});
  }
  return out;
}

nlohmann::json categoricals_to_json(const std::vector<CategoricalField>& fields) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : fields) arr.push_back({{"name", f.name}, {"values", f.values}});
  return arr;
}

std::vector<CategoricalField> categoricals_from_json(const nlohmann::json& arr) {
  std::vector<CategoricalField> out;
  for (const auto& item : arr) {
    out.push_back(
        {item.at("name").get<std::string>(), item.at("values").get<std::vector<std::string>>()});
  }
  return out;
}

}  // namespace

Normalizer Normalizer::fit(const std::vector<TransactionRecord>& train_records,
                           const std::string& city) {
  std::vector<TransactionRecord> records;
  for (const auto& r : train_records) {
    if (r.city == city) records.push_back(r);
  }
  if (records.empty()) {
    throw std::runtime_error("Normalizer::fit: no training records for city '" + city + "'");
  }
  const auto& proto = records.front();
  for (const auto& r : records) {
    if (r.object_fields.size() != proto.object_fields.size() ||
        r.poi_counts.size() != proto.poi_counts.size() ||
        r.poi_min_dist.size() != proto.poi_min_dist.size()) {
      throw std::runtime_error("Normalizer::fit: records disagree on feature columns (id=" +
                               r.id + ")");
    }
  }

  Normalizer n;
  n.city_ = city;

  // Environment numerics: location, age, then the point-of-interest block.
  std::vector<std::string> env_names = {"latitude", "longitude", "house_age"};
  n.poi_begin_ = env_names.size();
  for (const auto& [name, _] : proto.poi_counts) env_names.push_back(name);    // map order: sorted
  for (const auto& [name, _] : proto.poi_min_dist) env_names.push_back(name);  // map order: sorted
  n.poi_end_ = env_names.size();
  for (const auto& name : env_names) n.env_numeric_.push_back(fit_stats(name, records, extract_numeric));
  n.env_categorical_.push_back(fit_categorical("land_usage", records));

  for (const auto& [name, _] : proto.object_fields) {
    n.obj_numeric_.push_back(fit_stats(name, records, extract_numeric));
  }
  for (const char* name : {"building_type", "main_purpose", "small_house_flag", "shop_flag",
                           "first_floor_flag"}) {
    n.obj_categorical_.push_back(fit_categorical(name, records));
  }

  double sum = 0.0;
  for (const auto& r : records) sum += r.unit_price;
  n.price_.name = "unit_price";
  n.price_.mean = sum / double(records.size());
  double sq = 0.0;
  for (const auto& r : records) {
    const double d = r.unit_price - n.price_.mean;
    sq += d * d;
  }
  n.price_.std = std::sqrt(sq / double(records.size()));
  if (n.price_.std < kStdFloor) n.price_.std = 1.0;
  return n;
}

FeatureVec Normalizer::encode(const TransactionRecord& rec) const {
  if (rec.city != city_) {
    throw std::runtime_error("Normalizer for city '" + city_ + "' cannot encode record " +
                             rec.id + " from city '" + rec.city + "'");
  }
  FeatureVec out;
  out.s_env.reserve(env_dim());
  for (const auto& f : env_numeric_) {
    out.s_env.push_back((numeric_value(rec, f.name) - f.mean) / f.std);
  }
  for (const auto& f : env_categorical_) append_one_hot(out.s_env, f, categorical_value(rec, f.name));

  out.s_obj.reserve(obj_dim());
  for (const auto& f : obj_numeric_) {
    out.s_obj.push_back((numeric_value(rec, f.name) - f.mean) / f.std);
  }
  for (const auto& f : obj_categorical_) append_one_hot(out.s_obj, f, categorical_value(rec, f.name));

  out.p_norm = normalize_price(rec.unit_price);
  return out;
}

double Normalizer::normalize_price(double price) const { return (price - price_.mean) / price_.std; }

double Normalizer::denormalize_price(double p_norm) const {
  return p_norm * price_.std + price_.mean;
}

size_t Normalizer::env_dim() const {
  size_t d = env_numeric_.size();
  for (const auto& f : env_categorical_) d += f.values.size();
  return d;
}

size_t Normalizer::obj_dim() const {
  size_t d = obj_numeric_.size();
  for (const auto& f : obj_categorical_) d += f.values.size();
  return d;
}

std::vector<double> Normalizer::poi_features(const TransactionRecord& rec) const {
  std::vector<double> out;
  out.reserve(poi_end_ - poi_begin_);
  for (size_t i = poi_begin_; i < poi_end_; ++i) {
    const auto& f = env_numeric_[i];
    out.push_back((numeric_value(rec, f.name) - f.mean) / f.std);
  }
  return out;
}

std::string Normalizer::to_json_string() const {
  nlohmann::json j;
  j["city"] = city_;
  j["price"] = {{"mean", price_.mean}, {"std", price_.std}};
  j["env_numeric"] = stats_to_json(env_numeric_);
  j["env_categorical"] = categoricals_to_json(env_categorical_);
  j["obj_numeric"] = stats_to_json(obj_numeric_);
  j["obj_categorical"] = categoricals_to_json(obj_categorical_);
  j["poi_span"] = {poi_begin_, poi_end_};
  return j.dump();
}

Normalizer Normalizer::from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Normalizer n;
  n.city_ = j.at("city").get<std::string>();
  n.price_ = {"unit_price", j.at("price").at("mean").get<double>(),
              j.at("price").at("std").get<double>()};
  n.env_numeric_ = stats_from_json(j.at("env_numeric"));
  n.env_categorical_ = categoricals_from_json(j.at("env_categorical"));
  n.obj_numeric_ = stats_from_json(j.at("obj_numeric"));
  n.obj_categorical_ = categoricals_from_json(j.at("obj_categorical"));
  n.poi_begin_ = j.at("poi_span").at(0).get<size_t>();
  n.poi_end_ = j.at("poi_span").at(1).get<size_t>();
  return n;
}

}  // namespace regram
