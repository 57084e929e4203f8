#include "regram/geojson.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include "regram/geo.hpp"

namespace regram {

namespace {

using nlohmann::json;

json point_feature(const TransactionRecord& rec, json properties) {
  json f;
  f["type"] = "Feature";
  f["geometry"] = {{"type", "Point"}, {"coordinates", {rec.longitude, rec.latitude}}};
  f["properties"] = std::move(properties);
  return f;
}

}  // namespace

std::string case_study_geojson(const TransactionRecord& target, const Prediction& prediction,
                               const std::vector<TransactionRecord>& history,
                               double context_radius_m) {
  if (!(context_radius_m > 0.0)) {
    throw std::invalid_argument("context radius must be positive");
  }
  std::unordered_map<std::string, const TransactionRecord*> by_id;
  for (const TransactionRecord& r : history) by_id[r.id] = &r;

  json features = json::array();
  features.push_back(point_feature(
      target, json{{"id", target.id}, {"role", "target"}, {"trade_date", target.trade_date.to_string()}}));

  std::vector<std::pair<std::string, double>> neighbors = prediction.neighbor_attention;
  std::sort(neighbors.begin(), neighbors.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::set<std::string> neighbor_ids;
  for (const auto& [id, weight] : neighbors) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw std::invalid_argument("neighbor '" + id + "' is missing from the history records");
    }
    const TransactionRecord& n = *it->second;
    neighbor_ids.insert(id);
    features.push_back(point_feature(
        n, json{{"id", n.id},
                {"role", "neighbor"},
                {"attention", weight},
                {"distance_m", distance_m(target.latitude, target.longitude, n.latitude,
                                          n.longitude)},
                {"unit_price", n.unit_price},
                {"trade_date", n.trade_date.to_string()}}));
  }

  struct NonNeighbor {
    const TransactionRecord* rec;
    double dist;
  };
  std::vector<NonNeighbor> others;
  for (const TransactionRecord& r : history) {
    if (r.id == target.id || neighbor_ids.count(r.id)) continue;
    const double d = distance_m(target.latitude, target.longitude, r.latitude, r.longitude);
    if (d < context_radius_m) others.push_back({&r, d});
  }
  std::sort(others.begin(), others.end(), [](const NonNeighbor& a, const NonNeighbor& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.rec->id < b.rec->id;
  });
  for (const NonNeighbor& nn : others) {
    features.push_back(point_feature(
        *nn.rec, json{{"id", nn.rec->id},
                      {"role", "non-neighbor"},
                      {"distance_m", nn.dist},
                      {"unit_price", nn.rec->unit_price},
                      {"trade_date", nn.rec->trade_date.to_string()}}));
  }

  json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = std::move(features);
  return doc.dump(2) + "\n";
}

}  // namespace regram
