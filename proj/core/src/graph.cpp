#include "regram/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "regram/dates.hpp"

namespace regram {

namespace {

constexpr int kGraphFileVersion = 1;

// Union-find over record ordinals.
class DisjointSets {
 public:
  explicit DisjointSets(size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  size_t find(size_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(size_t a, size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<size_t> parent_;
};

std::unordered_map<std::string, size_t> index_by_id(const std::vector<TransactionRecord>& records) {
  std::unordered_map<std::string, size_t> by_id;
  by_id.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    if (!by_id.emplace(records[i].id, i).second) {
      throw std::runtime_error("duplicate record id '" + records[i].id + "'");
    }
  }
  return by_id;
}

}  // namespace

HistoryView HistoryView::over(const std::vector<TransactionRecord>& records,
                              const GridIndex& index) {
  HistoryView view;
  view.records = &records;
  view.index = &index;
  view.by_id.reserve(records.size());
  for (const auto& r : records) view.by_id[r.id] = &r;
  return view;
}

GridIndex make_grid_index(const std::vector<TransactionRecord>& records, double cell_m) {
  std::vector<GeoPoint> points;
  points.reserve(records.size());
  for (const auto& r : records) points.push_back({r.id, r.latitude, r.longitude});
  return GridIndex(std::move(points), cell_m);
}

bool txn_edge_predicate(const TransactionRecord& a, const TransactionRecord& b,
                        const GraphConfig& cfg) {
  if (distance_m(a.latitude, a.longitude, b.latitude, b.longitude) >= cfg.edge_radius_m) {
    return false;
  }
  const long gap = std::labs(days_between(a.trade_date, b.trade_date));
  if (gap > cfg.max_trade_gap_days && !same_calendar_month(a.trade_date, b.trade_date)) {
    return false;
  }
  if (std::abs(a.house_age - b.house_age) >= cfg.max_age_gap_years) return false;
  return a.building_type == b.building_type && a.main_purpose == b.main_purpose &&
         a.small_house_flag == b.small_house_flag && a.shop_flag == b.shop_flag &&
         a.first_floor_flag == b.first_floor_flag;
}

Adjacency build_txn_graph(const std::vector<TransactionRecord>& records, const GridIndex& index,
                          const GraphConfig& cfg) {
  const auto by_id = index_by_id(records);
  Adjacency adj;
  for (const auto& rec : records) {
    std::vector<std::string> neighbors;
    for (const auto& cand_id :
         index.radius_query(rec.latitude, rec.longitude, cfg.edge_radius_m, &rec.id)) {
      const auto it = by_id.find(cand_id);
      if (it == by_id.end()) continue;
      if (txn_edge_predicate(rec, records[it->second], cfg)) neighbors.push_back(cand_id);
    }
    adj[rec.id] = std::move(neighbors);  // radius_query output is already sorted
  }
  return adj;
}

CommunityAssignment assign_communities(const std::vector<TransactionRecord>& records,
                                       const GridIndex& index, const GraphConfig& cfg) {
  const auto by_id = index_by_id(records);
  DisjointSets sets(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    for (const auto& cand_id :
         index.radius_query(rec.latitude, rec.longitude, cfg.edge_radius_m, &rec.id)) {
      const auto it = by_id.find(cand_id);
      if (it == by_id.end()) continue;
      if (records[it->second].completion_date == rec.completion_date) sets.unite(i, it->second);
    }
  }

  std::map<size_t, std::vector<std::string>> component_members;
  for (size_t i = 0; i < records.size(); ++i) component_members[sets.find(i)].push_back(records[i].id);

  CommunityAssignment out;
  for (auto& [root, ids] : component_members) {
    if (ids.size() < 2) continue;  // singleton: no community
    std::sort(ids.begin(), ids.end());
    const std::string community_id = ids.front();  // smallest member id
    for (const auto& id : ids) out.community_of[id] = community_id;
    out.members[community_id] = std::move(ids);
  }
  return out;
}

Adjacency build_inter_comm_edges(const CommunityAssignment& communities,
                                 const std::map<std::string, std::vector<double>>& poi_by_id,
                                 const GraphConfig& cfg) {
  std::vector<std::string> comm_ids;
  std::map<std::string, std::vector<double>> mean_poi;
  for (const auto& [cid, member_ids] : communities.members) {
    comm_ids.push_back(cid);
    std::vector<double> acc;
    for (const auto& id : member_ids) {
      const auto it = poi_by_id.find(id);
      if (it == poi_by_id.end()) {
        throw std::runtime_error("missing PoI vector for community member '" + id + "'");
      }
      if (acc.empty()) acc.assign(it->second.size(), 0.0);
      if (acc.size() != it->second.size()) {
        throw std::runtime_error("PoI vector length mismatch for '" + id + "'");
      }
      for (size_t k = 0; k < acc.size(); ++k) acc[k] += it->second[k];
    }
    for (auto& v : acc) v /= double(member_ids.size());
    mean_poi[cid] = std::move(acc);
  }

  Adjacency adj;
  for (const auto& cid : comm_ids) adj[cid] = {};
  const size_t c = comm_ids.size();
  if (c < 2) return adj;

  struct Pair {
    double dist;
    const std::string* a;
    const std::string* b;
  };
  std::vector<Pair> pairs;
  pairs.reserve(c * (c - 1) / 2);
  for (size_t i = 0; i < c; ++i) {
    for (size_t j = i + 1; j < c; ++j) {
      const auto& va = mean_poi.at(comm_ids[i]);
      const auto& vb = mean_poi.at(comm_ids[j]);
      double sq = 0.0;
      for (size_t k = 0; k < va.size(); ++k) {
        const double d = va[k] - vb[k];
        sq += d * d;
      }
      pairs.push_back({std::sqrt(sq), &comm_ids[i], &comm_ids[j]});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    if (x.dist != y.dist) return x.dist < y.dist;
    if (*x.a != *y.a) return *x.a < *y.a;
    return *x.b < *y.b;
  });

  const size_t total = pairs.size();
  const size_t m = std::min(total, std::max<size_t>(1, size_t(std::floor(cfg.inter_comm_fraction * double(total)))));
  for (size_t i = 0; i < m; ++i) {
    adj[*pairs[i].a].push_back(*pairs[i].b);
    adj[*pairs[i].b].push_back(*pairs[i].a);
  }
  for (auto& [_, list] : adj) std::sort(list.begin(), list.end());
  return adj;
}

GraphBundle build_graph_bundle(const std::vector<TransactionRecord>& records,
                               const GridIndex& index, const Normalizer& normalizer,
                               const GraphConfig& cfg) {
  GraphBundle bundle;
  bundle.txn_adjacency = build_txn_graph(records, index, cfg);
  bundle.communities = assign_communities(records, index, cfg);

  std::map<std::string, std::vector<double>> poi_by_id;
  for (const auto& rec : records) {
    if (bundle.communities.community_of.count(rec.id)) {
      poi_by_id[rec.id] = normalizer.poi_features(rec);
    }
  }
  bundle.community_adjacency = build_inter_comm_edges(bundle.communities, poi_by_id, cfg);
  return bundle;
}

NeighborContext make_neighbor_context(const TransactionRecord& target, const GraphBundle& bundle,
                                      const HistoryView& history, const GraphConfig& cfg) {
  NeighborContext ctx;
  ctx.target_id = target.id;

  // --- transaction-level neighbors: adjacency restricted to the past -------
  std::vector<std::string> candidates;
  if (const auto it = bundle.txn_adjacency.find(target.id); it != bundle.txn_adjacency.end()) {
    candidates = it->second;
  } else {
    for (const auto& cand_id : history.index->radius_query(target.latitude, target.longitude,
                                                           cfg.edge_radius_m, &target.id)) {
      const auto rec = history.by_id.find(cand_id);
      if (rec != history.by_id.end() && txn_edge_predicate(target, *rec->second, cfg)) {
        candidates.push_back(cand_id);
      }
    }
  }

  struct Scored {
    double dist;
    const std::string* id;
  };
  std::vector<Scored> past;
  for (const auto& id : candidates) {
    const auto it = history.by_id.find(id);
    if (it == history.by_id.end() || id == target.id) continue;
    const TransactionRecord& rec = *it->second;
    if (rec.trade_date < target.trade_date) {
      past.push_back({distance_m(target.latitude, target.longitude, rec.latitude, rec.longitude),
                      &it->first});
    }
  }
  std::sort(past.begin(), past.end(), [](const Scored& a, const Scored& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return *a.id < *b.id;
  });
  if (past.size() > size_t(cfg.neighbor_cap)) past.resize(size_t(cfg.neighbor_cap));
  for (const auto& s : past) ctx.txn_neighbors.push_back(*s.id);

  // --- community attachment ------------------------------------------------
  if (const auto it = bundle.communities.community_of.find(target.id);
      it != bundle.communities.community_of.end()) {
    ctx.community_id = it->second;
  } else {
    // Out-of-bundle target: it would join the community of any historical
    // record sharing its completion month within the edge radius (the same
    // connectivity rule communities are built from); the smallest such
    // community id keeps this deterministic.
    for (const auto& cand_id : history.index->radius_query(target.latitude, target.longitude,
                                                           cfg.edge_radius_m, &target.id)) {
      const auto rec = history.by_id.find(cand_id);
      if (rec == history.by_id.end()) continue;
      if (rec->second->completion_date != target.completion_date) continue;
      const auto comm = bundle.communities.community_of.find(cand_id);
      if (comm == bundle.communities.community_of.end()) continue;
      if (ctx.community_id.empty() || comm->second < ctx.community_id) {
        ctx.community_id = comm->second;
      }
    }
  }
  if (ctx.community_id.empty()) return ctx;

  const auto adj = bundle.community_adjacency.find(ctx.community_id);
  if (adj == bundle.community_adjacency.end()) return ctx;

  // --- usable members: the 2 calendar months preceding the target ----------
  const Date window_start = add_months(target.trade_date, -cfg.community_window_months);
  for (const auto& neighbor_cid : adj->second) {
    CommunityNeighborhood hood;
    hood.community_id = neighbor_cid;
    for (const auto& member_id : bundle.communities.members.at(neighbor_cid)) {
      const auto it = history.by_id.find(member_id);
      if (it == history.by_id.end()) continue;
      const Date d = it->second->trade_date;
      if (!(d < target.trade_date)) continue;
      if (d < window_start) continue;
      hood.member_ids.push_back(member_id);
    }
    if (!hood.member_ids.empty()) ctx.neighbor_communities.push_back(std::move(hood));
  }
  return ctx;
}

// ------------------------------------------------------------------- JSON --

namespace {

nlohmann::json adjacency_to_json(const Adjacency& adj) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, list] : adj) j[id] = list;
  return j;
}

Adjacency adjacency_from_json(const nlohmann::json& j) {
  Adjacency adj;
  for (const auto& [id, list] : j.items()) adj[id] = list.get<std::vector<std::string>>();
  return adj;
}

}  // namespace

std::string bundles_to_json_string(const std::map<std::string, GraphBundle>& per_city) {
  nlohmann::json j;
  j["format"] = "regram-graph";
  j["version"] = kGraphFileVersion;
  nlohmann::json cities = nlohmann::json::object();
  for (const auto& [city, bundle] : per_city) {
    nlohmann::json b;
    b["txn_adjacency"] = adjacency_to_json(bundle.txn_adjacency);
    nlohmann::json community_of = nlohmann::json::object();
    for (const auto& [id, cid] : bundle.communities.community_of) community_of[id] = cid;
    b["community_of"] = community_of;
    nlohmann::json members = nlohmann::json::object();
    for (const auto& [cid, ids] : bundle.communities.members) members[cid] = ids;
    b["community_members"] = members;
    b["community_adjacency"] = adjacency_to_json(bundle.community_adjacency);
    cities[city] = std::move(b);
  }
  j["cities"] = std::move(cities);
  return j.dump(2);
}

std::map<std::string, GraphBundle> bundles_from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("format").get<std::string>() != "regram-graph") {
    throw std::runtime_error("not a graph file (bad format marker)");
  }
  if (j.at("version").get<int>() != kGraphFileVersion) {
    throw std::runtime_error("unsupported graph file version");
  }
  std::map<std::string, GraphBundle> out;
  for (const auto& [city, b] : j.at("cities").items()) {
    GraphBundle bundle;
    bundle.txn_adjacency = adjacency_from_json(b.at("txn_adjacency"));
    for (const auto& [id, cid] : b.at("community_of").items()) {
      bundle.communities.community_of[id] = cid.get<std::string>();
    }
    for (const auto& [cid, ids] : b.at("community_members").items()) {
      bundle.communities.members[cid] = ids.get<std::vector<std::string>>();
    }
    bundle.community_adjacency = adjacency_from_json(b.at("community_adjacency"));
    out[city] = std::move(bundle);
  }
  return out;
}

}  // namespace regram
