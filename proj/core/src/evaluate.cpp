#include "regram/evaluate.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "regram/metrics.hpp"

namespace regram {

namespace {

std::vector<double> features_of(const Normalizer& normalizer, const TransactionRecord& rec) {
  FeatureVec f = normalizer.encode(rec);
  std::vector<double> out = std::move(f.s_env);
  out.insert(out.end(), f.s_obj.begin(), f.s_obj.end());
  return out;
}

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

CityEvalData build_city_eval_data(const std::vector<TransactionRecord>& history,
                                  const std::vector<TransactionRecord>& targets,
                                  const Normalizer& normalizer, const GraphConfig& cfg) {
  CityEvalData data;
  data.city = normalizer.city();
  data.normalizer = normalizer;

  for (const auto* recs : {&history, &targets}) {
    for (const TransactionRecord& r : *recs) {
      if (r.city != data.city) {
        throw std::invalid_argument("evaluation data for city '" + data.city +
                                    "' contains record '" + r.id + "' from city '" + r.city +
                                    "'");
      }
    }
  }

  std::vector<TransactionRecord> all = history;
  all.insert(all.end(), targets.begin(), targets.end());
  data.store = EncodedStore::build(all, normalizer);

  GridIndex index = make_grid_index(history, cfg.edge_radius_m + 1.0);
  HistoryView view = HistoryView::over(history, index);
  GraphBundle bundle = build_graph_bundle(history, index, normalizer, cfg);

  data.cases.reserve(targets.size());
  for (const TransactionRecord& t : targets) {
    NeighborContext ctx = make_neighbor_context(t, bundle, view, cfg);
    EvalCase ec;
    ec.record = t;
    ec.ref = resolve_target(t, ctx, data.store);
    ec.baseline_features = features_of(normalizer, t);
    ec.truth = t.unit_price;
    data.cases.push_back(std::move(ec));
  }

  data.knn_pool.reserve(history.size());
  data.lr_x.reserve(history.size());
  data.lr_y_norm.reserve(history.size());
  for (const TransactionRecord& h : history) {
    std::vector<double> feats = features_of(normalizer, h);
    data.knn_pool.push_back(KnnEntry{h.id, feats, h.unit_price});
    data.lr_x.push_back(std::move(feats));
    data.lr_y_norm.push_back(normalizer.normalize_price(h.unit_price));
  }
  return data;
}

std::vector<double> predict_regram(Model& model, const CityEvalData& data) {
  std::vector<double> out;
  out.reserve(data.cases.size());
  if (data.cases.empty()) return out;
  std::vector<TargetRef> refs;
  refs.reserve(data.cases.size());
  for (const EvalCase& ec : data.cases) refs.push_back(ec.ref);
  ad::Tape tape;
  Model::Batch batch = model.forward(tape, data.store, refs, ad::Mode::kEval);
  const std::vector<double>& p_hat = tape.value(batch.p_hat);
  for (size_t i = 0; i < refs.size(); ++i) {
    out.push_back(data.normalizer.denormalize_price(p_hat[i]));
  }
  return out;
}

std::vector<double> predict_knn(const CityEvalData& data, int k) {
  std::vector<double> out;
  out.reserve(data.cases.size());
  for (const EvalCase& ec : data.cases) {
    out.push_back(knn_predict(data.knn_pool, ec.baseline_features, k));
  }
  return out;
}

std::vector<double> predict_lr(const CityEvalData& data) {
  LinearRegressor lr;
  lr.fit(data.lr_x, data.lr_y_norm);
  std::vector<double> out;
  out.reserve(data.cases.size());
  for (const EvalCase& ec : data.cases) {
    out.push_back(data.normalizer.denormalize_price(lr.predict(ec.baseline_features)));
  }
  return out;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "model,city,n,mape,hit10,hit20\n";
  for (const EvalRow& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%.6f,%.6f,%.6f\n", r.model.c_str(),
                  r.city.c_str(), r.n, r.mape, r.hit10, r.hit20);
    os << buf;
  }
  return os.str();
}

std::string EvalReport::to_table() const {
  std::vector<std::array<std::string, 6>> cells;
  cells.push_back({"model", "city", "n", "MAPE%", "HIT10%", "HIT20%"});
  for (const EvalRow& r : rows) {
    cells.push_back({r.model, r.city, std::to_string(r.n), fmt2(r.mape), fmt2(r.hit10),
                     fmt2(r.hit20)});
  }
  std::array<size_t, 6> width{};
  for (const auto& row : cells) {
    for (size_t c = 0; c < 6; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : cells) {
    for (size_t c = 0; c < 6; ++c) {
      os << row[c] << std::string(width[c] - row[c].size(), ' ');
      os << (c + 1 < 6 ? "  " : "\n");
    }
  }
  return os.str();
}

EvalReport summarize(const std::vector<CityEvalData>& cities,
                     const std::vector<ModelPredictions>& predictions) {
  std::vector<const CityEvalData*> sorted;
  for (const CityEvalData& c : cities) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(),
            [](const CityEvalData* a, const CityEvalData* b) { return a->city < b->city; });

  EvalReport report;
  for (const ModelPredictions& mp : predictions) {
    double sum_mape = 0.0, sum_h10 = 0.0, sum_h20 = 0.0;
    size_t total_n = 0;
    size_t scored_cities = 0;
    for (const CityEvalData* c : sorted) {
      auto it = mp.by_city.find(c->city);
      if (it == mp.by_city.end()) {
        throw std::invalid_argument("no '" + mp.model + "' predictions for city '" + c->city +
                                    "'");
      }
      if (it->second.size() != c->cases.size()) {
        throw std::invalid_argument("'" + mp.model + "' prediction count mismatch for city '" +
                                    c->city + "'");
      }
      std::vector<double> truths;
      truths.reserve(c->cases.size());
      for (const EvalCase& ec : c->cases) truths.push_back(ec.truth);
      EvalRow row;
      row.model = mp.model;
      row.city = c->city;
      row.n = c->cases.size();
      row.mape = mape(it->second, truths);
      row.hit10 = hit_rate(it->second, truths, 10.0);
      row.hit20 = hit_rate(it->second, truths, 20.0);
      sum_mape += row.mape;
      sum_h10 += row.hit10;
      sum_h20 += row.hit20;
      total_n += row.n;
      ++scored_cities;
      report.rows.push_back(std::move(row));
    }
    if (scored_cities > 0) {
      EvalRow avg;
      avg.model = mp.model;
      avg.city = "Average";
      avg.n = total_n;
      avg.mape = sum_mape / static_cast<double>(scored_cities);
      avg.hit10 = sum_h10 / static_cast<double>(scored_cities);
      avg.hit20 = sum_h20 / static_cast<double>(scored_cities);
      report.rows.push_back(std::move(avg));
    }
  }
  return report;
}

}  // namespace regram
