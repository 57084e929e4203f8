#include "regram/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "regram/metrics.hpp"
#include "regram/optimizer.hpp"
#include "regram/rng.hpp"

namespace regram {

std::string train_config_to_json_string(const TrainConfig& cfg) {
  nlohmann::json j;
  j["model"] = {{"d_m", cfg.model.d_m},
                {"kernels", cfg.model.kernels},
                {"heads", cfg.model.heads},
                {"tau", cfg.model.tau},
                {"use_neighbor_relation", cfg.model.use_neighbor_relation},
                {"use_neighbor_price", cfg.model.use_neighbor_price},
                {"use_community", cfg.model.use_community}};
  j["graph"] = {{"edge_radius_m", cfg.graph.edge_radius_m},
                {"max_trade_gap_days", cfg.graph.max_trade_gap_days},
                {"max_age_gap_years", cfg.graph.max_age_gap_years},
                {"neighbor_cap", cfg.graph.neighbor_cap},
                {"community_window_months", cfg.graph.community_window_months},
                {"inter_comm_fraction", cfg.graph.inter_comm_fraction}};
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["val_months"] = cfg.val_months;
  j["test_months"] = cfg.test_months;
  return j.dump(2);
}

TrainConfig train_config_from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  TrainConfig cfg;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (m.contains("d_m")) cfg.model.d_m = m.at("d_m").get<int>();
    if (m.contains("kernels")) cfg.model.kernels = m.at("kernels").get<int>();
    if (m.contains("heads")) cfg.model.heads = m.at("heads").get<int>();
    if (m.contains("tau")) cfg.model.tau = m.at("tau").get<double>();
    if (m.contains("use_neighbor_relation")) {
      cfg.model.use_neighbor_relation = m.at("use_neighbor_relation").get<bool>();
    }
    if (m.contains("use_neighbor_price")) {
      cfg.model.use_neighbor_price = m.at("use_neighbor_price").get<bool>();
    }
    if (m.contains("use_community")) cfg.model.use_community = m.at("use_community").get<bool>();
  }
  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    if (g.contains("edge_radius_m")) cfg.graph.edge_radius_m = g.at("edge_radius_m").get<double>();
    if (g.contains("max_trade_gap_days")) {
      cfg.graph.max_trade_gap_days = g.at("max_trade_gap_days").get<int>();
    }
    if (g.contains("max_age_gap_years")) {
      cfg.graph.max_age_gap_years = g.at("max_age_gap_years").get<double>();
    }
    if (g.contains("neighbor_cap")) cfg.graph.neighbor_cap = g.at("neighbor_cap").get<int>();
    if (g.contains("community_window_months")) {
      cfg.graph.community_window_months = g.at("community_window_months").get<int>();
    }
    if (g.contains("inter_comm_fraction")) {
      cfg.graph.inter_comm_fraction = g.at("inter_comm_fraction").get<double>();
    }
  }
  if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("val_months")) cfg.val_months = j.at("val_months").get<int>();
  if (j.contains("test_months")) cfg.test_months = j.at("test_months").get<int>();
  return cfg;
}

SplitResult chronological_split(const std::vector<TransactionRecord>& records, int val_months,
                                int test_months) {
  if (val_months < 1 || test_months < 1) {
    throw std::invalid_argument("chronological_split: month spans must be >= 1");
  }
  if (records.empty()) throw std::invalid_argument("chronological_split: no records");

  std::set<YearMonth> months;
  for (const auto& r : records) months.insert(year_month(r.trade_date));
  if (int(months.size()) <= val_months + test_months) {
    throw std::invalid_argument(
        "chronological_split: records span " + std::to_string(months.size()) +
        " calendar months; need more than " + std::to_string(val_months + test_months));
  }
  const YearMonth last = *months.rbegin();
  SplitResult out;
  out.test_start = add_months(last, -(test_months - 1));
  out.val_start = add_months(out.test_start, -val_months);
  for (const auto& r : records) {
    const YearMonth ym = year_month(r.trade_date);
    if (ym >= out.test_start) out.test.push_back(r);
    else if (ym >= out.val_start) out.val.push_back(r);
    else out.train.push_back(r);
  }
  return out;
}

double mse(const std::vector<double>& preds, const std::vector<double>& truths) {
  if (preds.empty() || preds.size() != truths.size()) {
    throw std::invalid_argument("mse: inputs must be non-empty and of equal length");
  }
  double acc = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - truths[i];
    acc += d * d;
  }
  return acc / double(preds.size());
}

TrainedCity train_city(const TrainConfig& cfg, const std::vector<TransactionRecord>& train_records,
                       const std::vector<TransactionRecord>& val_records,
                       const GraphBundle& bundle, const Normalizer& normalizer,
                       std::ostream* log) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string& city = normalizer.city();
  if (train_records.empty()) {
    throw std::invalid_argument("train_city: no training records for city '" + city + "'");
  }
  for (const auto& r : train_records) {
    if (r.city != city) throw std::invalid_argument("train_city: record " + r.id + " is not from '" + city + "'");
  }

  ModelConfig mc = cfg.model;
  mc.d_e = int(normalizer.env_dim());
  mc.d_o = int(normalizer.obj_dim());
  Model model(mc, cfg.seed);

  // One store over train+val rows; graph contexts only ever reference
  // train-period ids, so validation rows are untouched during optimization.
  std::vector<TransactionRecord> store_records = train_records;
  store_records.insert(store_records.end(), val_records.begin(), val_records.end());
  const EncodedStore store = EncodedStore::build(store_records, normalizer);

  const GridIndex index = make_grid_index(train_records, cfg.graph.edge_radius_m);
  const HistoryView history = HistoryView::over(train_records, index);

  std::vector<TargetRef> train_refs;
  train_refs.reserve(train_records.size());
  for (const auto& rec : train_records) {
    train_refs.push_back(resolve_target(rec, make_neighbor_context(rec, bundle, history, cfg.graph), store));
  }
  std::vector<TargetRef> val_refs;
  val_refs.reserve(val_records.size());
  for (const auto& rec : val_records) {
    val_refs.push_back(resolve_target(rec, make_neighbor_context(rec, bundle, history, cfg.graph), store));
  }
  std::vector<double> val_truths_currency;
  for (const auto& rec : val_records) val_truths_currency.push_back(rec.unit_price);

  ad::Adam adam({cfg.lr});
  Rng shuffle_rng = Rng::stream(cfg.seed, 0x5u);

  TrainReport report;
  ParamSet best_params = model.params();
  double best_mape = std::numeric_limits<double>::infinity();
  int best_epoch = cfg.epochs - 1;

  std::vector<size_t> order(train_refs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    size_t loss_count = 0;
    const size_t batch_size = size_t(std::max(1, cfg.batch_size));
    for (size_t begin = 0, batch_index = 0; begin < order.size(); begin += batch_size, ++batch_index) {
      const size_t end = std::min(begin + batch_size, order.size());
      if (end - begin < 2) continue;  // batch-norm train mode needs >= 2 targets
      std::vector<TargetRef> batch_refs;
      std::vector<double> truths;
      batch_refs.reserve(end - begin);
      for (size_t i = begin; i < end; ++i) {
        batch_refs.push_back(train_refs[order[i]]);
        truths.push_back(train_refs[order[i]].truth_norm);
      }
      try {
        ad::Tape tape;
        const Model::Batch fwd = model.forward(tape, store, batch_refs, ad::Mode::kTrain);
        const ad::NodeId truth_node = tape.leaf(truths.size(), 1, truths);
        const ad::NodeId diff = tape.sub(fwd.p_hat, truth_node);
        const ad::NodeId loss = tape.mean(tape.mul(diff, diff));
        const double loss_value = tape.scalar(loss);
        if (!std::isfinite(loss_value)) throw std::runtime_error("loss is not finite");
        tape.backward(loss);
        model.params().zero_grads();
        model.accumulate_grads(tape, fwd);
        adam.step(model.params().trainable_tensors());
        loss_sum += loss_value * double(end - begin);
        loss_count += end - begin;
      } catch (const std::exception& e) {
        throw std::runtime_error("training aborted at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index) + " (city " + city + "): " + e.what());
      }
    }
    report.train_loss.push_back(loss_count ? loss_sum / double(loss_count)
                                           : std::numeric_limits<double>::quiet_NaN());

    double epoch_mape = std::numeric_limits<double>::quiet_NaN();
    if (!val_refs.empty()) {
      ad::Tape tape;
      const Model::Batch fwd = model.forward(tape, store, val_refs, ad::Mode::kEval);
      const auto& p_hat = tape.value(fwd.p_hat);
      std::vector<double> preds_currency(p_hat.size());
      for (size_t i = 0; i < p_hat.size(); ++i) {
        preds_currency[i] = normalizer.denormalize_price(p_hat[i]);
      }
      epoch_mape = mape(preds_currency, val_truths_currency);
      if (epoch_mape < best_mape) {
        best_mape = epoch_mape;
        best_epoch = epoch;
        best_params = model.params();
      }
    }
    report.val_mape.push_back(epoch_mape);
    if (log) {
      (*log) << "[" << city << "] epoch " << epoch << "  train_loss=" << report.train_loss.back()
             << "  val_mape=" << epoch_mape << "\n";
    }
  }

  if (!val_refs.empty()) model.params() = best_params;
  report.best_epoch = best_epoch;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  return TrainedCity{city, normalizer, std::move(model), std::move(report)};
}

}  // namespace regram
