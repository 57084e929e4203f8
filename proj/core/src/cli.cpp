#include "regram/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "regram/evaluate.hpp"
#include "regram/geojson.hpp"
#include "regram/graph.hpp"
#include "regram/model_io.hpp"
#include "regram/synth.hpp"
#include "regram/train.hpp"

namespace regram {

namespace {

using nlohmann::json;

// Every value a subcommand may need, bound to CLI11 options.
struct CliOptions {
  std::string config_path;
  std::string data_path;
  std::string graph_path;
  std::string model_path;
  std::string out_path;
  std::string city;
  std::string target;
  uint64_t seed = 0;
  int dm = 0;
  int kernels = 0;
  int heads = 0;
  double tau = 0.0;
  int epochs = 0;
  int batch = 0;
  double lr = 0.0;
  bool no_neighbors = false;
  bool no_community = false;
};

// True when `name` exists on this subcommand and was passed.
bool passed(const CLI::App* cmd, const std::string& name) {
  const CLI::Option* o = cmd->get_option_no_throw(name);
  return o != nullptr && o->count() > 0;
}

json read_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error("config file '" + path + "' is not valid JSON: " + e.what());
  }
  for (const auto& item : j.items()) {
    if (item.key() != "synth" && item.key() != "train") {
      throw std::runtime_error("config file has unknown top-level key '" + item.key() +
                               "' (expected \"synth\" and/or \"train\")");
    }
  }
  return j;
}

SynthConfig resolve_synth_config(const CLI::App* cmd, const CliOptions& opt) {
  const json file = read_config_file(opt.config_path);
  SynthConfig cfg;
  if (file.contains("synth")) {
    cfg = synth_config_from_json_string(file.at("synth").dump());
  }
  if (passed(cmd, "--seed")) cfg.seed = opt.seed;
  return cfg;
}

TrainConfig resolve_train_config(const CLI::App* cmd, const CliOptions& opt) {
  const json file = read_config_file(opt.config_path);
  TrainConfig cfg;
  if (file.contains("train")) {
    cfg = train_config_from_json_string(file.at("train").dump());
  }
  if (passed(cmd, "--seed")) cfg.seed = opt.seed;
  if (passed(cmd, "--dm")) cfg.model.d_m = opt.dm;
  if (passed(cmd, "--kernels")) cfg.model.kernels = opt.kernels;
  if (passed(cmd, "--heads")) cfg.model.heads = opt.heads;
  if (passed(cmd, "--tau")) cfg.model.tau = opt.tau;
  if (passed(cmd, "--epochs")) cfg.epochs = opt.epochs;
  if (passed(cmd, "--batch")) cfg.batch_size = opt.batch;
  if (passed(cmd, "--lr")) cfg.lr = opt.lr;
  if (opt.no_neighbors) {
    cfg.model.use_neighbor_relation = false;
    cfg.model.use_neighbor_price = false;
  }
  if (opt.no_community) cfg.model.use_community = false;
  return cfg;
}

void echo_config(std::ostream& out, const std::string& label, const std::string& json_text) {
  out << "resolved " << label << " config: " << json::parse(json_text).dump() << "\n";
}

std::vector<TransactionRecord> load_records(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open data file '" + path + "'");
  return parse_transactions(f, CsvSchema::default_schema());
}

std::vector<std::string> sorted_cities(const std::vector<TransactionRecord>& records) {
  std::set<std::string> names;
  for (const auto& r : records) names.insert(r.city);
  return {names.begin(), names.end()};
}

std::vector<TransactionRecord> city_records(const std::vector<TransactionRecord>& records,
                                            const std::string& city) {
  std::vector<TransactionRecord> out;
  for (const auto& r : records) {
    if (r.city == city) out.push_back(r);
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write output file '" + path + "'");
  f << text;
  f.flush();
  if (!f) throw std::runtime_error("write failed for output file '" + path + "'");
}

std::string latent_sidecar_path(std::string out_path) {
  const std::string suffix = ".csv";
  if (out_path.size() > suffix.size() &&
      out_path.compare(out_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    out_path.resize(out_path.size() - suffix.size());
  }
  return out_path + ".latent.json";
}

int cmd_gen_data(const CLI::App* cmd, const CliOptions& opt, std::ostream& out) {
  const SynthConfig cfg = resolve_synth_config(cmd, opt);
  echo_config(out, "synth", synth_config_to_json_string(cfg));
  SynthResult result = generate(cfg);
  std::ostringstream csv;
  write_transactions(csv, result.records, CsvSchema::default_schema());
  write_text_file(opt.out_path, csv.str());
  const std::string latent_path = latent_sidecar_path(opt.out_path);
  write_text_file(latent_path, latent_to_json_string(result.latent));
  out << "wrote " << result.records.size() << " records to " << opt.out_path << "\n";
  out << "wrote latent truth to " << latent_path << "\n";
  return 0;
}

int cmd_build_graph(const CLI::App* cmd, const CliOptions& opt, std::ostream& out) {
  const TrainConfig cfg = resolve_train_config(cmd, opt);
  const json full = json::parse(train_config_to_json_string(cfg));
  out << "resolved graph config: " << full.at("graph").dump() << "\n";

  const std::vector<TransactionRecord> records = load_records(opt.data_path);
  std::map<std::string, GraphBundle> bundles;
  for (const std::string& city : sorted_cities(records)) {
    if (!opt.city.empty() && city != opt.city) continue;
    const std::vector<TransactionRecord> recs = city_records(records, city);
    const Normalizer normalizer = Normalizer::fit(recs, city);
    const GridIndex index = make_grid_index(recs, cfg.graph.edge_radius_m + 1.0);
    bundles[city] = build_graph_bundle(recs, index, normalizer, cfg.graph);
    size_t edges = 0;
    for (const auto& [id, nbrs] : bundles[city].txn_adjacency) edges += nbrs.size();
    out << city << ": " << recs.size() << " records, " << edges / 2 << " transaction edges, "
        << bundles[city].communities.members.size() << " communities\n";
  }
  if (bundles.empty()) {
    throw std::runtime_error(opt.city.empty() ? "data file has no records"
                                              : "no records for city '" + opt.city + "'");
  }
  write_text_file(opt.out_path, bundles_to_json_string(bundles));
  out << "wrote graph bundle to " << opt.out_path << "\n";
  return 0;
}

// Shared by train and by eval's on-the-fly ablation baseline.
TrainedCity train_one_city(const TrainConfig& cfg, const std::vector<TransactionRecord>& recs,
                           const std::string& city, std::ostream* log) {
  const SplitResult split = chronological_split(recs, cfg.val_months, cfg.test_months);
  const Normalizer normalizer = Normalizer::fit(split.train, city);
  const GridIndex index = make_grid_index(split.train, cfg.graph.edge_radius_m + 1.0);
  const GraphBundle bundle = build_graph_bundle(split.train, index, normalizer, cfg.graph);
  return train_city(cfg, split.train, split.val, bundle, normalizer, log);
}

int cmd_train(const CLI::App* cmd, const CliOptions& opt, std::ostream& out) {
  const TrainConfig cfg = resolve_train_config(cmd, opt);
  echo_config(out, "train", train_config_to_json_string(cfg));

  const std::vector<TransactionRecord> records = load_records(opt.data_path);
  std::vector<std::string> cities = sorted_cities(records);
  if (!opt.city.empty()) {
    if (std::find(cities.begin(), cities.end(), opt.city) == cities.end()) {
      throw std::runtime_error("no records for city '" + opt.city + "'");
    }
    cities = {opt.city};
  }

  std::vector<TrainedCity> trained;
  std::map<std::string, GraphBundle> train_bundles;
  for (const std::string& city : cities) {
    const std::vector<TransactionRecord> recs = city_records(records, city);
    const SplitResult split = chronological_split(recs, cfg.val_months, cfg.test_months);
    const Normalizer normalizer = Normalizer::fit(split.train, city);
    const GridIndex index = make_grid_index(split.train, cfg.graph.edge_radius_m + 1.0);
    GraphBundle bundle = build_graph_bundle(split.train, index, normalizer, cfg.graph);
    TrainedCity tc = train_city(cfg, split.train, split.val, bundle, normalizer, &out);
    out << city << ": best epoch " << tc.report.best_epoch + 1 << "/" << cfg.epochs
        << ", final val MAPE "
        << (tc.report.best_epoch >= 0 && !tc.report.val_mape.empty()
                ? tc.report.val_mape[static_cast<size_t>(tc.report.best_epoch)]
                : 0.0)
        << "%, " << tc.report.wall_seconds << "s\n";
    trained.push_back(std::move(tc));
    if (!opt.graph_path.empty()) train_bundles[city] = std::move(bundle);
  }

  save_model(opt.out_path, cfg, trained);
  out << "wrote model to " << opt.out_path << "\n";
  if (!opt.graph_path.empty()) {
    write_text_file(opt.graph_path, bundles_to_json_string(train_bundles));
    out << "wrote training-split graph bundle to " << opt.graph_path << "\n";
  }
  return 0;
}

int cmd_eval(const CLI::App* cmd, const CliOptions& opt, std::ostream& out) {
  ModelFile mf = load_model(opt.model_path);
  TrainConfig cfg = mf.config;
  if (passed(cmd, "--seed")) cfg.seed = opt.seed;
  echo_config(out, "train", train_config_to_json_string(cfg));

  const std::vector<TransactionRecord> records = load_records(opt.data_path);

  std::vector<CityEvalData> cities;
  ModelPredictions regram{"ReGram", {}};
  ModelPredictions dnn{"DNN", {}};
  ModelPredictions knn{"KNN", {}};
  ModelPredictions lr{"LR", {}};

  bool matched_filter = false;
  for (CityModel& cm : mf.cities) {
    if (!opt.city.empty() && cm.city != opt.city) continue;
    matched_filter = true;
    const std::vector<TransactionRecord> recs = city_records(records, cm.city);
    if (recs.empty()) throw std::runtime_error("no records for city '" + cm.city + "'");
    const SplitResult split = chronological_split(recs, cfg.val_months, cfg.test_months);
    std::vector<TransactionRecord> history = split.train;
    history.insert(history.end(), split.val.begin(), split.val.end());

    CityEvalData data = build_city_eval_data(history, split.test, cm.normalizer, cfg.graph);
    regram.by_city[cm.city] = predict_regram(cm.model, data);
    knn.by_city[cm.city] = predict_knn(data);
    lr.by_city[cm.city] = predict_lr(data);

    // Feedforward baseline: the same trainer with every graph path disabled.
    TrainConfig dnn_cfg = cfg;
    dnn_cfg.model.use_neighbor_relation = false;
    dnn_cfg.model.use_neighbor_price = false;
    dnn_cfg.model.use_community = false;
    TrainedCity dnn_city = train_one_city(dnn_cfg, recs, cm.city, nullptr);
    dnn.by_city[cm.city] = predict_regram(dnn_city.model, data);

    cities.push_back(std::move(data));
  }
  if (!matched_filter) {
    throw std::runtime_error("model file has no city '" + opt.city + "'");
  }

  const EvalReport report = summarize(cities, {regram, dnn, knn, lr});
  out << report.to_table();
  write_text_file(opt.out_path, report.to_csv());
  out << "wrote evaluation report to " << opt.out_path << "\n";
  return 0;
}

struct AppraisalContext {
  TransactionRecord target;
  std::vector<TransactionRecord> history;  // same city, strictly earlier trades
  Prediction prediction;
};

AppraisalContext appraise_target(ModelFile& mf, const std::vector<TransactionRecord>& records,
                                 const std::string& target_id) {
  const TransactionRecord* target = nullptr;
  for (const auto& r : records) {
    if (r.id == target_id) {
      target = &r;
      break;
    }
  }
  if (!target) throw std::runtime_error("target id '" + target_id + "' not found in data");

  CityModel* cm = nullptr;
  for (CityModel& c : mf.cities) {
    if (c.city == target->city) {
      cm = &c;
      break;
    }
  }
  if (!cm) throw std::runtime_error("model file has no city '" + target->city + "'");

  AppraisalContext ctx;
  ctx.target = *target;
  for (const auto& r : records) {
    if (r.city == target->city && r.trade_date < target->trade_date && r.id != target->id) {
      ctx.history.push_back(r);
    }
  }

  const GraphConfig& gcfg = mf.config.graph;
  const GridIndex index = make_grid_index(ctx.history, gcfg.edge_radius_m + 1.0);
  const HistoryView view = HistoryView::over(ctx.history, index);
  const GraphBundle bundle = build_graph_bundle(ctx.history, index, cm->normalizer, gcfg);
  const NeighborContext nbr = make_neighbor_context(ctx.target, bundle, view, gcfg);

  std::vector<TransactionRecord> all = ctx.history;
  all.push_back(ctx.target);
  const EncodedStore store = EncodedStore::build(all, cm->normalizer);
  const TargetRef ref = resolve_target(ctx.target, nbr, store);
  ctx.prediction = cm->model.predict(store, ref);
  return ctx;
}

int cmd_appraise(const CliOptions& opt, std::ostream& out) {
  ModelFile mf = load_model(opt.model_path);
  echo_config(out, "train", train_config_to_json_string(mf.config));
  const std::vector<TransactionRecord> records = load_records(opt.data_path);
  AppraisalContext ctx = appraise_target(mf, records, opt.target);

  const Normalizer* norm = nullptr;
  for (const CityModel& c : mf.cities) {
    if (c.city == ctx.target.city) norm = &c.normalizer;
  }

  char buf[256];
  out << "target: " << ctx.target.id << " (" << ctx.target.city << ", trade date "
      << ctx.target.trade_date.to_string() << ")\n";
  std::snprintf(buf, sizeof(buf), "appraised unit price: %.2f\n",
                norm->denormalize_price(ctx.prediction.p_hat));
  out << buf;

  if (ctx.prediction.neighbor_attention.empty()) {
    out << "no transaction neighbors; preliminary neighbor appraisal defaults to the city "
           "mean price\n";
  } else {
    std::snprintf(buf, sizeof(buf), "preliminary neighbor appraisal: %.2f\n",
                  norm->denormalize_price(ctx.prediction.p_tilde));
    out << buf;
    double total = 0.0;
    for (const auto& [id, w] : ctx.prediction.neighbor_attention) total += w;
    std::snprintf(buf, sizeof(buf), "neighbors: %zu (attention total %.4f)\n",
                  ctx.prediction.neighbor_attention.size(), total);
    out << buf;
    std::vector<std::pair<std::string, double>> top = ctx.prediction.neighbor_attention;
    std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::unordered_map<std::string, const TransactionRecord*> by_id;
    for (const auto& r : ctx.history) by_id[r.id] = &r;
    const size_t show = std::min<size_t>(5, top.size());
    out << "top neighbors:\n";
    for (size_t i = 0; i < show; ++i) {
      const TransactionRecord& n = *by_id.at(top[i].first);
      std::snprintf(buf, sizeof(buf), "  %s  attention=%.4f  distance_m=%.1f\n",
                    top[i].first.c_str(), top[i].second,
                    distance_m(ctx.target.latitude, ctx.target.longitude, n.latitude,
                               n.longitude));
      out << buf;
    }
  }

  out << "kernel attention:";
  for (double w : ctx.prediction.kernel_attention) {
    std::snprintf(buf, sizeof(buf), " %.4f", w);
    out << buf;
  }
  out << "\n";
  return 0;
}

int cmd_export_geojson(const CliOptions& opt, std::ostream& out) {
  ModelFile mf = load_model(opt.model_path);
  echo_config(out, "train", train_config_to_json_string(mf.config));
  const std::vector<TransactionRecord> records = load_records(opt.data_path);
  AppraisalContext ctx = appraise_target(mf, records, opt.target);
  const std::string doc = case_study_geojson(ctx.target, ctx.prediction, ctx.history);
  write_text_file(opt.out_path, doc);
  const json parsed = json::parse(doc);
  out << "wrote " << parsed.at("features").size() << " features to " << opt.out_path << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"regram: graph-attention real-estate appraisal"};
  app.require_subcommand(0, 1);
  CliOptions opt;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "JSON config file (keys: synth, train)");
  };
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", opt.seed, "random seed override");
  };
  auto add_train_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--dm", opt.dm, "model width d_m");
    cmd->add_option("--kernels", opt.kernels, "kernel count K");
    cmd->add_option("--heads", opt.heads, "attention head count H");
    cmd->add_option("--tau", opt.tau, "softmax temperature");
    cmd->add_option("--epochs", opt.epochs, "training epochs");
    cmd->add_option("--batch", opt.batch, "minibatch size");
    cmd->add_option("--lr", opt.lr, "learning rate");
    cmd->add_flag("--no-neighbors", opt.no_neighbors,
                  "disable the neighbor relation and preliminary price paths");
    cmd->add_flag("--no-community", opt.no_community, "disable the community path");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic transaction dataset");
  add_config(gen);
  add_seed(gen);
  gen->add_option("--out", opt.out_path, "output CSV path")->required();

  CLI::App* graph = app.add_subcommand("build-graph", "build per-city graph bundles");
  add_config(graph);
  graph->add_option("--data", opt.data_path, "input transaction CSV")->required();
  graph->add_option("--out", opt.out_path, "output graph JSON path")->required();
  graph->add_option("--city", opt.city, "only this city");

  CLI::App* train = app.add_subcommand("train", "train per-city appraisal models");
  add_config(train);
  add_seed(train);
  add_train_overrides(train);
  train->add_option("--data", opt.data_path, "input transaction CSV")->required();
  train->add_option("--out", opt.out_path, "output model path")->required();
  train->add_option("--graph", opt.graph_path, "also write the training-split graph bundle here");
  train->add_option("--city", opt.city, "only this city");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a model against baselines");
  add_seed(eval);
  eval->add_option("--data", opt.data_path, "input transaction CSV")->required();
  eval->add_option("--model", opt.model_path, "trained model path")->required();
  eval->add_option("--out", opt.out_path, "output report CSV path")->required();
  eval->add_option("--city", opt.city, "only this city");

  CLI::App* appr = app.add_subcommand("appraise", "appraise one target transaction");
  appr->add_option("--data", opt.data_path, "input transaction CSV")->required();
  appr->add_option("--model", opt.model_path, "trained model path")->required();
  appr->add_option("--target", opt.target, "target transaction id")->required();

  CLI::App* geo = app.add_subcommand("export-geojson", "export a target's neighborhood map");
  geo->add_option("--data", opt.data_path, "input transaction CSV")->required();
  geo->add_option("--model", opt.model_path, "trained model path")->required();
  geo->add_option("--target", opt.target, "target transaction id")->required();
  geo->add_option("--out", opt.out_path, "output GeoJSON path")->required();

  std::vector<const char*> argv;
  argv.push_back("regram");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  if (app.get_subcommands().empty()) {
    err << app.help();
    err << "error: a subcommand is required\n";
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen, opt, out);
    if (graph->parsed()) return cmd_build_graph(graph, opt, out);
    if (train->parsed()) return cmd_train(train, opt, out);
    if (eval->parsed()) return cmd_eval(eval, opt, out);
    if (appr->parsed()) return cmd_appraise(opt, out);
    if (geo->parsed()) return cmd_export_geojson(opt, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << "error: unhandled subcommand\n";
  return 1;
}

}  // namespace regram
