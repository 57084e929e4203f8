#include <benchmark/benchmark.h>

#include <vector>

#include "regram/encoding.hpp"
#include "regram/geo.hpp"
#include "regram/graph.hpp"
#include "regram/synth.hpp"

namespace {

const std::vector<regram::TransactionRecord>& city_records() {
  static const std::vector<regram::TransactionRecord> records = [] {
    regram::SynthConfig cfg;
    cfg.cities = 1;
    cfg.buildings_per_city = 200;
    cfg.seed = 11;
    return regram::generate(cfg).records;
  }();
  return records;
}

void BM_DistanceM(benchmark::State& state) {
  double lat = 24.0, lon = 120.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(regram::distance_m(lat, lon, lat + 0.003, lon - 0.002));
    lat += 1e-9;
  }
}
BENCHMARK(BM_DistanceM);

void BM_GridIndexBuild(benchmark::State& state) {
  const auto& records = city_records();
  for (auto _ : state) {
    auto index = regram::make_grid_index(records, 501.0);
    benchmark::DoNotOptimize(index.size());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(records.size()));
}
BENCHMARK(BM_GridIndexBuild);

void BM_RadiusQuery(benchmark::State& state) {
  const auto& records = city_records();
  const auto index = regram::make_grid_index(records, 501.0);
  size_t i = 0;
  for (auto _ : state) {
    const auto& rec = records[i++ % records.size()];
    auto hits = index.radius_query(rec.latitude, rec.longitude, 500.0, &rec.id);
    benchmark::DoNotOptimize(hits.size());
  }
}
BENCHMARK(BM_RadiusQuery);

void BM_BuildGraphBundle(benchmark::State& state) {
  const auto& records = city_records();
  const auto normalizer = regram::Normalizer::fit(records, records.front().city);
  const auto index = regram::make_grid_index(records, 501.0);
  for (auto _ : state) {
    auto bundle = regram::build_graph_bundle(records, index, normalizer);
    benchmark::DoNotOptimize(bundle.txn_adjacency.size());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(records.size()));
}
BENCHMARK(BM_BuildGraphBundle);

void BM_NeighborContext(benchmark::State& state) {
  const auto& records = city_records();
  const auto normalizer = regram::Normalizer::fit(records, records.front().city);
  const auto index = regram::make_grid_index(records, 501.0);
  const auto bundle = regram::build_graph_bundle(records, index, normalizer);
  const auto history = regram::HistoryView::over(records, index);
  size_t i = 0;
  for (auto _ : state) {
    const auto& rec = records[i++ % records.size()];
    auto ctx = regram::make_neighbor_context(rec, bundle, history);
    benchmark::DoNotOptimize(ctx.txn_neighbors.size());
  }
}
BENCHMARK(BM_NeighborContext);

}  // namespace
