#include <benchmark/benchmark.h>

#include <vector>

#include "regram/autodiff.hpp"
#include "regram/encoding.hpp"
#include "regram/graph.hpp"
#include "regram/model.hpp"
#include "regram/synth.hpp"

namespace {

struct Fixture {
  std::vector<regram::TransactionRecord> records;
  regram::Normalizer normalizer{};
  regram::EncodedStore store;
  std::vector<regram::TargetRef> targets;  // one batch worth

  Fixture() {
    regram::SynthConfig cfg;
    cfg.cities = 1;
    cfg.buildings_per_city = 120;
    cfg.seed = 12;
    records = regram::generate(cfg).records;
    normalizer = regram::Normalizer::fit(records, records.front().city);
    store = regram::EncodedStore::build(records, normalizer);
    const auto index = regram::make_grid_index(records, 501.0);
    const auto bundle = regram::build_graph_bundle(records, index, normalizer);
    const auto history = regram::HistoryView::over(records, index);
    for (size_t i = records.size() - 64; i < records.size(); ++i) {
      const auto ctx = regram::make_neighbor_context(records[i], bundle, history);
      targets.push_back(regram::resolve_target(records[i], ctx, store));
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

regram::Model make_model(const Fixture& f, int d_m) {
  regram::ModelConfig mc;
  mc.d_m = d_m;
  mc.kernels = 4;
  mc.heads = 2;
  mc.d_e = int(f.store.d_e);
  mc.d_o = int(f.store.d_o);
  return regram::Model(mc, 1);
}

void BM_ForwardEval(benchmark::State& state) {
  const auto& f = fixture();
  auto model = make_model(f, int(state.range(0)));
  for (auto _ : state) {
    regram::ad::Tape tape;
    auto batch = model.forward(tape, f.store, f.targets, regram::ad::Mode::kEval);
    benchmark::DoNotOptimize(tape.value(batch.p_hat).data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(f.targets.size()));
}
BENCHMARK(BM_ForwardEval)->Arg(16)->Arg(32);

void BM_ForwardBackwardTrain(benchmark::State& state) {
  const auto& f = fixture();
  auto model = make_model(f, int(state.range(0)));
  std::vector<double> truths;
  for (const auto& t : f.targets) truths.push_back(t.truth_norm);
  for (auto _ : state) {
    regram::ad::Tape tape;
    auto batch = model.forward(tape, f.store, f.targets, regram::ad::Mode::kTrain);
    const auto truth = tape.leaf(truths.size(), 1, truths);
    const auto diff = tape.sub(batch.p_hat, truth);
    const auto loss = tape.mean(tape.mul(diff, diff));
    tape.backward(loss);
    model.params().zero_grads();
    model.accumulate_grads(tape, batch);
    benchmark::DoNotOptimize(tape.scalar(loss));
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(f.targets.size()));
}
BENCHMARK(BM_ForwardBackwardTrain)->Arg(16)->Arg(32);

void BM_PredictSingle(benchmark::State& state) {
  const auto& f = fixture();
  auto model = make_model(f, 32);
  size_t i = 0;
  for (auto _ : state) {
    const auto& target = f.targets[i++ % f.targets.size()];
    auto pred = model.predict(f.store, target);
    benchmark::DoNotOptimize(pred.p_hat);
  }
}
BENCHMARK(BM_PredictSingle);

}  // namespace
