#include <benchmark/benchmark.h>

#include <vector>

#include "regram/autodiff.hpp"
#include "regram/rng.hpp"
#include "regram/tensor.hpp"

namespace {

regram::Tensor random_tensor(size_t rows, size_t cols, uint64_t seed) {
  regram::Rng rng(seed);
  regram::Tensor t(rows, cols);
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const size_t n = size_t(state.range(0));
  const regram::Tensor a = random_tensor(n, n, 1);
  const regram::Tensor b = random_tensor(n, n, 2);
  for (auto _ : state) {
    regram::ad::Tape tape;
    const auto id = tape.matmul(tape.leaf(a), tape.leaf(b));
    benchmark::DoNotOptimize(tape.value(id).data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_Mish(benchmark::State& state) {
  const size_t n = size_t(state.range(0));
  const regram::Tensor a = random_tensor(n, 1, 3);
  for (auto _ : state) {
    regram::ad::Tape tape;
    const auto id = tape.mish(tape.leaf(a));
    benchmark::DoNotOptimize(tape.value(id).data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(n));
}
BENCHMARK(BM_Mish)->Arg(1024)->Arg(16384);

void BM_SegmentSoftmax(benchmark::State& state) {
  const size_t segments = size_t(state.range(0));
  const size_t per_segment = 16;
  const regram::Tensor logits = random_tensor(segments * per_segment, 1, 4);
  regram::ad::Segments segs;
  for (size_t s = 0; s < segments; ++s) segs.emplace_back(s * per_segment, (s + 1) * per_segment);
  for (auto _ : state) {
    regram::ad::Tape tape;
    const auto id = tape.segment_softmax_temperature(tape.leaf(logits), segs, 30.0);
    benchmark::DoNotOptimize(tape.value(id).data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(segments * per_segment));
}
BENCHMARK(BM_SegmentSoftmax)->Arg(16)->Arg(256);

// One small dense block forward plus full reverse sweep — the shape of work a
// training step is made of.
void BM_ForwardBackward(benchmark::State& state) {
  const size_t batch = 64, d_in = 32, d_hidden = 64;
  const regram::Tensor x = random_tensor(batch, d_in, 5);
  const regram::Tensor w1 = random_tensor(d_in, d_hidden, 6);
  const regram::Tensor w2 = random_tensor(d_hidden, 1, 7);
  for (auto _ : state) {
    regram::ad::Tape tape;
    const auto xid = tape.leaf(x);
    const auto h = tape.mish(tape.matmul(xid, tape.leaf(w1)));
    const auto y = tape.matmul(h, tape.leaf(w2));
    const auto loss = tape.mean(tape.mul(y, y));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(xid).data());
  }
}
BENCHMARK(BM_ForwardBackward);

}  // namespace
