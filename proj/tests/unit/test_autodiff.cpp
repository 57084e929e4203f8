#include "regram/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "regram/optimizer.hpp"
#include "regram/rng.hpp"
#include "regram/tensor.hpp"

namespace ad = regram::ad;
using regram::Tensor;

namespace {

Tensor random_tensor(size_t rows, size_t cols, regram::Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.data) {
    v = rng.uniform(lo, hi);
    // Keep clear of piecewise-activation kinks so finite differences stay valid.
    if (std::abs(v) < 0.05) v += (v >= 0 ? 0.1 : -0.1);
  }
  return t;
}

// Builds a scalar loss from the given leaves; used for both the analytic and
// the finite-difference evaluation.
using Builder = std::function<ad::NodeId(ad::Tape&, const std::vector<ad::NodeId>&)>;

double eval_loss(const std::vector<Tensor>& inputs, const Builder& build) {
  ad::Tape tape;
  std::vector<ad::NodeId> ids;
  for (const auto& t : inputs) ids.push_back(tape.leaf(t));
  return tape.scalar(build(tape, ids));
}

// Central-difference gradient check of every coordinate of every input.
void gradcheck(std::vector<Tensor> inputs, const Builder& build, double h = 1e-6,
               double tol = 1e-5) {
  ad::Tape tape;
  std::vector<ad::NodeId> ids;
  for (const auto& t : inputs) ids.push_back(tape.leaf(t));
  tape.backward(build(tape, ids));

  for (size_t i = 0; i < inputs.size(); ++i) {
    const auto& analytic = tape.grad(ids[i]);
    ASSERT_EQ(analytic.size(), inputs[i].data.size());
    for (size_t c = 0; c < inputs[i].data.size(); ++c) {
      const double saved = inputs[i].data[c];
      inputs[i].data[c] = saved + h;
      const double up = eval_loss(inputs, build);
      inputs[i].data[c] = saved - h;
      const double down = eval_loss(inputs, build);
      inputs[i].data[c] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double scale = std::max(1.0, std::abs(fd) + std::abs(analytic[c]));
      EXPECT_NEAR(analytic[c], fd, tol * scale) << "input " << i << " coord " << c;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- values --

TEST(TapeValues, MishFrozenPoints) {
  ad::Tape tape;
  const auto id = tape.mish(tape.leaf(Tensor::row({1.0, -1.0, 10.0})));
  const auto& v = tape.value(id);
  EXPECT_NEAR(v[0], 0.865098388267310, 1e-12);
  EXPECT_NEAR(v[1], -0.303401461374109, 1e-12);
  EXPECT_NEAR(v[2], 9.999999958780670, 1e-12);
}

TEST(TapeValues, LeakyReluSlope) {
  ad::Tape tape;
  const auto id = tape.leaky_relu(tape.leaf(Tensor::row({-2.0, 3.0})), 0.01);
  EXPECT_DOUBLE_EQ(tape.value(id)[0], -0.02);
  EXPECT_DOUBLE_EQ(tape.value(id)[1], 3.0);
}

TEST(TapeValues, SoftmaxTemperatureFrozenPair) {
  // softmax([30, 0] / tau=30) = [sigmoid(1), 1 - sigmoid(1)].
  ad::Tape tape;
  const auto id = tape.softmax_temperature(tape.leaf(Tensor::column({30.0, 0.0})), 30.0);
  const auto& v = tape.value(id);
  EXPECT_NEAR(v[0], 0.7310585786300049, 1e-12);
  EXPECT_NEAR(v[1], 0.2689414213699951, 1e-12);
  EXPECT_NEAR(v[0] + v[1], 1.0, 1e-15);
}

TEST(TapeValues, SegmentSoftmaxSumsToOnePerSegment) {
  regram::Rng rng(7);
  const Tensor logits = random_tensor(10, 2, rng, -5.0, 5.0);
  const ad::Segments segs = {{0, 3}, {3, 4}, {4, 10}};
  ad::Tape tape;
  const auto id = tape.segment_softmax_temperature(tape.leaf(logits), segs, 30.0);
  const auto& v = tape.value(id);
  for (size_t col = 0; col < 2; ++col) {
    for (const auto& [begin, end] : segs) {
      double sum = 0.0;
      for (size_t r = begin; r < end; ++r) sum += v[r * 2 + col];
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(TapeValues, MatmulMatchesManualComputation) {
  ad::Tape tape;
  Tensor a(2, 3);
  a.data = {1, 2, 3, 4, 5, 6};
  Tensor b(3, 2);
  b.data = {7, 8, 9, 10, 11, 12};
  const std::vector<double> v = tape.value(tape.matmul(tape.leaf(a), tape.leaf(b)));
  EXPECT_EQ(v, (std::vector<double>{58, 64, 139, 154}));

  // trans_b: a (2x3) x b' where b' is (4x3) transposed to (3x4).
  Tensor bt(4, 3);
  for (size_t i = 0; i < 12; ++i) bt.data[i] = double(i + 1);
  const ad::NodeId prod = tape.matmul(tape.leaf(a), tape.leaf(bt), false, true);
  const std::vector<double> vt = tape.value(prod);
  EXPECT_EQ(tape.shape(prod), (std::pair<size_t, size_t>{2, 4}));
  EXPECT_DOUBLE_EQ(vt[0], 1 * 1 + 2 * 2 + 3 * 3);
}

TEST(TapeValues, NonFiniteResultIsRejected) {
  ad::Tape tape;
  const auto big = tape.leaf(Tensor::row({1e308}));
  EXPECT_THROW(tape.add(big, big), std::runtime_error);
  EXPECT_THROW(tape.leaf(Tensor::row({std::nan("")})), std::runtime_error);
}

// ------------------------------------------------------------- batch norm --

TEST(BatchNorm, TrainModeNormalizesWithBiasedVariance) {
  std::vector<double> running_mean(1, 0.0), running_var(1, 1.0);
  ad::BnStats stats{&running_mean, &running_var};
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::column({-1.0, 1.0}));
  const auto gamma = tape.leaf(Tensor::row({1.0}));
  const auto beta = tape.leaf(Tensor::row({0.0}));
  const auto y = tape.batchnorm_1d(x, gamma, beta, stats, ad::Mode::kTrain);
  // (x - 0) / sqrt(1 + 1e-5) with the biased batch variance 1.
  EXPECT_NEAR(tape.value(y)[0], -0.9999950000374997, 1e-12);
  EXPECT_NEAR(tape.value(y)[1], 0.9999950000374997, 1e-12);
  // Running statistics: momentum 0.1, unbiased variance 2 for this batch.
  EXPECT_NEAR(running_mean[0], 0.0, 1e-15);
  EXPECT_NEAR(running_var[0], 0.9 * 1.0 + 0.1 * 2.0, 1e-12);
}

TEST(BatchNorm, EvalModeUsesRunningStatistics) {
  std::vector<double> running_mean(1, 3.0), running_var(1, 4.0);
  ad::BnStats stats{&running_mean, &running_var};
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::column({5.0}));
  const auto gamma = tape.leaf(Tensor::row({2.0}));
  const auto beta = tape.leaf(Tensor::row({0.5}));
  const auto y = tape.batchnorm_1d(x, gamma, beta, stats, ad::Mode::kEval);
  EXPECT_NEAR(tape.value(y)[0], 2.0 * (5.0 - 3.0) / std::sqrt(4.0 + 1e-5) + 0.5, 1e-12);
  // Eval never touches the running buffers.
  EXPECT_EQ(running_mean[0], 3.0);
  EXPECT_EQ(running_var[0], 4.0);
}

TEST(BatchNorm, TrainModeNeedsAtLeastTwoRows) {
  std::vector<double> running_mean(1, 0.0), running_var(1, 1.0);
  ad::BnStats stats{&running_mean, &running_var};
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::column({1.0}));
  const auto gamma = tape.leaf(Tensor::row({1.0}));
  const auto beta = tape.leaf(Tensor::row({0.0}));
  EXPECT_THROW(tape.batchnorm_1d(x, gamma, beta, stats, ad::Mode::kTrain), std::exception);
}

// -------------------------------------------------------------- gradients --

TEST(TapeGradients, ElementwiseAndScalingOps) {
  regram::Rng rng(31);
  gradcheck({random_tensor(3, 4, rng), random_tensor(3, 4, rng)},
            [](ad::Tape& t, const std::vector<ad::NodeId>& in) {
              return t.sum(t.mul(t.add(in[0], in[1]), t.sub(in[0], t.scale(in[1], 0.7))));
            });
}

TEST(TapeGradients, Activations) {
  regram::Rng rng(32);
  gradcheck({random_tensor(4, 3, rng, -2.0, 2.0)},
            [](ad::Tape& t, const std::vector<ad::NodeId>& in) {
              const auto m = t.mish(in[0]);
              const auto l = t.leaky_relu(in[0], 0.01);
              const auto r = t.relu(in[0]);
              const auto th = t.tanh(in[0]);
              return t.sum(t.add(t.add(m, l), t.mul(r, th)));
            });
}

TEST(TapeGradients, MatmulAllTransposeCombinations) {
  regram::Rng rng(33);
  const Tensor a = random_tensor(3, 4, rng);
  const Tensor b = random_tensor(4, 2, rng);
  const Tensor at = random_tensor(4, 3, rng);
  const Tensor bt = random_tensor(2, 4, rng);
  gradcheck({a, b}, [](ad::Tape& t, const std::vector<ad::NodeId>& in) {
    return t.sum(t.matmul(in[0], in[1]));
  });
  gradcheck({at, b}, [](ad::Tape& t, const std::vector<ad::NodeId>& in) {
    return t.sum(t.matmul(in[0], in[1], true, false));
  });
  gradcheck({a, bt}, [](ad::Tape& t, const std::vector<ad::NodeId>& in) {
    return t.sum(t.matmul(in[0], in[1], false, true));
  });
  gradcheck({at, bt}, [](ad::Tape& t, const std::vector<ad::NodeId>& in) {
    return t.sum(t.matmul(in[0], in[1], true, true));
  });
}

TEST(TapeGradients, ConcatenationAndGather) {
  regram::Rng rng(34);
  gradcheck({random_tensor(2, 3, rng), random_tensor(2, 2, rng), random_tensor(1, 5, rng)},
            [](ad::Tape& t, const std::vector<ad::NodeId>& in) {
              const auto h = t.hconcat({in[0], in[1]});       // (2 x 5)
              const auto v = t.vconcat({h, in[2]});           // (3 x 5)
              const auto g = t.gather_hconcat({{v, {0, 2, 2, 1}}, {v, {1, 1, 0, 2}}});  // (4 x 10)
              return t.sum(t.mish(g));
            });
}

TEST(TapeGradients, ReductionsAndWeightedSums) {
  regram::Rng rng(35);
  gradcheck({random_tensor(3, 4, rng), random_tensor(3, 4, rng)},
            [](ad::Tape& t, const std::vector<ad::NodeId>& in) {
              const auto rs = t.rowwise_sum(in[0]);               // (3 x 1)
              const auto m = t.mean(in[1]);                       // (1 x 1)
              const auto ws = t.weighted_sum(in[0], in[1]);       // (1 x 1)
              return t.add(t.add(t.sum(rs), m), ws);
            });
}

TEST(TapeGradients, SoftmaxFamilies) {
  regram::Rng rng(36);
  const ad::Segments segs = {{0, 2}, {2, 5}, {5, 6}};
  gradcheck({random_tensor(6, 1, rng, -3.0, 3.0), random_tensor(6, 2, rng),
             random_tensor(6, 2, rng, -3.0, 3.0)},
            [&segs](ad::Tape& t, const std::vector<ad::NodeId>& in) {
              const auto seg = t.segment_softmax_temperature(in[0], segs, 30.0);  // (6 x 1)
              const auto agg = t.segment_weighted_sum_rows(in[1], seg, segs);     // (3 x 2)
              const auto row = t.rowwise_softmax_temperature(in[2], 2.0);         // (6 x 2)
              const auto flat = t.softmax_temperature(in[0], 5.0);                // (6 x 1)
              return t.add(t.add(t.sum(t.mul(agg, agg)), t.sum(t.mul(row, in[1]))),
                           t.sum(t.mul(flat, flat)));
            });
}

TEST(TapeGradients, BatchNormTrainMode) {
  regram::Rng rng(37);
  std::vector<double> running_mean(3, 0.0), running_var(3, 1.0);
  ad::BnStats stats{&running_mean, &running_var};
  gradcheck({random_tensor(5, 3, rng, -2.0, 2.0), random_tensor(1, 3, rng, 0.5, 1.5),
             random_tensor(1, 3, rng)},
            [&stats](ad::Tape& t, const std::vector<ad::NodeId>& in) {
              const auto y = t.batchnorm_1d(in[0], in[1], in[2], stats, ad::Mode::kTrain);
              return t.sum(t.mul(y, y));
            },
            1e-6, 1e-4);
}

TEST(TapeGradients, ReusedNodeAccumulatesGradient) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::row({3.0}));
  const auto y = tape.add(x, x);  // dy/dx = 2
  tape.backward(tape.sum(y));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 2.0);
}

TEST(TapeGradients, UnreachedLeafHasZeroGradient) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::row({3.0}));
  const auto y = tape.leaf(Tensor::row({4.0}));
  tape.backward(tape.sum(tape.mul(x, x)));
  EXPECT_DOUBLE_EQ(tape.grad(y)[0], 0.0);
}

// ------------------------------------------------------------------- adam --

TEST(Adam, MatchesHandComputedSteps) {
  Tensor p(1, 2);
  p.data = {1.0, -2.0};
  p.ensure_grad();

  const ad::AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  ad::Adam adam(cfg);

  // Reference trace computed with the standard bias-corrected update.
  double m[2] = {0, 0}, v[2] = {0, 0};
  double ref[2] = {1.0, -2.0};
  const std::vector<std::vector<double>> grads = {{0.3, -0.1}, {-0.2, 0.4}};
  for (int step = 1; step <= 2; ++step) {
    for (int i = 0; i < 2; ++i) {
      const double g = grads[step - 1][i];
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g;
      const double mhat = m[i] / (1 - std::pow(cfg.beta1, step));
      const double vhat = v[i] / (1 - std::pow(cfg.beta2, step));
      ref[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p.grad = grads[step - 1];
    adam.step({&p});
  }
  EXPECT_NEAR(p.data[0], ref[0], 1e-15);
  EXPECT_NEAR(p.data[1], ref[1], 1e-15);
  EXPECT_EQ(adam.steps(), 2);
}

TEST(Adam, ZeroLearningRateLeavesParametersUntouched) {
  Tensor p(1, 2);
  p.data = {1.5, -0.5};
  p.ensure_grad();
  p.grad = {123.0, -456.0};
  ad::Adam adam({0.0});
  adam.step({&p});
  EXPECT_EQ(p.data[0], 1.5);
  EXPECT_EQ(p.data[1], -0.5);
}
