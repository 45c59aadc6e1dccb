#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "../support/oracle.hpp"
#include "robustfl/error.hpp"
#include "robustfl/mlp.hpp"

using namespace robustfl;

namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Relative error with absolute comparison for entries below 1e-8.
double max_relative_error(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double scale = std::max(std::abs(a[k]), std::abs(b[k]));
    const double diff = std::abs(a[k] - b[k]);
    worst = std::max(worst, scale < 1e-8 ? diff : diff / scale);
  }
  return worst;
}

}  // namespace

TEST(Architecture, ParamCountMatchesLayout) {
  const MlpArchitecture arch = default_architecture(16, 4);
  EXPECT_EQ(arch.param_count(), 16u * 64 + 64 + 64 * 32 + 32 + 32 * 4 + 4);
  EXPECT_EQ(arch.projection_dim(), 32u);
  const auto layout = parameter_layout(arch);
  ASSERT_EQ(layout.size(), 3u);
  EXPECT_EQ(layout[0].weights_offset, 0u);
  EXPECT_EQ(layout[0].biases_offset, 16u * 64);
  EXPECT_EQ(layout[1].weights_offset, 16u * 64 + 64);
  EXPECT_EQ(layout[2].biases_offset + layout[2].out_dim, arch.param_count());
}

TEST(Architecture, RejectsZeroDims) {
  EXPECT_THROW((MlpArchitecture{0, {4}, 2}.validate()), ConfigError);
  EXPECT_THROW((MlpArchitecture{3, {}, 2}.validate()), ConfigError);
  EXPECT_THROW((MlpArchitecture{3, {4, 0}, 2}.validate()), ConfigError);
  EXPECT_THROW((ModelParams{MlpArchitecture{1, {1}, 1}, {1.0}}.validate()), ConfigError);
}

TEST(Layout, FlattenUnflattenRoundTripIsExact) {
  Rng rng(3);
  for (const MlpArchitecture& arch : {default_architecture(5, 3), MlpArchitecture{2, {3, 4, 2}, 5}}) {
    const ModelParams m = oracle::random_model(arch, rng);
    const ModelParams back = flatten(arch, unflatten(m));
    EXPECT_EQ(back.theta, m.theta);
  }
}

TEST(Layout, WeightIndexingIsRowMajorInByOut) {
  // 2 -> [3] -> 1; weight (i, o) of layer 0 sits at i * 3 + o.
  ModelParams m = ModelParams::zeros({2, {3}, 1});
  m.theta[1 * 3 + 2] = 0.5;  // input 1 -> hidden 2
  const auto layers = unflatten(m);
  EXPECT_EQ(layers[0].weights(1, 2), 0.5);
  const Matrix h = project(m, Matrix(1, 2, std::vector<double>{0.0, 2.0}));
  EXPECT_DOUBLE_EQ(h(0, 2), std::tanh(1.0));
  EXPECT_DOUBLE_EQ(h(0, 0), 0.0);
}

TEST(Forward, ZeroModelGivesZeroLogits) {
  const ModelParams m = ModelParams::zeros(default_architecture(6, 4));
  Rng rng(1);
  Matrix x(5, 6);
  for (double& v : x.values()) v = rng.normal();
  const ForwardResult r = forward(m, x);
  EXPECT_EQ(r.logits.rows(), 5u);
  EXPECT_EQ(r.logits.cols(), 4u);
  EXPECT_EQ(max_abs(r.logits.values()), 0.0);
}

TEST(Forward, ScalarNetworkHandEvaluation) {
  // 1 -> [1] -> 1 with w = 1, b = 0 everywhere: logit = 1 * tanh(2 * 1 + 0) + 0.
  const ModelParams m{{1, {1}, 1}, {1.0, 0.0, 1.0, 0.0}};
  const ForwardResult r = forward(m, Matrix(1, 1, 2.0));
  EXPECT_DOUBLE_EQ(r.logits(0, 0), 0.9640275800758169);
}

TEST(Forward, BatchShapeAndDimensionCheck) {
  const ModelParams m = ModelParams::zeros({4, {3}, 2});
  EXPECT_EQ(forward(m, Matrix(3, 4)).logits.rows(), 3u);
  EXPECT_THROW(forward(m, Matrix(3, 5)), ConfigError);
  EXPECT_THROW(project(m, Matrix(1, 3)), ConfigError);
}

TEST(Project, ZeroModelProjectsToTanhZero) {
  const ModelParams m = ModelParams::zeros({3, {5, 8}, 2});
  Matrix x(4, 3, 1.5);
  const Matrix p = project(m, x);
  EXPECT_EQ(p.rows(), 4u);
  EXPECT_EQ(p.cols(), 8u);
  EXPECT_EQ(max_abs(p.values()), 0.0);
}

TEST(Project, FinalAffineReproducesLogits) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const MlpArchitecture arch{3 + rng.below(4), {2 + rng.below(6), 2 + rng.below(6)}, 2 + rng.below(3)};
    const ModelParams m = oracle::random_model(arch, rng);
    const LabeledBatch b = oracle::random_batch(1 + rng.below(6), arch, rng);
    const Matrix direct = forward(m, b.inputs).logits;
    const Matrix composed = output_layer(m, project(m, b.inputs));
    for (std::size_t k = 0; k < direct.size(); ++k) {
      EXPECT_NEAR(direct.values()[k], composed.values()[k], 1e-12);
    }
  }
}

TEST(Project, DummyShape) {
  const ModelParams m = ModelParams::zeros({5, {6, 8}, 3});
  EXPECT_EQ(project(m, Matrix(4, 5)).rows(), 4u);
  EXPECT_EQ(project(m, Matrix(4, 5)).cols(), 8u);
}

TEST(CrossEntropy, UniformLogits) {
  const Matrix z(1, 4, 0.3);
  const std::vector<std::size_t> y{2};
  EXPECT_NEAR(cross_entropy(z, y), 1.3862943611198906, 1e-12);
}

TEST(CrossEntropy, ConfidentCorrectPrediction) {
  const Matrix z(1, 2, std::vector<double>{10.0, -10.0});
  const std::vector<std::size_t> y{0};
  // log1p(e^-20)
  EXPECT_NEAR(cross_entropy(z, y), 2.0611536203143808e-09, 1e-20);
}

TEST(CrossEntropy, DuplicatedRowsAndPermutationInvariance) {
  const Matrix one(1, 3, std::vector<double>{0.2, -1.0, 0.7});
  const Matrix two(2, 3, std::vector<double>{0.2, -1.0, 0.7, 0.2, -1.0, 0.7});
  const std::vector<std::size_t> y1{1};
  const std::vector<std::size_t> y2{1, 1};
  EXPECT_DOUBLE_EQ(cross_entropy(one, y1), cross_entropy(two, y2));

  Rng rng(5);
  const MlpArchitecture arch{4, {5}, 3};
  const ModelParams m = oracle::random_model(arch, rng);
  LabeledBatch b = oracle::random_batch(7, arch, rng);
  const double before = batch_loss(m, b);
  std::vector<std::size_t> order(7);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::reverse(order.begin(), order.end());
  EXPECT_NEAR(batch_loss(m, gather(b, order)), before, 1e-14);
  EXPECT_GE(before, 0.0);
}

TEST(CrossEntropy, StableForHugeLogits) {
  const Matrix z(1, 3, std::vector<double>{1e6, -1e6, 5e5});
  const std::vector<std::size_t> y{1};
  EXPECT_NEAR(cross_entropy(z, y), 2e6, 1e-3);
}

TEST(CrossEntropy, Errors) {
  const Matrix z(2, 3);
  const std::vector<std::size_t> bad{0, 3};
  const std::vector<std::size_t> short_labels{0};
  EXPECT_THROW(cross_entropy(z, bad), InputError);
  EXPECT_THROW(cross_entropy(z, short_labels), ConfigError);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const MlpArchitecture arch{2 + rng.below(4), {2 + rng.below(5), 2 + rng.below(5)}, 2 + rng.below(3)};
    const ModelParams m = oracle::random_model(arch, rng, 0.7);
    const LabeledBatch b = oracle::random_batch(1 + rng.below(8), arch, rng);
    const std::vector<double> analytic = backward(m, b);
    const std::vector<double> numeric = oracle::finite_difference_gradient(m, b, 1e-5);
    EXPECT_LT(max_relative_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(Backward, DuplicatedBatchGivesSameGradient) {
  Rng rng(8);
  const MlpArchitecture arch{3, {4, 3}, 3};
  const ModelParams m = oracle::random_model(arch, rng);
  const LabeledBatch b = oracle::random_batch(5, arch, rng);
  const std::vector<std::size_t> twice{0, 0, 1, 1, 2, 2, 3, 3, 4, 4};
  const auto g1 = backward(m, b);
  const auto g2 = backward(m, gather(b, twice));
  for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_NEAR(g1[k], g2[k], 1e-14);
}

TEST(Backward, SaturatedFitHasVanishingGradient) {
  // Zero weights, output biases (+50, -50): softmax puts ~1 - e^-100 on class 0.
  ModelParams m = ModelParams::zeros({2, {3}, 2});
  const auto out = parameter_layout(m.arch).back();
  m.theta[out.biases_offset] = 50.0;
  m.theta[out.biases_offset + 1] = -50.0;
  const LabeledBatch b{Matrix(1, 2, std::vector<double>{0.3, -0.2}), {0}};
  const auto g = backward(m, b);
  double norm = 0.0;
  for (double v : g) norm += v * v;
  EXPECT_LT(std::sqrt(norm), 1e-6);
}

TEST(Backward, DimensionErrors) {
  const ModelParams m = ModelParams::zeros({2, {3}, 2});
  EXPECT_THROW(backward(m, LabeledBatch{Matrix(2, 3), {0, 1}}), ConfigError);
  EXPECT_THROW(backward(m, LabeledBatch{Matrix(2, 2), {0}}), ConfigError);
  EXPECT_THROW(backward(m, LabeledBatch{Matrix(1, 2), {2}}), InputError);
}

TEST(Sgd, HandArithmetic) {
  // Treat a 2-parameter vector through a generic ModelParams; only theta matters.
  ModelParams m{{1, {1}, 1}, {1.0, 2.0, 0.0, 0.0}};
  const std::vector<double> g{1.0, -1.0, 0.0, 0.0};
  const ModelParams next = sgd_step(m, g, 0.5);
  EXPECT_EQ(next.theta[0], 0.5);
  EXPECT_EQ(next.theta[1], 2.5);
}

TEST(Sgd, ZeroRateAndLinearity) {
  Rng rng(4);
  const MlpArchitecture arch{3, {4}, 2};
  const ModelParams m = oracle::random_model(arch, rng);
  std::vector<double> g(arch.param_count());
  for (double& v : g) v = rng.normal();
  EXPECT_EQ(sgd_step(m, g, 0.0).theta, m.theta);
  const ModelParams twice = sgd_step(sgd_step(m, g, 0.1), g, 0.1);
  const ModelParams once = sgd_step(m, g, 0.2);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(twice.theta[k], once.theta[k], 1e-14);
  EXPECT_THROW(sgd_step(m, std::vector<double>(3), 0.1), ConfigError);
  EXPECT_THROW(sgd_step(m, g, -0.1), ConfigError);
}

TEST(Init, GlorotBoundsAndZeroBiases) {
  Rng rng(9);
  const MlpArchitecture arch = default_architecture(16, 4);
  const ModelParams m = glorot_init(arch, rng);
  for (const LayerSlice& s : parameter_layout(arch)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
    for (std::size_t k = 0; k < s.in_dim * s.out_dim; ++k) {
      EXPECT_LE(std::abs(m.theta[s.weights_offset + k]), limit);
    }
    for (std::size_t o = 0; o < s.out_dim; ++o) EXPECT_EQ(m.theta[s.biases_offset + o], 0.0);
  }
  Rng again(9);
  EXPECT_EQ(glorot_init(arch, again).theta, m.theta);
}
