#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "adcbf/nn.hpp"

using namespace adcbf;
using nn::Activation;
using nn::Architecture;

namespace {

Architecture chain(int in, int out, std::vector<int> widths, Activation act, bool shortcuts) {
  Architecture a;
  a.input_dim = in;
  a.output_dim = out;
  a.hidden_widths = widths;
  a.activations.assign(widths.size(), act);
  a.shortcuts.assign(widths.size(), false);
  if (shortcuts) {
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) a.shortcuts[i] = widths[i] == widths[i + 1];
  }
  a.validate();
  return a;
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

Mat central_differences(const Architecture& a, const Vec& theta, const Vec& sigma, double h) {
  Mat J(a.output_dim, theta.size());
  for (Eigen::Index c = 0; c < theta.size(); ++c) {
    Vec tp = theta, tm = theta;
    tp[c] += h;
    tm[c] -= h;
    J.col(c) = (nn::forward(a, tp, sigma) - nn::forward(a, tm, sigma)) / (2.0 * h);
  }
  return J;
}

}  // namespace

TEST(Activation, TanhAtZero) {
  const auto out = nn::activation_eval(Activation::Tanh, Vec::Zero(1));
  ASSERT_EQ(out.value.size(), 2);
  EXPECT_DOUBLE_EQ(out.value[0], 0.0);
  EXPECT_DOUBLE_EQ(out.derivative[0], 1.0);
}

TEST(Activation, TanhReferenceValues) {
  const auto out = nn::activation_eval(Activation::Tanh, Vec::Constant(1, 0.5));
  EXPECT_NEAR(out.value[0], 0.46212, 5e-6);
  EXPECT_NEAR(out.derivative[0], 0.78645, 5e-6);
}

TEST(Activation, BiasSlotIsOneWithZeroDerivative) {
  for (auto act : {Activation::Tanh, Activation::Swish, Activation::Identity}) {
    const auto out = nn::activation_eval(act, Vec{{0.3, -2.0, 7.0}});
    ASSERT_EQ(out.value.size(), 4);
    EXPECT_EQ(out.value[3], 1.0);
    EXPECT_EQ(out.derivative[3], 0.0);
  }
}

TEST(Activation, UnknownTagRejected) { EXPECT_THROW(nn::parse_activation("relu6"), ConfigError); }

TEST(Forward, ZeroWeightsGiveZero) {
  const Architecture a = chain(1, 1, {}, Activation::Tanh, false);
  EXPECT_EQ(a.param_count(), 2u);
  EXPECT_EQ(nn::forward(a, Vec::Zero(2), Vec::Constant(1, 0.7))[0], 0.0);
}

TEST(Forward, OneHiddenUnitHandValue) {
  const Architecture a = chain(1, 1, {1}, Activation::Tanh, false);
  const Vec theta{{1.0, 0.0, 2.0, 0.1}};
  EXPECT_NEAR(nn::forward(a, theta, Vec::Constant(1, 0.5))[0], 1.0242343145200195, 1e-14);
}

TEST(Forward, IdentityActivationsMatchMatrixProduct) {
  std::mt19937_64 rng(7);
  const Architecture a = chain(3, 2, {4, 5}, Activation::Identity, false);
  const Vec theta = random_vec(rng, static_cast<Eigen::Index>(a.param_count()));
  const Vec sigma = random_vec(rng, 3);

  // Each layer as an augmented map [z; 1] -> [V^T z; 1].
  Mat product = Mat::Identity(4, 4);
  Eigen::Index off = 0;
  const std::vector<std::pair<int, int>> shapes{{4, 4}, {5, 5}, {6, 2}};
  for (auto [rows, cols] : shapes) {
    Mat V = Eigen::Map<const Mat>(theta.data() + off, rows, cols);
    off += rows * cols;
    Mat aug = Mat::Zero(cols + 1, rows);
    aug.topRows(cols) = V.transpose();
    aug(cols, rows - 1) = 1.0;
    product = (aug * product).eval();
  }
  Vec sa(4);
  sa << sigma, 1.0;
  const Vec expect = (product * sa).head(2);
  EXPECT_LT((nn::forward(a, theta, sigma) - expect).norm(), 1e-12);
}

TEST(Forward, DimensionMismatchNamesLayer) {
  const Architecture a = chain(2, 1, {3}, Activation::Tanh, false);
  EXPECT_THROW(nn::forward(a, Vec::Zero(3), Vec::Zero(2)), DimensionError);
  EXPECT_THROW(nn::forward(a, Vec::Zero(static_cast<Eigen::Index>(a.param_count())), Vec::Zero(3)), DimensionError);
}

TEST(Forward, Deterministic) {
  std::mt19937_64 rng(3);
  const Architecture a = Architecture::resnet(2, 2, 3, 5, Activation::Tanh);
  const Vec theta = random_vec(rng, static_cast<Eigen::Index>(a.param_count()));
  const Vec s{{0.3, -0.4}};
  const Vec y1 = nn::forward(a, theta, s);
  const Vec y2 = nn::forward(a, theta, s);
  EXPECT_EQ(std::memcmp(y1.data(), y2.data(), sizeof(double) * 2), 0);
}

TEST(Architecture, ScenarioParameterCounts) {
  EXPECT_EQ(Architecture::resnet(1, 1, 2, 6, Activation::Tanh).param_count(), 61u);
  EXPECT_EQ(Architecture::resnet(2, 2, 3, 5, Activation::Tanh).param_count(), 87u);
}

TEST(Architecture, FlattenRoundTrip) {
  std::mt19937_64 rng(11);
  const Architecture a = Architecture::resnet(2, 3, 2, 4, Activation::Swish);
  const Vec theta = random_vec(rng, static_cast<Eigen::Index>(a.param_count()));
  EXPECT_EQ(nn::flatten(a, nn::unflatten(a, theta)), theta);
  EXPECT_EQ(nn::layer_matrix(a, theta, 0).rows(), 3);
  EXPECT_EQ(nn::layer_matrix(a, theta, 0).cols(), 4);
  EXPECT_EQ(nn::layer_matrix(a, theta, 0)(1, 0), theta[1]);
}

TEST(Jacobian, ZeroInputSingleLayerOnlyBiasColumns) {
  const Architecture a = chain(3, 2, {}, Activation::Identity, false);
  std::mt19937_64 rng(1);
  const Vec theta = random_vec(rng, static_cast<Eigen::Index>(a.param_count()));
  const Mat J = nn::jacobian_weights(a, theta, Vec::Zero(3));
  Mat expect = Mat::Zero(2, 8);
  expect(0, 3) = 1.0;
  expect(1, 7) = 1.0;
  EXPECT_EQ(J, expect);
}

TEST(Jacobian, MatchesFiniteDifferencesSmallNet) {
  std::mt19937_64 rng(5);
  const Architecture a = chain(2, 2, {3}, Activation::Tanh, false);
  const Vec theta = random_vec(rng, static_cast<Eigen::Index>(a.param_count()));
  const Vec sigma = random_vec(rng, 2);
  const Mat J = nn::jacobian_weights(a, theta, sigma);
  const Mat F = central_differences(a, theta, sigma, 1e-6);
  EXPECT_LT((J - F).cwiseAbs().maxCoeff() / std::max(1.0, F.cwiseAbs().maxCoeff()), 1e-6);
}

TEST(Jacobian, MatchesFiniteDifferencesRandomArchitectures) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 4), depth(0, 3);
  const Activation acts[] = {Activation::Tanh, Activation::Swish, Activation::Identity};
  for (int trial = 0; trial < 100; ++trial) {
    const int d = depth(rng);
    const int w = dim(rng);
    Architecture a = d == 0 ? chain(dim(rng), dim(rng), {}, Activation::Tanh, false)
                            : Architecture::resnet(dim(rng), dim(rng), d, w, acts[trial % 3]);
    const Vec theta = random_vec(rng, static_cast<Eigen::Index>(a.param_count()), 0.7);
    const Vec sigma = random_vec(rng, a.input_dim);
    const Mat J = nn::jacobian_weights(a, theta, sigma);
    const Mat F = central_differences(a, theta, sigma, 1e-6);
    const double rel = (J - F).norm() / std::max(1.0, F.norm());
    EXPECT_LT(rel, 1e-5) << "trial " << trial;
  }
}

TEST(Jacobian, SaturatedUpstreamLayerHasVanishingColumns) {
  const Architecture a = chain(1, 1, {2}, Activation::Tanh, false);
  // Pre-activations of +-50 saturate tanh.
  const Vec theta{{100.0, 0.0, -100.0, 0.0, 0.7, -0.3, 0.2}};
  const Vec sigma = Vec::Constant(1, 0.5);
  const Mat J = nn::jacobian_weights(a, theta, sigma);
  const Mat F = central_differences(a, theta, sigma, 1e-6);
  EXPECT_LT(J.leftCols(4).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(F.leftCols(4).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_GT(J.rightCols(3).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Jacobian, TaylorRemainderIsQuadratic) {
  std::mt19937_64 rng(9);
  const Architecture a = Architecture::resnet(2, 2, 2, 4, Activation::Tanh);
  const Vec theta = random_vec(rng, static_cast<Eigen::Index>(a.param_count()), 0.5);
  const Vec sigma{{0.4, -0.8}};
  const Vec dir = random_vec(rng, theta.size()).normalized();
  const auto ev = nn::evaluate(a, theta, sigma);
  auto remainder = [&](double eps) {
    const Vec d = eps * dir;
    return (nn::forward(a, theta + d, sigma) - ev.value - ev.jacobian * d).norm();
  };
  const double ratio = remainder(1e-2) / remainder(5e-3);
  EXPECT_NEAR(ratio, 4.0, 0.2);
}

TEST(Weights, SeededDrawIsReproducible) {
  const Architecture a = Architecture::resnet(1, 1, 2, 6, Activation::Tanh);
  std::mt19937_64 r1(42), r2(42);
  EXPECT_EQ(nn::random_weights(a, 3.0, r1), nn::random_weights(a, 3.0, r2));
}
