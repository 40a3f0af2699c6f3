#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "adcbf/identifier.hpp"

using namespace adcbf;
using namespace adcbf::ident;

namespace {

GainConfig paper_gains() {
  GainConfig g;
  g.k_x = 5.0;
  g.k_f = 10.0;
  return g;
}

/// Time at which the estimator error dynamics x~' = f~ - k_x x~, f~' = -k_f f~ - x~
/// (constant f, x~(0) = 0, f~(0) = f) first satisfy |f~| < tol |f|.
double reference_decay_time(double k_x, double k_f, double tol, double h) {
  double xt = 0.0, ft = 1.0, t = 0.0;
  while (std::abs(ft) >= tol) {
    const double dx = ft - k_x * xt;
    const double df = -k_f * ft - xt;
    xt += h * dx;
    ft += h * df;
    t += h;
  }
  return t;
}

}  // namespace

TEST(Estimator, ZeroErrorTracksExactly) {
  const GainConfig g = paper_gains();
  const Vec f{{0.5, -1.25}};
  const Vec x0{{1.0, 2.0}};
  const double dt = 0.01;
  auto s = estimator_start(x0, x0, f, g);
  const Mat g0 = Mat::Zero(2, 1);
  const Vec u = Vec::Zero(1);
  for (int k = 0; k < 200; ++k) {
    const Vec x = x0 + f * (k * dt);
    s = estimator_step(s, x, u, g0, dt, g, k);
    EXPECT_LT((s.f_hat - f).norm(), 1e-12);
    EXPECT_LT((s.x_hat - (x0 + f * ((k + 1) * dt))).norm(), 1e-12);
  }
}

TEST(Estimator, DecayTimeMatchesReferenceIntegration) {
  const GainConfig g = paper_gains();
  const double t_ref = reference_decay_time(g.k_x, g.k_f, 1e-3, 1e-4);
  EXPECT_NEAR(t_ref, 0.596, 0.002);

  const Vec f{{3.0}};
  const double dt = 1e-4;
  Vec x = Vec::Zero(1);
  auto s = estimator_start(x, x, Vec::Zero(1), g);
  const Mat g0 = Mat::Zero(1, 1);
  double t = 0.0;
  for (int k = 0; k < 20000; ++k) {
    s = estimator_step(s, x, Vec::Zero(1), g0, dt, g, k);
    if ((s.f_hat - f).norm() < 1e-3 * f.norm()) break;
    x += dt * f;
    t += dt;
  }
  EXPECT_LT(t, 0.60);
  EXPECT_NEAR(t, t_ref, 0.01);
}

TEST(Estimator, FirstEulerStepFromError) {
  const GainConfig g = paper_gains();
  const Vec x{{1.0, -1.0}};
  const Vec x_hat{{0.5, 0.0}};
  const Mat gm{{2.0}, {1.0}};
  const Vec u{{0.3}};
  const double dt = 0.01;
  auto s = estimator_start(x, x_hat, Vec::Zero(2), g);
  s = estimator_step(s, x, u, gm, dt, g);
  const Vec e = x - x_hat;
  EXPECT_LT((s.x_hat - (x_hat + dt * (gm * u + g.k_x * e))).norm(), 1e-15);
  EXPECT_LT(s.f_hat.norm(), 1e-15);
}

TEST(Estimator, ResetZeroesError) {
  const GainConfig g = paper_gains();
  auto s = estimator_start(Vec{{1.0}}, Vec{{0.0}}, Vec{{2.0}}, g);
  s = estimator_reset(s, Vec{{4.0}}, g);
  EXPECT_EQ(s.x_hat[0], 4.0);
  EXPECT_EQ(s.f_hat[0], 2.0);
}

TEST(Estimator, NonFiniteInputFaultsWithStep) {
  const GainConfig g = paper_gains();
  auto s = estimator_start(Vec::Zero(1), Vec::Zero(1), Vec::Zero(1), g);
  try {
    estimator_step(s, Vec::Constant(1, NAN), Vec::Zero(1), Mat::Zero(1, 1), 0.01, g, 17);
    FAIL() << "expected NumericalFault";
  } catch (const NumericalFault& e) {
    EXPECT_EQ(e.step(), 17u);
  }
}

TEST(Adaptation, ZeroRegressorGrowsGammaByForgettingFactor) {
  GainConfig g;
  g.k_theta = 0.0;
  g.kappa_0 = 10.0;
  g.gamma_init_scale = 1.0;
  g.beta_0 = 2.0;
  const Vec theta{{0.3, -0.7}};
  auto s = adaptation_start(theta, g);
  const double dt = 0.01;
  const auto next = adapt_step(s, Vec::Zero(1), Mat::Zero(1, 2), Vec::Zero(1), dt, g);
  const double beta = g.beta_0 * (1.0 - 1.0 / g.kappa_0);
  EXPECT_EQ(next.theta, theta);
  EXPECT_NEAR(next.beta, beta, 1e-15);
  EXPECT_LT((next.gamma - std::exp(beta * dt) * Mat::Identity(2, 2)).norm(), 1e-12);
}

TEST(Adaptation, NoForgettingAtCap) {
  GainConfig g;
  g.kappa_0 = 3.0;
  g.gamma_init_scale = 3.0;
  auto s = adaptation_start(Vec::Zero(3), g);
  EXPECT_DOUBLE_EQ(s.gamma_norm, 3.0);
  const auto next = adapt_step(s, Vec::Zero(1), Mat::Zero(1, 3), Vec::Zero(1), 0.01, g);
  EXPECT_EQ(next.beta, 0.0);
  EXPECT_LE(next.gamma.norm(), s.gamma.norm() + 1e-15);
}

TEST(Adaptation, ScalarCaseMatchesLeastSquaresRecursion) {
  GainConfig g;
  g.k_theta = 0.0;
  g.beta_0 = 0.0;
  g.kappa_0 = 10.0;
  g.gamma_init_scale = 1.0;
  g.alpha = 2.0;
  const double dt = 0.01, e = 0.4;
  auto s = adaptation_start(Vec::Zero(1), g);
  double P = 1.0, theta = 0.0;
  for (int k = 0; k < 100; ++k) {
    s = adapt_step(s, Vec::Zero(1), Mat::Ones(1, 1), Vec::Constant(1, e), dt, g);
    P += dt;
    theta += dt * g.alpha * e / P;
    ASSERT_NEAR(s.gamma(0, 0), 1.0 / P, 1e-12);
    ASSERT_NEAR(s.theta[0], theta, 1e-8);
  }
}

TEST(Adaptation, GammaStaysBoundedAndPositiveDefinite) {
  GainConfig g;
  g.kappa_0 = 3.0;
  g.gamma_init_scale = 1.0;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> N(0.0, 1.0);
  auto s = adaptation_start(Vec::Zero(4), g);
  for (int k = 0; k < 10000; ++k) {
    Mat J(2, 4);
    for (int i = 0; i < 8; ++i) J.data()[i] = (k % 200 < 100) ? 0.0 : N(rng);
    s = adapt_step(s, Vec::Zero(2), J, Vec::Zero(2), 0.005, g);
    if (k % 50 == 49) {
      Eigen::SelfAdjointEigenSolver<Mat> es(s.gamma);
      ASSERT_GT(es.eigenvalues().minCoeff(), 0.0) << k;
      ASSERT_LE(es.eigenvalues().maxCoeff(), g.kappa_0 + 1e-9) << k;
    }
  }
}

TEST(Adaptation, ProjectionKeepsWeightsInBall) {
  GainConfig g;
  g.k_theta = 0.0;
  const BallProjection proj{1.0, 0.1};
  auto s = adaptation_start(Vec{{0.95, 0.0}}, g);
  for (int k = 0; k < 500; ++k) {
    s = adapt_step(s, Vec::Zero(1), Mat{{1.0, 0.0}}, Vec::Constant(1, 5.0), 0.01, g, proj);
    ASSERT_LE(s.theta.norm(), 1.0 + 1e-12);
  }
}

TEST(Bounds, PaperGainsAreRejected) {
  GainConfig g;
  g.k_x = 5.0;
  g.k_f = 10.0;
  g.k_theta = 0.001;
  g.kappa_0 = 3.0;
  ProblemBounds pb{1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0};
  const auto bc = compute_bound_constants(g, pb);
  EXPECT_NEAR(bc.lambda_3, 0.0005 - 1.0, 1e-15);
  try {
    derive_bound_constants(g, pb);
    FAIL() << "expected rejection";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("beta_1/(2 kappa_0)"), std::string::npos);
  }
}

TEST(Bounds, ZeroSourcesGiveZeroC) {
  GainConfig g;
  g.k_theta = 0.0;
  ProblemBounds pb{1.0, 0.0, 0.0, 0.0, 5.0, 1.0, 1.2, 0.0};
  const auto bc = compute_bound_constants(g, pb);
  EXPECT_EQ(bc.C, 0.0);
  EXPECT_DOUBLE_EQ(bc.lambda_3, std::min({g.k_x, g.k_f, 1.2 / (2.0 * g.kappa_0)}));
}

TEST(Bounds, ExcitationEnlargesLambda3) {
  GainConfig g;
  ProblemBounds lo{1.0, 1.0, 0.1, 0.01, 1.0, 1.0, 0.0, 0.0};
  ProblemBounds hi = lo;
  hi.beta_1 = 1.0;
  EXPECT_GT(compute_bound_constants(g, hi).lambda_3, compute_bound_constants(g, lo).lambda_3);
}

TEST(Chi, ClampsToXiAtStart) {
  BoundConstants bc;
  bc.lambda_1 = 0.5;
  bc.lambda_2 = 1.0;
  bc.lambda_3 = 2.0;
  bc.Z = 3.0;
  bc.Xi = 1.0;
  bc.C = 0.5;
  EXPECT_EQ(chi_theta(0.0, bc), 1.0);
}

TEST(Chi, LimitAtInfinity) {
  BoundConstants bc;
  bc.lambda_1 = 0.5;
  bc.lambda_2 = 1.0;
  bc.lambda_3 = 2.0;
  bc.Z = 3.0;
  bc.Xi = 10.0;
  bc.C = 0.5;
  EXPECT_NEAR(chi_theta(1e3, bc), std::sqrt(bc.lambda_2 * bc.C / (bc.lambda_1 * bc.lambda_3)), 1e-12);
  EXPECT_NEAR(chi_theta(1e3, bc), bc.chi_feasibility(), 1e-12);
}

TEST(Chi, ZeroWhenNoSources) {
  BoundConstants bc;
  bc.Z = 0.0;
  bc.C = 0.0;
  for (double t : {0.0, 0.5, 10.0}) {
    EXPECT_EQ(chi_theta(t, bc), 0.0);
  }
}

TEST(Chi, NeverAboveXiAndNonIncreasingPastCrossover) {
  BoundConstants bc;
  bc.lambda_1 = 0.2;
  bc.lambda_2 = 0.8;
  bc.lambda_3 = 1.5;
  bc.Z = 2.0;
  bc.C = 0.05;
  bc.Xi = 1.0;
  double prev = chi_theta(0.0, bc);
  bool crossed = false;
  for (int k = 1; k <= 4000; ++k) {
    const double v = chi_theta(k * 0.005, bc);
    ASSERT_LE(v, bc.Xi);
    if (v < bc.Xi) crossed = true;
    if (crossed) {
      ASSERT_LE(v, prev + 1e-15);
    }
    prev = v;
  }
  EXPECT_TRUE(crossed);
}

TEST(Excitation, ReportsWindowMinimumEigenvalue) {
  ExcitationMonitor m;
  for (int k = 0; k < 100; ++k) m.add(Mat::Identity(2, 2), 0.01);
  EXPECT_NEAR(m.last_min_eig, 1.0, 1e-12);
}
