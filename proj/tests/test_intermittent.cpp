#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "adcbf/intermittent.hpp"
#include "adcbf/scenarios.hpp"

using namespace adcbf;
using namespace adcbf::intermittent;

namespace {

LossConstants unit_rate() {
  // lambda_U = 2 L_U + Delta_U = 1 and delta_U = 2 Delta_U / lambda_U = 1.
  LossConstants lc;
  lc.L_U = 0.25;
  lc.Delta_U = 0.5;
  return lc;
}

}  // namespace

TEST(Predictor, ZeroDynamicsHoldsState) {
  auto s = predictor_start(Vec{{0.3, -0.2}}, Vec::Zero(3), 4.0);
  auto zero = [](const Vec& x) -> Vec { return Vec::Zero(x.size()); };
  auto g = [](const Vec&) -> Mat { return Mat::Identity(2, 2); };
  for (int k = 0; k < 100; ++k) s = predictor_step(s, Vec::Zero(2), zero, g, 0.01);
  EXPECT_EQ(s.X_hat, (Vec{{0.3, -0.2}}));
  EXPECT_EQ(s.t_loss_start, 4.0);
}

TEST(Predictor, PerfectModelTracksTwinSimulation) {
  auto f = [](const Vec& x) -> Vec { return scen::nonpoly_drift(x); };
  auto g = [](const Vec&) -> Mat { return Mat::Identity(2, 2); };
  Vec x{{0.4, -0.6}};
  auto s = predictor_start(x, Vec(), 0.0);
  const double dt = 0.005;
  for (int k = 0; k < 200; ++k) {
    const Vec u{{std::sin(0.1 * k), 0.5}};
    auto plant = [&](const Vec& z) -> Vec { return f(z) + g(z) * u; };
    x = ode::step(ode::Integrator::Rk4, plant, x, dt);
    s = predictor_step(s, u, f, g, dt);
  }
  EXPECT_LT((s.X_hat - x).norm(), 1e-14);
}

TEST(Predictor, NonFiniteStateFaults) {
  auto s = predictor_start(Vec::Zero(1), Vec(), 0.0);
  auto bad = [](const Vec&) -> Vec { return Vec::Constant(1, NAN); };
  auto g = [](const Vec&) -> Mat { return Mat::Identity(1, 1); };
  EXPECT_THROW(predictor_step(s, Vec::Zero(1), bad, g, 0.01), NumericalFault);
}

TEST(Envelope, ZeroAtOnset) { EXPECT_EQ(xtilde_envelope(3.0, LossConstants{}, 3.0), 0.0); }

TEST(Envelope, ZeroWithoutMismatch) {
  LossConstants lc;
  lc.Delta_U = 0.0;
  for (double t : {0.1, 1.0, 5.0}) {
    EXPECT_EQ(xtilde_envelope(t, lc, 0.0), 0.0);
  }
}

TEST(Envelope, UnitRateAtLnTwo) {
  const auto lc = unit_rate();
  EXPECT_DOUBLE_EQ(lc.lambda_U(), 1.0);
  EXPECT_DOUBLE_EQ(lc.delta_U(), 1.0);
  EXPECT_NEAR(xtilde_envelope(2.0 + std::log(2.0), lc, 2.0), 1.0, 1e-15);
}

TEST(Envelope, StrictlyIncreasing) {
  const LossConstants lc;
  double prev = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double v = xtilde_envelope(10.0 + 0.005 * k, lc, 10.0);
    ASSERT_GT(v, prev);
    prev = v;
  }
}

TEST(NoFeedbackRows, OnsetKeepsOnlyMismatchInflation) {
  const auto barrier = scen::diamond_barrier(2.0, 10.0);
  const Vec X{{0.3, 0.4}};
  const Vec phi{{0.1, -0.2}};
  const Mat g = Mat::Identity(2, 2);
  LossConstants lc;
  lc.rho = 0.7;
  lc.u_bar = 5.0;
  const auto rows = build_no_feedback_rows(X, barrier, phi, g, lc, 0.0);
  const auto ce = safety::build_nominal_rows(X, barrier, phi, g);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(rows[i].a, ce[i].a);
    EXPECT_NEAR(rows[i].b, ce[i].b - std::sqrt(2.0) * lc.Delta_U, 1e-14);
  }
  lc.Delta_U = 0.0;
  const auto exact = build_no_feedback_rows(X, barrier, phi, g, lc, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(exact[i].b, ce[i].b, 1e-15);
  }
}

TEST(NoFeedbackRows, AffineBarrierInflatesByGradientNorm) {
  const auto barrier = scen::diamond_barrier(2.0, 10.0);
  const Vec X{{-0.5, 0.2}};
  const Vec phi{{0.3, 0.3}};
  const Mat g = Mat::Identity(2, 2);
  const LossConstants lc;  // rho = 0
  const double env = 0.35;
  const auto rows = build_no_feedback_rows(X, barrier, phi, g, lc, env);
  const auto ce = safety::build_nominal_rows(X, barrier, phi, g);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(rows[i].b, ce[i].b - std::sqrt(2.0) * (lc.L_U * env + lc.Delta_U), 1e-14);
  }
}

TEST(NoFeedbackRows, DominateExactConstraintOnGrid) {
  const auto barrier = scen::diamond_barrier(2.0, 10.0);
  const Vec X{{0.9, -0.4}};
  const Vec phi{{0.6, -1.1}};
  const Mat g{{1.0, 0.2}, {0.0, 0.8}};
  LossConstants lc;
  lc.rho = 0.5;
  const double u_max = 3.0;
  lc.u_bar = std::sqrt(2.0) * u_max;
  const double env = 0.4;
  const auto rows = build_no_feedback_rows(X, barrier, phi, g, lc, env);
  for (int i = 0; i <= 60; ++i) {
    for (int j = 0; j <= 60; ++j) {
      const Vec u{{-u_max + 0.1 * i, -u_max + 0.1 * j}};
      const Vec exact = no_feedback_constraint(X, barrier, phi, g, lc, env, u);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        ASSERT_GE(rows[r].a.dot(u) - rows[r].b, exact[static_cast<Eigen::Index>(r)] - 1e-12);
      }
    }
  }
}

TEST(Dwell, ThresholdBehaviour) {
  const LossConstants lc;
  const double K = dwell_offset(lc, 0.8, 1.0);
  const double edge = 6.0 * lc.B_bar * lc.Delta_U + K;
  EXPECT_THROW(max_dwell_time(lc, edge, K), ConfigError);
  EXPECT_NEAR(max_dwell_time(lc, edge + 1e-9, K), std::log(1.0 / lc.delta_U()) / lc.lambda_U(), 1e-12);
}

TEST(Dwell, UnboundedWithoutMismatch) {
  LossConstants lc;
  lc.Delta_U = 0.0;
  EXPECT_EQ(max_dwell_time(lc, 10.0, 1.0), std::numeric_limits<double>::infinity());
  lc.Delta_U = 1e-12;
  EXPECT_GT(max_dwell_time(lc, 10.0, 1.0), 5.0);
}

TEST(Dwell, SpotValue) {
  LossConstants lc;
  lc.L_U = 1.0;
  lc.Delta_U = 0.5;
  lc.B_bar = 1.0;
  const double K = 2.0;
  const double C_bar = 6.0 + 6.0 * lc.B_bar * lc.Delta_U + K;
  EXPECT_NEAR(max_dwell_time(lc, C_bar, K), 0.4 * std::log(5.0), 1e-12);
}

TEST(Dwell, OffsetFormula) {
  LossConstants lc;
  lc.B_bar = 1.5;
  lc.u_bar = 2.0;
  EXPECT_DOUBLE_EQ(dwell_offset(lc, 0.5, 3.0), 4.0 * 1.5 * 0.5 + 4.0 * 1.5 * 3.0 * 2.0);
}

TEST(Dwell, RejectsInsufficientOffset) {
  const LossConstants lc;
  try {
    max_dwell_time(lc, 1.0, 2.0);
    FAIL() << "expected rejection";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("no safe dwell time"), std::string::npos);
  }
}

TEST(LossConstants, NegativeRejected) {
  LossConstants lc;
  lc.rho = -1.0;
  EXPECT_THROW(lc.validate(), ConfigError);
}
