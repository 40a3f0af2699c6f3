#pragma once

// Online identification of the unknown drift: a high-gain state-derivative
// estimator supplies f_hat, and a least-squares law with a bounded-gain
// forgetting factor adapts the network weights toward it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "adcbf/errors.hpp"

namespace adcbf::ident {

enum class GammaNorm { Spectral, Frobenius };

/// Discretization of the weight update. Explicit Euler follows the law
/// literally; the linearly implicit variant treats the alpha*Phi'^T Phi' term
/// implicitly so large alpha*Gamma gains stay stable at coarse steps.
enum class ThetaScheme { Explicit, LinearlyImplicit };

struct GainConfig {
  double k_x = 5.0;
  double k_f = 10.0;
  double k_theta = 0.001;
  double alpha = 50.0;
  double beta_0 = 2.0;
  double kappa_0 = 3.0;
  double gamma_init_scale = 5.0;
  /// Eigenvalue floor for Gamma; <= 0 means 1e-6 * gamma_init_scale.
  double kappa_1_floor = 0.0;
  GammaNorm gamma_norm = GammaNorm::Spectral;
  ThetaScheme theta_scheme = ThetaScheme::Explicit;
  /// Steps between exact eigen-decompositions of Gamma (clip + norm refresh).
  int gamma_refresh_interval = 50;

  double kappa_1() const { return kappa_1_floor > 0.0 ? kappa_1_floor : 1e-6 * gamma_init_scale; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("gain ") + name + " must be positive");
    };
    positive(k_x, "k_x");
    positive(k_f, "k_f");
    positive(k_theta, "k_theta");
    positive(alpha, "alpha");
    positive(beta_0, "beta_0");
    positive(kappa_0, "kappa_0");
    positive(gamma_init_scale, "gamma_init_scale");
    if (kappa_1() >= kappa_0) throw ConfigError("kappa_1 floor must be below kappa_0");
    if (gamma_refresh_interval < 1) throw ConfigError("gamma_refresh_interval must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// State-derivative estimator

struct EstimatorState {
  Vec x_hat;
  Vec f_hat;
  Vec integral;        ///< running integral of (k_f k_x + 1) x~
  Vec f_hat_anchor;    ///< f_hat at the last (re)start
  Vec kf_xtilde_anchor;  ///< k_f x~ at the last (re)start
  Vec xtilde_prev;
  double pending_dt = 0.0;  ///< length of the interval since the last sample

  Vec xtilde(const Vec& x) const { return x - x_hat; }
};

/// Start (or restart) the estimator at measurement x with x_hat and f_hat given.
inline EstimatorState estimator_start(const Vec& x, const Vec& x_hat, const Vec& f_hat, const GainConfig& g) {
  require_dim(x_hat.size(), x.size(), "estimator x_hat");
  require_dim(f_hat.size(), x.size(), "estimator f_hat");
  EstimatorState s;
  s.x_hat = x_hat;
  s.f_hat = f_hat;
  s.integral = Vec::Zero(x.size());
  s.f_hat_anchor = f_hat;
  s.xtilde_prev = x - x_hat;
  s.kf_xtilde_anchor = g.k_f * s.xtilde_prev;
  return s;
}

/// Reset on feedback restoration: x_hat = x, so x~ = 0, f_hat carried over.
inline EstimatorState estimator_reset(const EstimatorState& s, const Vec& x, const GainConfig& g) {
  return estimator_start(x, x, s.f_hat, g);
}

/// Sample the estimator at measurement x (updating f_hat through the
/// integral form, trapezoidal accumulator), then advance x_hat one explicit
/// Euler step under input u held for dt.
inline EstimatorState estimator_step(const EstimatorState& s, const Vec& x, const Vec& u, const Mat& g_of_x,
                                     double dt, const GainConfig& gains, std::size_t step_index = 0) {
  const Eigen::Index n = s.x_hat.size();
  require_dim(x.size(), n, "estimator measurement");
  require_dim(g_of_x.rows(), n, "estimator g rows");
  require_dim(g_of_x.cols(), u.size(), "estimator g cols");
  if (!(dt > 0.0)) throw ConfigError("estimator step needs dt > 0");
  if (!x.allFinite() || !u.allFinite() || !g_of_x.allFinite()) {
    throw NumericalFault("non-finite estimator input", step_index);
  }

  EstimatorState next = s;
  const Vec xt = s.xtilde(x);
  const double c = gains.k_f * gains.k_x + 1.0;
  next.integral += 0.5 * s.pending_dt * c * (s.xtilde_prev + xt);
  next.f_hat = s.f_hat_anchor + gains.k_f * xt - s.kf_xtilde_anchor + next.integral;
  next.x_hat = s.x_hat + dt * (next.f_hat + g_of_x * u + gains.k_x * xt);
  next.xtilde_prev = xt;
  next.pending_dt = dt;
  if (!next.x_hat.allFinite() || !next.f_hat.allFinite()) {
    throw NumericalFault("estimator diverged", step_index);
  }
  return next;
}

// ---------------------------------------------------------------------------
// Weight adaptation

/// Smooth ball projection centered at the origin. Inside radius
/// inner = (1 - layer) * radius the update passes unchanged; between inner
/// and radius the outward component is scaled away progressively.
struct BallProjection {
  double radius = std::numeric_limits<double>::infinity();
  double layer = 0.1;

  double inner() const { return (1.0 - layer) * radius; }

  Vec apply(const Vec& theta, const Vec& tau, const Mat& gamma) const {
    if (!std::isfinite(radius)) return tau;
    const double r2 = theta.squaredNorm();
    const double in2 = inner() * inner();
    const double level = (r2 - in2) / (radius * radius - in2);
    const double outward = theta.dot(tau);
    if (level <= 0.0 || outward <= 0.0) return tau;
    const Vec gt = gamma * theta;
    const double denom = theta.dot(gt);
    if (!(denom > 0.0)) return tau;
    return tau - std::min(1.0, level) * gt * (outward / denom);
  }

  /// Radial clamp applied after a discrete step.
  Vec clamp(const Vec& theta) const {
    if (!std::isfinite(radius)) return theta;
    const double r = theta.norm();
    return r > radius ? Vec(theta * (radius / r)) : theta;
  }
};

struct AdaptationState {
  Vec theta;
  Mat gamma;
  double gamma_norm = 0.0;  ///< exact at refresh, an upper bound in between
  double beta = 0.0;        ///< forgetting rate used by the last step
  double min_eig = 0.0;     ///< smallest eigenvalue at the last refresh
  std::size_t steps = 0;
};

struct GammaSpectrum {
  double min_eig;
  double max_eig;
};

/// Exact refresh: symmetrize, clip eigenvalues into [kappa_1, kappa_0].
inline GammaSpectrum refresh_gamma(Mat& gamma, const GainConfig& g, std::size_t step_index) {
  gamma = 0.5 * (gamma + gamma.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(gamma);
  if (es.info() != Eigen::Success) throw NumericalFault("adaptation gain eigen-decomposition failed", step_index);
  Vec ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  if (lo < -1e-9 * std::max(1.0, ev.maxCoeff())) {
    throw NumericalFault("adaptation gain lost positive definiteness (dt too large?)", step_index);
  }
  const double k1 = g.kappa_1();
  const bool clip = lo < k1 || ev.maxCoeff() > g.kappa_0;
  if (clip) {
    ev = ev.cwiseMax(k1).cwiseMin(g.kappa_0);
    gamma = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    gamma = 0.5 * (gamma + gamma.transpose()).eval();
  }
  return {ev.minCoeff(), ev.maxCoeff()};
}

inline double gamma_norm_value(const Mat& gamma, const GainConfig& g, double spectral_max) {
  return g.gamma_norm == GammaNorm::Frobenius ? gamma.norm() : spectral_max;
}

inline AdaptationState adaptation_start(const Vec& theta0, const GainConfig& g) {
  AdaptationState s;
  s.theta = theta0;
  const Eigen::Index p = theta0.size();
  // Clipped into [kappa_1, kappa_0]; an initial scale above kappa_0 starts at the cap.
  s.gamma = Mat::Identity(p, p) * std::clamp(g.gamma_init_scale, g.kappa_1(), g.kappa_0);
  const auto spec = refresh_gamma(s.gamma, g, 0);
  s.gamma_norm = gamma_norm_value(s.gamma, g, spec.max_eig);
  s.min_eig = spec.min_eig;
  return s;
}

inline double forgetting_factor(double gamma_norm, const GainConfig& g) {
  return std::clamp(g.beta_0 * (1.0 - gamma_norm / g.kappa_0), 0.0, g.beta_0);
}

/// One step of the gain and weight laws.
///
/// Gamma is advanced through its inverse, P <- e^{-beta dt} P + dt Phi'^T Phi',
/// written as a rank-n Woodbury update of Gamma, which keeps Gamma symmetric
/// positive definite at any dt and grows it by exactly e^{beta dt} when the
/// regressor vanishes. Weights then move along proj(Gamma mu),
/// mu = -k_theta theta + alpha Phi'^T (f_hat - phi).
inline AdaptationState adapt_step(const AdaptationState& s, const Vec& phi, const Mat& phi_prime, const Vec& f_hat,
                                  double dt, const GainConfig& g, const BallProjection& proj = {},
                                  std::size_t step_index = 0) {
  const Eigen::Index p = s.theta.size();
  const Eigen::Index n = phi.size();
  require_dim(phi_prime.rows(), n, "adaptation regressor rows");
  require_dim(phi_prime.cols(), p, "adaptation regressor cols");
  require_dim(f_hat.size(), n, "adaptation f_hat");
  if (!(dt > 0.0)) throw ConfigError("adaptation step needs dt > 0");
  if (!phi.allFinite() || !phi_prime.allFinite() || !f_hat.allFinite()) {
    throw NumericalFault("non-finite adaptation input", step_index);
  }

  AdaptationState next = s;
  next.steps = s.steps + 1;
  next.beta = forgetting_factor(s.gamma_norm, g);
  const double decay = std::exp(-next.beta * dt);

  const Mat W = s.gamma * phi_prime.transpose();  // p x n
  Mat K = phi_prime * W;
  K.diagonal().array() += decay / dt;
  next.gamma = (s.gamma - W * K.ldlt().solve(W.transpose())) / decay;
  next.gamma = 0.5 * (next.gamma + next.gamma.transpose()).eval();

  if (next.steps % static_cast<std::size_t>(g.gamma_refresh_interval) == 0) {
    const auto spec = refresh_gamma(next.gamma, g, step_index);
    next.min_eig = spec.min_eig;
    next.gamma_norm = gamma_norm_value(next.gamma, g, spec.max_eig);
  } else if (g.gamma_norm == GammaNorm::Frobenius) {
    next.gamma_norm = next.gamma.norm();
  } else {
    // ||Gamma_new|| <= ||Gamma|| / decay, and that bound never passes kappa_0.
    next.gamma_norm = std::min(s.gamma_norm / decay, g.kappa_0);
  }

  const Vec err = f_hat - phi;
  const Vec mu = -g.k_theta * s.theta + g.alpha * (phi_prime.transpose() * err);
  Vec tau = next.gamma * mu;
  if (g.theta_scheme == ThetaScheme::LinearlyImplicit) {
    // (I + dt alpha Gamma Phi'^T Phi') delta = dt Gamma mu, solved via Woodbury.
    const Mat W2 = next.gamma * phi_prime.transpose();
    Mat S = (g.alpha * dt) * (phi_prime * W2);
    S.diagonal().array() += 1.0;
    tau -= (g.alpha * dt) * (W2 * S.ldlt().solve(phi_prime * tau));
  }
  next.theta = proj.clamp(s.theta + dt * proj.apply(s.theta, tau, next.gamma));
  if (!next.theta.allFinite() || !next.gamma.allFinite()) {
    throw NumericalFault("adaptation diverged", step_index);
  }
  return next;
}

/// Running excitation integral of Phi'^T Phi' over consecutive windows; the
/// smallest eigenvalue of the last completed window is reported.
struct ExcitationMonitor {
  double window = 1.0;
  Mat accum;
  double elapsed = 0.0;
  double last_min_eig = std::numeric_limits<double>::quiet_NaN();

  void add(const Mat& phi_prime, double dt) {
    if (accum.size() == 0) accum = Mat::Zero(phi_prime.cols(), phi_prime.cols());
    accum.noalias() += dt * (phi_prime.transpose() * phi_prime);
    elapsed += dt;
    if (elapsed >= window - 1e-12) {
      Eigen::SelfAdjointEigenSolver<Mat> es(accum, Eigen::EigenvaluesOnly);
      last_min_eig = es.eigenvalues().minCoeff();
      accum.setZero();
      elapsed = 0.0;
    }
  }
};

// ---------------------------------------------------------------------------
// Parameter-error envelope

struct ProblemBounds {
  double f_bar = 1.0;      ///< sup ||f|| on the safe set
  double f_dot_bar = 1.0;  ///< sup ||f_dot|| on the safe set
  double c_1 = 0.1;        ///< bound on the Taylor remainder + reconstruction error
  double c_2 = 1.0;        ///< bound on ||Phi'||_F
  double theta_bar = 10.0; ///< bound on the ideal weights
  double Xi = 1.0;         ///< convexity radius around the ideal weights
  double beta_1 = 0.0;     ///< forgetting floor certified by excitation
  double epsilon_bar = 0.0;
};

struct BoundConstants {
  double lambda_1 = 0.5;
  double lambda_2 = 0.5;
  double lambda_3 = 1.0;
  double C = 0.0;
  double Xi = 1.0;
  double theta_bar = 0.0;
  double f_bar = 0.0;
  double f_dot_bar = 0.0;
  double c_1 = 0.0;
  double c_2 = 0.0;
  double kappa_1 = 1.0;
  double beta_1 = 0.0;
  double Z = 0.0;
  double epsilon_bar = 0.0;

  /// Smallest admissible radius of the region D.
  double chi_feasibility() const { return std::sqrt(lambda_2 * C / (lambda_1 * lambda_3)); }
};

/// Lambda_3 and the remaining constants, without rejecting lambda_3 <= 0.
inline BoundConstants compute_bound_constants(const GainConfig& cfg, const ProblemBounds& pb) {
  BoundConstants bc;
  bc.kappa_1 = cfg.kappa_1();
  bc.lambda_1 = std::min(0.5, 1.0 / (2.0 * cfg.kappa_0));
  bc.lambda_2 = std::max(0.5, 1.0 / (2.0 * bc.kappa_1));
  bc.lambda_3 = std::min({cfg.k_x, cfg.k_f - pb.f_dot_bar / 2.0 - pb.c_2 / 2.0,
                          pb.beta_1 / (2.0 * cfg.kappa_0) + cfg.k_theta / 2.0 - pb.c_2});
  bc.C = (pb.f_dot_bar + pb.c_2 * pb.c_1 * pb.c_1 + cfg.k_theta * pb.theta_bar * pb.theta_bar) / 2.0;
  bc.Xi = pb.Xi;
  bc.theta_bar = pb.theta_bar;
  bc.f_bar = pb.f_bar;
  bc.f_dot_bar = pb.f_dot_bar;
  bc.c_1 = pb.c_1;
  bc.c_2 = pb.c_2;
  bc.beta_1 = pb.beta_1;
  bc.epsilon_bar = pb.epsilon_bar;
  bc.Z = std::sqrt(pb.Xi * pb.Xi + 4.0 * pb.f_bar * pb.f_bar);
  return bc;
}

/// Names the binding term when lambda_3 <= 0.
inline std::string lambda3_violation(const GainConfig& cfg, const ProblemBounds& pb) {
  const double t1 = cfg.k_x;
  const double t2 = cfg.k_f - pb.f_dot_bar / 2.0 - pb.c_2 / 2.0;
  const double t3 = pb.beta_1 / (2.0 * cfg.kappa_0) + cfg.k_theta / 2.0 - pb.c_2;
  if (t3 <= 0.0 && t3 <= t2) {
    return "beta_1/(2 kappa_0) + k_theta/2 - c_2 = " + std::to_string(t3) + " <= 0 (raise k_theta or beta_1, or lower c_2)";
  }
  if (t2 <= 0.0) return "k_f - f_dot_bar/2 - c_2/2 = " + std::to_string(t2) + " <= 0 (raise k_f)";
  if (t1 <= 0.0) return "k_x <= 0";
  return "";
}

/// Rejects configurations for which the gain condition lambda_3 > 0 fails.
inline BoundConstants derive_bound_constants(const GainConfig& cfg, const ProblemBounds& pb) {
  BoundConstants bc = compute_bound_constants(cfg, pb);
  if (!(bc.lambda_3 > 0.0)) throw ConfigError("gain condition violated: " + lambda3_violation(cfg, pb));
  return bc;
}

/// Computable bound on ||theta~(t)||.
inline double chi_theta(double t, const BoundConstants& bc) {
  const double rate = bc.lambda_3 / bc.lambda_2;
  const double e = std::exp(-rate * t);
  const double ratio = bc.lambda_2 / bc.lambda_1;
  double v = ratio * bc.Z * bc.Z * e;
  if (bc.C != 0.0) v += ratio * bc.C / bc.lambda_3 * (1.0 - e);
  return std::min(bc.Xi, std::sqrt(std::max(0.0, v)));
}

}  // namespace adcbf::ident
