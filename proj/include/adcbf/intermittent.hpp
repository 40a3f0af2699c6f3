#pragma once

// Safety while state feedback is denied: open-loop prediction with the weights
// frozen at loss onset, the exponential bound on the prediction error, the
// inflated barrier rows built around the prediction, and the dwell-time bound.

#include <cmath>
#include <functional>
#include <vector>

#include "adcbf/errors.hpp"
#include "adcbf/ode.hpp"
#include "adcbf/safety_filter.hpp"

namespace adcbf::intermittent {

struct LossConstants {
  double L_U = 2.0;      ///< Lipschitz rate of the drift mismatch, 1/s
  double Delta_U = 0.5;  ///< frozen-model mismatch bound
  double rho = 0.0;      ///< Lipschitz constant of grad B
  double B_bar = 1.0;    ///< bound on ||grad B||
  double u_bar = 1.0;    ///< bound on ||u||

  double lambda_U() const { return 2.0 * L_U + Delta_U; }
  double delta_U() const {
    const double l = lambda_U();
    return l > 0.0 ? 2.0 * Delta_U / l : 0.0;
  }

  void validate() const {
    if (L_U < 0 || Delta_U < 0 || rho < 0 || B_bar < 0 || u_bar < 0) {
      throw ConfigError("loss constants must be non-negative");
    }
  }
};

struct PredictorState {
  Vec X_hat;
  Vec theta_frozen;
  double t_loss_start = 0.0;
};

/// Seeded from the last true measurement at loss onset.
inline PredictorState predictor_start(const Vec& last_measurement, const Vec& theta, double t) {
  return {last_measurement, theta, t};
}

/// Advance X_hat under X_hat' = model(X_hat) + g(X_hat) u with u held for dt.
/// `model` is the frozen network drift mapped into state coordinates.
inline PredictorState predictor_step(const PredictorState& s, const Vec& u,
                                     const std::function<Vec(const Vec&)>& model,
                                     const std::function<Mat(const Vec&)>& g_eval, double dt,
                                     ode::Integrator method = ode::Integrator::Rk4, std::size_t step_index = 0) {
  PredictorState next = s;
  auto rhs = [&](const Vec& X) -> Vec { return model(X) + g_eval(X) * u; };
  next.X_hat = ode::step(method, rhs, s.X_hat, dt);
  if (!next.X_hat.allFinite()) throw NumericalFault("non-finite predicted state", step_index);
  return next;
}

/// Upper bound on ||x - X_hat|| after (t - t_loss_start) seconds without feedback.
inline double xtilde_envelope(double t, const LossConstants& lc, double t_loss_start) {
  const double elapsed = std::max(0.0, t - t_loss_start);
  return std::sqrt(lc.delta_U() * std::expm1(lc.lambda_U() * elapsed));
}

/// Exact no-feedback constraint value C_U,i(X_hat, u) for each barrier row.
inline Vec no_feedback_constraint(const Vec& X_hat, const safety::BarrierCandidate& barrier, const Vec& phi,
                                  const Mat& g_of_X, const LossConstants& lc, double envelope, const Vec& u) {
  const Mat grad = barrier.gradient(X_hat);
  const Vec gam = barrier.gamma(X_hat);
  const Vec flow = phi + g_of_X * u;
  const double inflation = lc.L_U * envelope + lc.Delta_U;
  Vec c(barrier.dim);
  for (int i = 0; i < barrier.dim; ++i) {
    c[i] = envelope * lc.rho * (inflation + flow.norm()) + grad.row(i).norm() * inflation + grad.row(i).dot(flow) +
           gam[i];
  }
  return c;
}

/// Affine rows dominating C_U: ||phi + g u|| is replaced by ||phi|| + ||g|| u_bar.
inline std::vector<qp::ConstraintRow> build_no_feedback_rows(const Vec& X_hat, const safety::BarrierCandidate& barrier,
                                                             const Vec& phi, const Mat& g_of_X,
                                                             const LossConstants& lc, double envelope) {
  require_dim(phi.size(), X_hat.size(), "no-feedback drift model");
  std::vector<qp::ConstraintRow> rows;
  if (barrier.dim == 0) return rows;
  const Mat grad = barrier.gradient(X_hat);
  const Vec gam = barrier.gamma(X_hat);
  const double inflation = lc.L_U * envelope + lc.Delta_U;
  const double g_norm = g_of_X.size() ? g_of_X.jacobiSvd().singularValues()[0] : 0.0;
  const double flow_bound = phi.norm() + g_norm * lc.u_bar;
  for (int i = 0; i < barrier.dim; ++i) {
    qp::ConstraintRow r;
    r.a = g_of_X.transpose() * grad.row(i).transpose();
    r.b = -gam[i] - grad.row(i).dot(phi) - grad.row(i).norm() * inflation -
          envelope * lc.rho * (inflation + flow_bound);
    r.kind = qp::RowKind::NoFeedback;
    rows.push_back(std::move(r));
  }
  return rows;
}

/// K_U = 4 B_bar ||phi(X_hat)|| + 4 B_bar ||g(X_hat)|| u_bar.
inline double dwell_offset(const LossConstants& lc, double phi_norm, double g_norm) {
  return 4.0 * lc.B_bar * phi_norm + 4.0 * lc.B_bar * g_norm * lc.u_bar;
}

/// Longest admissible feedback outage for offset C_bar. Infinite when the
/// mismatch bound vanishes.
inline double max_dwell_time(const LossConstants& lc, double C_bar, double K_U) {
  const double head = C_bar - 6.0 * lc.B_bar * lc.Delta_U - K_U;
  if (!(head > 0.0)) throw ConfigError("no safe dwell time: C_bar <= 6 B_bar Delta_U + K_U");
  if (lc.Delta_U == 0.0) return std::numeric_limits<double>::infinity();
  if (lc.L_U == 0.0 || lc.B_bar == 0.0) return std::numeric_limits<double>::infinity();
  const double q = head / (6.0 * lc.L_U * lc.B_bar);
  return std::log((q * q + 1.0) / lc.delta_U()) / lc.lambda_U();
}

}  // namespace adcbf::intermittent
