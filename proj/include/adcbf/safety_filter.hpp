#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "adcbf/errors.hpp"
#include "adcbf/qp.hpp"

namespace adcbf::safety {

using qp::ConstraintRow;
using qp::RowKind;

/// Vector-valued barrier candidate; the safe set is {x : B(x) <= 0}.
struct BarrierCandidate {
  int dim = 0;
  std::function<Vec(const Vec&)> value;
  std::function<Mat(const Vec&)> gradient;  ///< d x n, row i is grad B_i^T
  std::function<Vec(const Vec&)> gamma;

  bool contains(const Vec& x) const { return dim == 0 || value(x).maxCoeff() <= 0.0; }

  /// B(x) = G x + c with gamma(x) = gamma_gain * B(x).
  static BarrierCandidate affine(const Mat& G, const Vec& c, double gamma_gain) {
    require_dim(c.size(), G.rows(), "affine barrier offset");
    BarrierCandidate bc;
    bc.dim = static_cast<int>(G.rows());
    bc.value = [G, c](const Vec& x) -> Vec { return G * x + c; };
    bc.gradient = [G](const Vec&) -> Mat { return G; };
    bc.gamma = [G, c, gamma_gain](const Vec& x) -> Vec { return gamma_gain * (G * x + c); };
    return bc;
  }

  static BarrierCandidate empty() {
    BarrierCandidate bc;
    bc.value = [](const Vec&) { return Vec(0); };
    bc.gradient = [](const Vec& x) { return Mat(0, x.size()); };
    bc.gamma = [](const Vec&) { return Vec(0); };
    return bc;
  }
};

/// Rows of the adaptive DNN CBF condition at x:
///   grad B_i^T (phi + g u) + ||grad B_i^T phi'|| (chi + c_1) <= -gamma_i(x).
/// phi and phi_prime are the drift model and its weight Jacobian expressed in
/// full state coordinates (n and n x p).
inline std::vector<ConstraintRow> build_adcbf_rows(const Vec& x, const BarrierCandidate& barrier, const Vec& phi,
                                                   const Mat& phi_prime, const Mat& g_of_x, double chi,
                                                   double c_1) {
  if (chi < 0.0 || c_1 < 0.0) throw ConfigError("adcbf rows need chi >= 0 and c_1 >= 0");
  require_dim(phi.size(), x.size(), "adcbf drift model");
  require_dim(phi_prime.rows(), x.size(), "adcbf regressor rows");
  std::vector<ConstraintRow> rows;
  if (barrier.dim == 0) return rows;
  const Mat grad = barrier.gradient(x);
  const Vec gam = barrier.gamma(x);
  const Mat gb = grad * phi_prime;  // d x p
  for (int i = 0; i < barrier.dim; ++i) {
    ConstraintRow r;
    r.a = g_of_x.transpose() * grad.row(i).transpose();
    r.b = -gam[i] - grad.row(i).dot(phi) - gb.row(i).norm() * (chi + c_1);
    r.kind = RowKind::Adcbf;
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Worst-case rows: grad B_i^T (f_model + g u) + ||E^T grad B_i|| delta_bar <= -gamma_i(x),
/// where E selects the state channels carrying the unmodeled term (all when empty).
inline std::vector<ConstraintRow> build_robust_rows(const Vec& x, const BarrierCandidate& barrier,
                                                    const Vec& f_model, double delta_bar, const Mat& g_of_x,
                                                    const std::optional<Mat>& channels = std::nullopt) {
  if (delta_bar < 0.0) throw ConfigError("robust rows need delta_bar >= 0");
  require_dim(f_model.size(), x.size(), "robust drift model");
  std::vector<ConstraintRow> rows;
  if (barrier.dim == 0) return rows;
  const Mat grad = barrier.gradient(x);
  const Vec gam = barrier.gamma(x);
  for (int i = 0; i < barrier.dim; ++i) {
    const Vec gi = grad.row(i).transpose();
    const double gnorm = channels ? (channels->transpose() * gi).norm() : gi.norm();
    ConstraintRow r;
    r.a = g_of_x.transpose() * gi;
    r.b = -gam[i] - gi.dot(f_model) - gnorm * delta_bar;
    r.kind = RowKind::Robust;
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Certainty-equivalent rows with the (possibly wrong) model f_model.
inline std::vector<ConstraintRow> build_nominal_rows(const Vec& x, const BarrierCandidate& barrier,
                                                     const Vec& f_model, const Mat& g_of_x) {
  auto rows = build_robust_rows(x, barrier, f_model, 0.0, g_of_x);
  for (auto& r : rows) r.kind = RowKind::Nominal;
  return rows;
}

}  // namespace adcbf::safety
