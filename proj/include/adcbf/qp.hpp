#pragma once

// Minimum-deviation QP:  min ||u - u_nom||^2  s.t.  a_i^T u <= b_i,  lo <= u <= hi.
//
// Dense dual active-set method (Goldfarb-Idnani) specialized to an identity
// Hessian. It starts from the unconstrained minimizer u_nom, so a feasible
// u_nom is returned untouched, and it adds the most violated row at each
// outer iteration while keeping dual feasibility.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "adcbf/errors.hpp"

namespace adcbf::qp {

enum class RowKind { Adcbf, Robust, Nominal, NoFeedback, Box, Other };

inline std::string_view to_string(RowKind k) {
  switch (k) {
    case RowKind::Adcbf: return "adcbf";
    case RowKind::Robust: return "robust";
    case RowKind::Nominal: return "nominal";
    case RowKind::NoFeedback: return "no-feedback";
    case RowKind::Box: return "box";
    case RowKind::Other: return "other";
  }
  return "?";
}

/// Encodes a^T u <= b.
struct ConstraintRow {
  Vec a;
  double b = 0.0;
  RowKind kind = RowKind::Other;
};

struct QpProblem {
  Vec u_nom;
  std::vector<ConstraintRow> rows;
  std::optional<Vec> lower;
  std::optional<Vec> upper;
};

struct QpResult {
  bool feasible = true;
  Vec u;
  std::vector<int> active_set;  ///< indices into problem rows, then 2m box rows (upper, lower)
  Vec multipliers;              ///< one per row (box rows included)
  Vec slack;                    ///< b_i - a_i^T u per row (box rows included)
  double kkt_residual = 0.0;
  /// max_i (a_i^T u - b_i) over the problem rows; the least achievable value
  /// when infeasible.
  double max_violation = 0.0;
  int iterations = 0;
};

namespace detail {

struct Stacked {
  Mat A;
  Vec b;
};

inline Stacked stack(const QpProblem& pr) {
  const Eigen::Index m = pr.u_nom.size();
  const Eigen::Index r = static_cast<Eigen::Index>(pr.rows.size());
  const Eigen::Index nbox = (pr.upper ? m : 0) + (pr.lower ? m : 0);
  Stacked s{Mat::Zero(r + nbox, m), Vec::Zero(r + nbox)};
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = pr.rows[static_cast<std::size_t>(i)];
    require_dim(row.a.size(), m, "constraint row " + std::to_string(i));
    s.A.row(i) = row.a.transpose();
    s.b[i] = row.b;
  }
  Eigen::Index k = r;
  if (pr.upper) {
    require_dim(pr.upper->size(), m, "upper bound");
    for (Eigen::Index j = 0; j < m; ++j, ++k) {
      s.A(k, j) = 1.0;
      s.b[k] = (*pr.upper)[j];
    }
  }
  if (pr.lower) {
    require_dim(pr.lower->size(), m, "lower bound");
    for (Eigen::Index j = 0; j < m; ++j, ++k) {
      s.A(k, j) = -1.0;
      s.b[k] = -(*pr.lower)[j];
    }
  }
  return s;
}

struct GiResult {
  bool feasible = true;
  Vec x;
  std::vector<int> active;
  Vec lambda;
  int iterations = 0;
};

/// Goldfarb-Idnani for min 1/2 ||x - x0||^2 s.t. A x <= b.
inline GiResult goldfarb_idnani(const Vec& x0, const Mat& A, const Vec& b, int max_iter = 500) {
  const Eigen::Index nrows = A.rows();
  const Eigen::Index dim = x0.size();
  GiResult res;
  res.x = x0;
  res.lambda = Vec::Zero(nrows);

  Vec row_norm(nrows);
  for (Eigen::Index i = 0; i < nrows; ++i) row_norm[i] = A.row(i).norm();

  std::vector<int>& act = res.active;
  std::vector<char> in_active(static_cast<std::size_t>(nrows), 0);

  auto violation_tol = [&](Eigen::Index i) {
    return 1e-12 * (1.0 + std::abs(b[i]) + row_norm[i] * res.x.lpNorm<Eigen::Infinity>());
  };

  while (res.iterations < max_iter) {
    ++res.iterations;
    // Most violated row, measured in the row's own scale.
    Eigen::Index p = -1;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < nrows; ++i) {
      if (in_active[static_cast<std::size_t>(i)] || row_norm[i] == 0.0) {
        if (row_norm[i] == 0.0 && b[i] < -violation_tol(i)) {
          res.feasible = false;  // 0 <= b with b < 0
          return res;
        }
        continue;
      }
      const double s = (A.row(i).dot(res.x) - b[i]);
      if (s > violation_tol(i) && s / row_norm[i] > worst) {
        worst = s / row_norm[i];
        p = i;
      }
    }
    if (p < 0) return res;

    const Vec ap = A.row(p).transpose();
    double lam_p = 0.0;
    for (;;) {
      if (++res.iterations > max_iter) {
        res.feasible = false;
        return res;
      }
      const Eigen::Index q = static_cast<Eigen::Index>(act.size());
      Vec z = -ap;
      Vec r;
      if (q > 0) {
        Mat N(dim, q);
        for (Eigen::Index j = 0; j < q; ++j) N.col(j) = A.row(act[static_cast<std::size_t>(j)]).transpose();
        r = (N.transpose() * N).ldlt().solve(N.transpose() * ap);
        z += N * r;
      }
      const double zz = z.squaredNorm();
      const bool has_dir = zz > 1e-14 * ap.squaredNorm();

      double t1 = std::numeric_limits<double>::infinity();
      Eigen::Index drop = -1;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (r[j] > 1e-14) {
          const double t = res.lambda[act[static_cast<std::size_t>(j)]] / r[j];
          if (t < t1) {
            t1 = t;
            drop = j;
          }
        }
      }
      const double sp = A.row(p).dot(res.x) - b[p];
      const double t2 = has_dir ? sp / zz : std::numeric_limits<double>::infinity();
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        res.feasible = false;
        return res;
      }

      if (has_dir) res.x += t * z;
      for (Eigen::Index j = 0; j < q; ++j) res.lambda[act[static_cast<std::size_t>(j)]] -= t * r[j];
      lam_p += t;

      if (t2 <= t1) {
        res.lambda[p] = lam_p;
        act.push_back(static_cast<int>(p));
        in_active[static_cast<std::size_t>(p)] = 1;
        break;
      }
      const int k = act[static_cast<std::size_t>(drop)];
      res.lambda[k] = 0.0;
      in_active[static_cast<std::size_t>(k)] = 0;
      act.erase(act.begin() + drop);
    }
  }
  res.feasible = false;
  return res;
}

inline double kkt_residual(const Vec& u, const Vec& u_nom, const Mat& A, const Vec& b, const Vec& lambda) {
  double r = (u - u_nom + A.transpose() * lambda).lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double s = b[i] - A.row(i).dot(u);
    r = std::max({r, -s, -lambda[i], std::abs(lambda[i] * s)});
  }
  return r;
}

}  // namespace detail

/// Point minimizing the worst row violation (box kept hard), with a tiny
/// proximity weight toward u_nom to make it unique.
inline Vec least_infeasible_point(const QpProblem& pr, double proximity = 1e-8) {
  const Eigen::Index m = pr.u_nom.size();
  const auto st = detail::stack(pr);
  const Eigen::Index nr = static_cast<Eigen::Index>(pr.rows.size());
  const double s = std::sqrt(proximity);
  // Variables y = (sqrt(eps) (u - u_nom), t).
  Mat A(st.A.rows(), m + 1);
  Vec b(st.A.rows());
  for (Eigen::Index i = 0; i < st.A.rows(); ++i) {
    Vec row(m + 1);
    row.head(m) = st.A.row(i).transpose() / s;
    row[m] = i < nr ? -1.0 : 0.0;
    double rhs = st.b[i] - st.A.row(i).dot(pr.u_nom);
    const double nrm = row.norm();
    if (nrm > 0.0) {
      row /= nrm;
      rhs /= nrm;
    }
    A.row(i) = row.transpose();
    b[i] = rhs;
  }
  const auto gi = detail::goldfarb_idnani(Vec::Zero(m + 1), A, b, 2000);
  return pr.u_nom + gi.x.head(m) / s;
}

inline QpResult qp_solve(const QpProblem& pr) {
  if (!pr.u_nom.allFinite()) throw NumericalFault("non-finite nominal input", 0);
  for (const auto& row : pr.rows) {
    if (!row.a.allFinite() || !std::isfinite(row.b)) throw NumericalFault("non-finite constraint row", 0);
  }
  if (pr.lower && pr.upper && ((*pr.upper) - (*pr.lower)).minCoeff() < 0.0) {
    throw ConfigError("input box has lower > upper");
  }
  const auto st = detail::stack(pr);
  const Eigen::Index nr = static_cast<Eigen::Index>(pr.rows.size());

  QpResult out;
  auto gi = detail::goldfarb_idnani(pr.u_nom, st.A, st.b);
  out.iterations = gi.iterations;
  if (gi.feasible) {
    out.u = gi.x;
    out.active_set = gi.active;
    std::sort(out.active_set.begin(), out.active_set.end());
    out.multipliers = gi.lambda;
    out.kkt_residual = detail::kkt_residual(out.u, pr.u_nom, st.A, st.b, gi.lambda);
  } else {
    out.feasible = false;
    out.u = least_infeasible_point(pr);
    out.multipliers = Vec::Zero(st.A.rows());
    out.kkt_residual = std::numeric_limits<double>::quiet_NaN();
  }
  out.slack = st.b - st.A * out.u;
  out.max_violation = nr > 0 ? (-out.slack.head(nr)).maxCoeff() : -std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace adcbf::qp
