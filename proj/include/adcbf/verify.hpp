#pragma once

// Invariant suite behind `adcbf verify`.

#include <cmath>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "adcbf/harness.hpp"
#include "adcbf/identifier.hpp"
#include "adcbf/intermittent.hpp"
#include "adcbf/nn.hpp"
#include "adcbf/qp.hpp"
#include "adcbf/scenarios.hpp"

namespace adcbf::verify {

struct Options {
  bool mutate_jacobian = false;
  int jacobian_nets = 100;
  int qp_instances = 2000;
  int soak_steps = 100000;
  std::uint64_t seed = 12345;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::vector<Check> checks;
  bool all_passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }
};

inline nn::Architecture random_architecture(scen::Rng& rng) {
  std::uniform_int_distribution<int> dim(1, 3), depth(0, 3), width(2, 6), coin(0, 1);
  nn::Architecture a;
  a.input_dim = dim(rng);
  a.output_dim = dim(rng);
  const int d = depth(rng);
  const int w = width(rng);
  const auto act = coin(rng) ? nn::Activation::Tanh : nn::Activation::Swish;
  for (int i = 0; i < d; ++i) {
    a.hidden_widths.push_back(w);
    a.activations.push_back(act);
    a.shortcuts.push_back(i + 1 < d && coin(rng));
  }
  a.validate();
  return a;
}

/// Central differences of the forward pass with respect to the weights.
inline Mat finite_difference_jacobian(const nn::Architecture& a, const Vec& theta, const Vec& sigma, double h) {
  const Eigen::Index p = theta.size();
  Mat J(a.output_dim, p);
  Vec t = theta;
  for (Eigen::Index i = 0; i < p; ++i) {
    t[i] = theta[i] + h;
    const Vec fp = nn::forward(a, t, sigma);
    t[i] = theta[i] - h;
    const Vec fm = nn::forward(a, t, sigma);
    t[i] = theta[i];
    J.col(i) = (fp - fm) / (2.0 * h);
  }
  return J;
}

inline Check check_jacobian(const Options& o) {
  scen::Rng rng(o.seed);
  std::normal_distribution<double> N(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < o.jacobian_nets; ++k) {
    const auto a = random_architecture(rng);
    Vec theta(a.param_count()), sigma(a.input_dim);
    for (auto& v : theta) v = 0.7 * N(rng);
    for (auto& v : sigma) v = N(rng);
    Mat J = nn::jacobian_weights(a, theta, sigma);
    if (o.mutate_jacobian) J(0, J.cols() - 1) += 1e-3 * (1.0 + std::abs(J(0, J.cols() - 1)));
    const Mat F = finite_difference_jacobian(a, theta, sigma, 1e-6);
    const double rel = (J - F).cwiseAbs().maxCoeff() / std::max(F.cwiseAbs().maxCoeff(), 1e-12);
    worst = std::max(worst, rel);
  }
  return {"jacobian matches central differences on random nets", worst < 1e-5,
          "max relative error " + std::to_string(worst)};
}

/// Exhaustive active-set enumeration: for every subset of at most m rows,
/// project u_nom onto the equality manifold, keep feasible candidates, return
/// the closest one.
inline std::optional<Vec> enumeration_oracle(const Vec& u_nom, const Mat& A, const Vec& b) {
  const int r = static_cast<int>(A.rows());
  const int m = static_cast<int>(u_nom.size());
  std::optional<Vec> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << r); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < r; ++i) {
      if (mask & (1u << i)) idx.push_back(i);
    }
    if (static_cast<int>(idx.size()) > m) continue;
    Vec u = u_nom;
    if (!idx.empty()) {
      Mat N(idx.size(), m);
      Vec c(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) {
        N.row(static_cast<Eigen::Index>(j)) = A.row(idx[j]);
        c[static_cast<Eigen::Index>(j)] = b[idx[j]];
      }
      const Mat NNt = N * N.transpose();
      Eigen::FullPivLU<Mat> lu(NNt);
      if (lu.rank() < static_cast<Eigen::Index>(idx.size())) continue;
      u = u_nom - N.transpose() * lu.solve(N * u_nom - c);
    }
    if (((A * u - b).array() > 1e-9).any()) continue;
    const double cost = (u - u_nom).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = u;
    }
  }
  return best;
}

inline Check check_qp(const Options& o) {
  scen::Rng rng(o.seed + 1);
  std::uniform_int_distribution<int> mdist(1, 3), ddist(1, 6);
  std::normal_distribution<double> N(0.0, 1.0);
  double worst = 0.0;
  int mismatched_feasibility = 0;
  for (int k = 0; k < o.qp_instances; ++k) {
    const int m = mdist(rng), d = ddist(rng);
    qp::QpProblem pr;
    pr.u_nom = Vec(m);
    for (auto& v : pr.u_nom) v = 2.0 * N(rng);
    for (int i = 0; i < d; ++i) {
      qp::ConstraintRow row;
      row.a = Vec(m);
      for (auto& v : row.a) v = N(rng);
      row.b = N(rng);
      pr.rows.push_back(row);
    }
    pr.lower = Vec::Constant(m, -3.0);
    pr.upper = Vec::Constant(m, 3.0);
    const auto res = qp::qp_solve(pr);
    const auto st = qp::detail::stack(pr);
    const auto ref = enumeration_oracle(pr.u_nom, st.A, st.b);
    if (ref.has_value() != res.feasible) {
      ++mismatched_feasibility;
      continue;
    }
    if (ref) worst = std::max(worst, (res.u - *ref).lpNorm<Eigen::Infinity>());
  }
  return {"qp matches active-set enumeration", worst < 1e-6 && mismatched_feasibility == 0,
          "max |u - u_oracle| " + std::to_string(worst) + ", feasibility mismatches " +
              std::to_string(mismatched_feasibility)};
}

inline Check check_gamma_soak(const Options& o) {
  scen::Rng rng(o.seed + 2);
  std::normal_distribution<double> N(0.0, 1.0);
  const auto arch = nn::Architecture::resnet(1, 1, 2, 3, nn::Activation::Tanh);
  ident::GainConfig g;
  g.kappa_0 = 3.0;
  g.gamma_init_scale = 2.0;
  Vec theta(arch.param_count());
  for (auto& v : theta) v = N(rng);
  auto s = ident::adaptation_start(theta, g);
  const ident::BallProjection proj{10.0, 0.1};
  double worst_norm = 0.0, worst_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < o.soak_steps; ++k) {
    const double t = k * 0.005;
    const Vec sigma{{std::sin(0.7 * t) + 0.3 * N(rng)}};
    const auto ev = nn::evaluate(arch, s.theta, sigma);
    const Vec target{{std::sin(sigma[0])}};
    s = ident::adapt_step(s, ev.value, ev.jacobian, target, 0.005, g, proj, static_cast<std::size_t>(k));
    if (k % 100 == 0 || k + 1 == o.soak_steps) {
      Eigen::SelfAdjointEigenSolver<Mat> es(s.gamma, Eigen::EigenvaluesOnly);
      worst_norm = std::max(worst_norm, es.eigenvalues().maxCoeff());
      worst_min = std::min(worst_min, es.eigenvalues().minCoeff());
    }
  }
  const bool ok = worst_norm <= g.kappa_0 + 1e-9 && worst_min > 0.0;
  return {"adaptation gain stays SPD and bounded over a long soak", ok,
          "max eigenvalue " + std::to_string(worst_norm) + ", min eigenvalue " + std::to_string(worst_min)};
}

inline Check check_chi(const Options& o) {
  scen::Rng rng(o.seed + 3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int bad = 0;
  for (int k = 0; k < 200; ++k) {
    ident::GainConfig g;
    g.k_x = 1.0 + 9.0 * U(rng);
    g.k_f = 1.0 + 9.0 * U(rng);
    g.k_theta = 0.5 + 2.0 * U(rng);
    g.kappa_0 = 1.0 + 9.0 * U(rng);
    g.gamma_init_scale = 0.5;
    ident::ProblemBounds pb;
    pb.f_bar = 2.0 * U(rng);
    pb.f_dot_bar = U(rng);
    pb.c_1 = 0.2 * U(rng);
    pb.c_2 = 0.1 * U(rng);
    pb.theta_bar = 2.0 * U(rng);
    pb.Xi = 0.5 + 5.0 * U(rng);
    pb.beta_1 = U(rng);
    const auto bc = ident::compute_bound_constants(g, pb);
    if (!(bc.lambda_3 > 0.0)) continue;
    const bool decreasing = (bc.lambda_2 / bc.lambda_1) * bc.Z * bc.Z >= bc.lambda_2 * bc.C / (bc.lambda_1 * bc.lambda_3);
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 400; ++i) {
      const double c = ident::chi_theta(0.05 * i, bc);
      if (c > bc.Xi + 1e-12) ++bad;
      if (decreasing && c > prev + 1e-12) ++bad;
      prev = c;
    }
  }
  return {"parameter-error envelope never exceeds Xi and decays past its crossover", bad == 0,
          std::to_string(bad) + " violations"};
}

inline Check check_envelope(const Options& o) {
  scen::NonPolyParams p;
  const auto sc = scen::make_nonpoly(p);
  int violations = 0, loss_steps = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    sim::SimConfig cfg;
    cfg.dt = sc.dt;
    cfg.duration = sc.duration;
    cfg.losses = sc.losses;
    cfg.seed = o.seed + seed;
    const auto r = sim::simulate(sc, cfg);
    violations += r.summary.envelope_violations;
    for (const auto& rec : r.trace) loss_steps += rec.feedback ? 0 : 1;
  }
  return {"prediction-error envelope dominates ||x - X_hat|| during feedback loss",
          violations == 0 && loss_steps > 0,
          std::to_string(violations) + " violations over " + std::to_string(loss_steps) + " loss steps"};
}

inline Check check_dwell() {
  double worst = 0.0;
  intermittent::LossConstants lc{1.0, 0.5, 0.0, 1.0, 0.0};
  worst = std::max(worst, std::abs(intermittent::max_dwell_time(lc, 6.0 + 3.0, 0.0) - 0.4 * std::log(5.0)));
  worst = std::max(worst, std::abs(intermittent::max_dwell_time(lc, 3.0 + 1.5 + 1e-9, 1.5) -
                                   std::log(1.0 / lc.delta_U()) / lc.lambda_U()));
  intermittent::LossConstants lc2{2.0, 0.3, 0.0, std::sqrt(2.0), 5.0};
  const double K = intermittent::dwell_offset(lc2, 1.5, 1.0);
  const double head = 100.0 - 6.0 * std::sqrt(2.0) * 0.3 - K;
  const double lam = 2.0 * 2.0 + 0.3;
  const double del = 2.0 * 0.3 / lam;
  const double direct = std::log((std::pow(head / (6.0 * 2.0 * std::sqrt(2.0)), 2) + 1.0) / del) / lam;
  worst = std::max(worst, std::abs(intermittent::max_dwell_time(lc2, 100.0, K) - direct));
  return {"dwell-time bound matches direct evaluation", worst < 1e-12, "max deviation " + std::to_string(worst)};
}

inline Report run_suite(const Options& o, std::ostream& os) {
  Report rep;
  auto run = [&](Check c) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    rep.checks.push_back(std::move(c));
  };
  run(check_jacobian(o));
  run(check_qp(o));
  run(check_gamma_soak(o));
  run(check_chi(o));
  run(check_envelope(o));
  run(check_dwell());
  int failed = 0;
  for (const auto& c : rep.checks) failed += c.passed ? 0 : 1;
  os << (failed ? std::to_string(failed) + " check(s) failed\n" : "all checks passed\n");
  return rep;
}

}  // namespace adcbf::verify
