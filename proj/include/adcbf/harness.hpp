#pragma once

// Fixed-step closed-loop simulation with feedback-loss scheduling, run
// metrics, Monte Carlo sweeps and trace persistence.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adcbf/errors.hpp"
#include "adcbf/identifier.hpp"
#include "adcbf/intermittent.hpp"
#include "adcbf/nn.hpp"
#include "adcbf/ode.hpp"
#include "adcbf/qp.hpp"
#include "adcbf/safety_filter.hpp"
#include "adcbf/scenarios.hpp"

namespace adcbf::sim {

using scen::Method;
using scen::Rng;
using scen::Scenario;

using Interval = std::pair<double, double>;

struct SimConfig {
  double dt = 0.005;
  double duration = 20.0;
  std::uint64_t seed = 0;
  std::vector<Interval> losses;
  Method method = Method::Adcbf;
  ode::Integrator integrator = ode::Integrator::Rk4;
  bool record_trace = true;
  double divergence_limit = 1e6;
  /// Applied to every raw sensor sample before the controller may read it.
  std::function<Vec(double, const Vec&)> sensor_hook;
  std::optional<Vec> theta0;
  std::optional<Vec> x0;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(duration >= 0.0)) throw ConfigError("duration must be non-negative");
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : losses) {
      if (!(a < b)) throw ConfigError("loss interval must have start < end");
      if (a < prev) throw ConfigError("loss intervals must be sorted and disjoint");
      if (a < 0.0 || b > duration + 1e-9) throw ConfigError("loss interval outside [0, duration]");
      prev = b;
    }
  }
};

/// Seeded stream for one purpose of one run.
inline Rng stream(std::uint64_t seed, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
  return Rng(seq);
}

enum Stream : std::uint32_t { kInitialState = 1, kWeights = 2, kNoise = 3, kLossWindows = 4 };

struct TraceRecord {
  double t = 0.0;
  Vec x_true;
  Vec x_meas;  ///< value the controller used (held during loss)
  Vec x_pred;  ///< predicted state during loss, else the measurement
  Vec ref;
  double track_err = 0.0;
  Vec u;
  Vec u_nom;
  Vec B;
  double max_B = 0.0;
  double chi = 0.0;
  double gamma_norm = 0.0;
  double beta = 0.0;
  double id_residual = 0.0;  ///< ||f_hat - Phi||
  double id_error = 0.0;     ///< ||f - Phi|| against the hidden drift
  double excitation_min_eig = std::numeric_limits<double>::quiet_NaN();
  bool feedback = true;
  bool qp_feasible = true;
  std::uint64_t active_mask = 0;
  double kkt_residual = 0.0;
  Vec slack;
  double envelope = 0.0;
  double pred_error = 0.0;  ///< ||x - X_hat|| during loss
  double dwell_margin = std::numeric_limits<double>::quiet_NaN();
};

struct RunSummary {
  double max_B = 0.0;
  double steady_B = 0.0;
  double time_outside = 0.0;
  double rms_tracking = 0.0;
  int infeasible_count = 0;
  double runtime_s = 0.0;
  std::size_t steps = 0;
  bool aborted = false;
  std::size_t abort_step = 0;
  std::string abort_reason;
  int envelope_violations = 0;
  double max_onset_error = 0.0;  ///< ||x - X_hat|| at the first step of each outage
  bool gain_condition_ok = true;
  std::vector<std::string> warnings;
};

struct SimResult {
  std::vector<TraceRecord> trace;
  RunSummary summary;
  Vec theta_initial;
  Vec theta_final;
};

struct MetricsWindow {
  double dt = 0.005;
  double rms_start = 0.0;
  double rms_end = std::numeric_limits<double>::infinity();
};

inline RunSummary compute_metrics(const std::vector<TraceRecord>& trace, const MetricsWindow& w) {
  if (trace.empty()) throw Error("compute_metrics needs a non-empty trace");
  RunSummary s;
  s.steps = trace.size();
  s.max_B = -std::numeric_limits<double>::infinity();
  std::size_t outside = 0;
  for (const auto& r : trace) {
    s.max_B = std::max(s.max_B, r.max_B);
    if (r.max_B > 0.0) ++outside;
    if (!r.qp_feasible) ++s.infeasible_count;
  }
  s.time_outside = w.dt * static_cast<double>(outside);

  const std::size_t tail = std::max<std::size_t>(1, trace.size() / 10);
  double acc = 0.0;
  for (std::size_t i = trace.size() - tail; i < trace.size(); ++i) acc += trace[i].max_B;
  s.steady_B = acc / static_cast<double>(tail);

  double sq = 0.0;
  std::size_t cnt = 0;
  for (const auto& r : trace) {
    if (r.t >= w.rms_start - 1e-12 && r.t <= w.rms_end + 1e-12) {
      sq += r.track_err * r.track_err;
      ++cnt;
    }
  }
  s.rms_tracking = cnt ? std::sqrt(sq / static_cast<double>(cnt)) : 0.0;
  return s;
}

inline bool in_loss(double t, const std::vector<Interval>& losses) {
  for (const auto& [a, b] : losses) {
    if (t >= a - 1e-9 && t < b - 1e-9) return true;
  }
  return false;
}

inline std::uint64_t active_bitmask(const std::vector<int>& active) {
  std::uint64_t mask = 0;
  for (int i : active) {
    if (i < 64) mask |= std::uint64_t{1} << i;
  }
  return mask;
}

inline SimResult simulate(const Scenario& sc, const SimConfig& cfg) {
  cfg.validate();
  sc.gains.validate();
  const auto wall0 = std::chrono::steady_clock::now();
  SimResult res;
  RunSummary& sum = res.summary;

  const long steps = std::lround(cfg.duration / cfg.dt);
  const double dt = cfg.dt;
  const bool adaptive = scen::uses_identifier(cfg.method);

  Rng init_rng = stream(cfg.seed, kInitialState);
  Vec x = cfg.x0 ? *cfg.x0 : sc.initial_state(init_rng);
  require_dim(x.size(), sc.n, "initial state");
  Rng weight_rng = stream(cfg.seed, kWeights);
  const Vec theta0 = cfg.theta0 ? *cfg.theta0 : nn::random_weights(sc.arch, sc.weight_variance, weight_rng);
  require_dim(theta0.size(), sc.arch.param_count(), "initial weights");
  res.theta_initial = theta0;
  res.theta_final = theta0;

  if (steps <= 0) {
    sum.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return res;
  }

  scen::MeasurementNoise sensor(sc.noise, stream(cfg.seed, kNoise)());

  ident::BoundConstants bc = ident::compute_bound_constants(sc.gains, sc.bounds);
  sum.gain_condition_ok = bc.lambda_3 > 0.0;
  if (adaptive && !sum.gain_condition_ok) {
    sum.warnings.push_back("gain condition violated (" + ident::lambda3_violation(sc.gains, sc.bounds) +
                           "); parameter-error envelope held at Xi");
  }
  auto chi_at = [&](double t) { return sum.gain_condition_ok ? ident::chi_theta(t, bc) : sc.bounds.Xi; };

  const ident::BallProjection proj{sc.bounds.theta_bar + sc.bounds.Xi, 0.1};
  const Mat& S = sc.selector;
  auto channel_target = [&](const Vec& xm, const Vec& f_hat) -> Vec {
    return f_hat - S.transpose() * sc.known_drift(xm);
  };

  Vec y = sensor.measure(x);
  if (cfg.sensor_hook) y = cfg.sensor_hook(0.0, y);
  Vec y_last = y;
  ident::EstimatorState est =
      ident::estimator_start(S.transpose() * y, S.transpose() * y, Vec::Zero(S.cols()), sc.gains);
  ident::AdaptationState ada = ident::adaptation_start(theta0, sc.gains);
  ident::ExcitationMonitor excitation;
  intermittent::PredictorState pred;
  double onset_error = 0.0;
  bool feedback_prev = true;

  if (cfg.record_trace) res.trace.reserve(static_cast<std::size_t>(steps));
  std::vector<TraceRecord> metrics_trace;

  auto finish_abort = [&](std::size_t k, const std::string& why) {
    sum.aborted = true;
    sum.abort_step = k;
    sum.abort_reason = why;
  };

  std::size_t k = 0;
  try {
    for (k = 0; k < static_cast<std::size_t>(steps); ++k) {
      const double t = static_cast<double>(k) * dt;
      const bool feedback = !in_loss(t, cfg.losses);

      // (1) measure, or predict while feedback is denied.
      if (k > 0) {
        y = sensor.measure(x);
        if (cfg.sensor_hook) y = cfg.sensor_hook(t, y);
      }
      if (feedback) {
        if (!feedback_prev && adaptive) est = ident::estimator_reset(est, S.transpose() * y, sc.gains);
        y_last = y;
      } else if (feedback_prev) {
        pred = intermittent::predictor_start(y_last, ada.theta, t);
      }

      TraceRecord rec;
      rec.t = t;
      rec.x_true = x;
      rec.feedback = feedback;
      rec.x_meas = y_last;
      rec.ref = sc.reference(t);
      rec.track_err = sc.tracking_error(t, x);
      rec.B = sc.barrier.value(x);
      rec.max_B = rec.B.size() ? rec.B.maxCoeff() : -std::numeric_limits<double>::infinity();

      const bool predicting = !feedback && cfg.method == Method::Adcbf;
      const Vec& xc = predicting ? pred.X_hat : y_last;  // state the controller acts on
      rec.x_pred = xc;
      const Mat g = sc.input_map(xc);

      // (2)-(3) network evaluation and envelope
      const Vec& theta_used = feedback ? ada.theta : (predicting ? pred.theta_frozen : ada.theta);
      nn::Evaluation ev;
      Vec phi_full = Vec::Zero(sc.n);
      Mat phi_prime_full;
      if (adaptive) {
        ev = nn::evaluate(sc.arch, theta_used, sc.nn_input(xc));
        phi_full = sc.model_from_network(xc, ev.value);
        phi_prime_full = S * ev.jacobian;
        rec.id_error = (S.transpose() * (sc.true_drift(x) - sc.known_drift(x)) - ev.value).norm();
      }
      const double chi = chi_at(t);
      rec.chi = adaptive ? chi : 0.0;

      // (4) constraint rows
      qp::QpProblem prob;
      prob.lower = sc.u_lower;
      prob.upper = sc.u_upper;
      const Vec empty;
      prob.u_nom = sc.nominal({cfg.method, t, xc, adaptive ? ev.value : empty});
      if (predicting) {
        rec.envelope = intermittent::xtilde_envelope(t, sc.loss, pred.t_loss_start);
        rec.pred_error = (x - pred.X_hat).norm();
        if (t == pred.t_loss_start) {
          onset_error = rec.pred_error;
          sum.max_onset_error = std::max(sum.max_onset_error, onset_error);
        }
        const double grown = onset_error * onset_error *
                             std::exp(sc.loss.lambda_U() * (t - pred.t_loss_start));
        if (rec.pred_error > std::sqrt(grown + rec.envelope * rec.envelope) + 1e-9) ++sum.envelope_violations;
        prob.rows = intermittent::build_no_feedback_rows(xc, sc.barrier, phi_full, g, sc.loss, rec.envelope);
        if (sc.dwell_C_bar > 0.0) {
          const double gn = g.jacobiSvd().singularValues()[0];
          try {
            const double K = intermittent::dwell_offset(sc.loss, phi_full.norm(), gn);
            rec.dwell_margin = intermittent::max_dwell_time(sc.loss, sc.dwell_C_bar, K) - (t - pred.t_loss_start);
          } catch (const ConfigError&) {
            rec.dwell_margin = -std::numeric_limits<double>::infinity();
          }
        }
      } else {
        switch (cfg.method) {
          case Method::Adcbf:
          case Method::AdcbfNoPrediction:
            prob.rows = safety::build_adcbf_rows(xc, sc.barrier, phi_full, phi_prime_full, g, chi, sc.bounds.c_1);
            break;
          case Method::Robust:
            prob.rows = safety::build_robust_rows(xc, sc.barrier, sc.model_drift(xc), sc.delta_bar, g, S);
            break;
          case Method::Nominal:
            prob.rows = safety::build_nominal_rows(xc, sc.barrier, sc.model_drift(xc), g);
            break;
        }
      }

      // (5) safety filter
      const qp::QpResult q = qp::qp_solve(prob);
      rec.u = q.u;
      rec.u_nom = prob.u_nom;
      rec.qp_feasible = q.feasible;
      rec.active_mask = active_bitmask(q.active_set);
      rec.kkt_residual = q.kkt_residual;
      rec.slack = q.slack.head(static_cast<Eigen::Index>(prob.rows.size()));

      // identifier update (only with feedback)
      if (adaptive && feedback) {
        est = ident::estimator_step(est, S.transpose() * y, q.u, S.transpose() * g, dt, sc.gains, k);
        const Vec target = channel_target(y, est.f_hat);
        rec.id_residual = (target - ev.value).norm();
        excitation.add(ev.jacobian, dt);
        ada = ident::adapt_step(ada, ev.value, ev.jacobian, target, dt, sc.gains, proj, k);
      }
      rec.gamma_norm = ada.gamma_norm;
      rec.beta = ada.beta;
      rec.excitation_min_eig = excitation.last_min_eig;

      // (6) plant and predictor, input held over the step
      const Vec u = q.u;
      auto plant = [&](const Vec& z) -> Vec { return sc.true_drift(z) + sc.input_map(z) * u; };
      x = ode::step(cfg.integrator, plant, x, dt);
      if (predicting) {
        auto model = [&](const Vec& z) -> Vec {
          return sc.model_from_network(z, nn::forward(sc.arch, pred.theta_frozen, sc.nn_input(z)));
        };
        pred = intermittent::predictor_step(pred, u, model, sc.input_map, dt, cfg.integrator, k);
      }
      feedback_prev = feedback;

      // (7) record
      if (!q.feasible) ++sum.infeasible_count;
      if (cfg.record_trace) {
        res.trace.push_back(std::move(rec));
      } else {
        TraceRecord slim;
        slim.t = rec.t;
        slim.max_B = rec.max_B;
        slim.track_err = rec.track_err;
        slim.qp_feasible = rec.qp_feasible;
        metrics_trace.push_back(std::move(slim));
      }

      if (!x.allFinite() || x.norm() > cfg.divergence_limit) {
        finish_abort(k, "state diverged");
        break;
      }
    }
  } catch (const NumericalFault& e) {
    finish_abort(k, e.what());
  }

  res.theta_final = ada.theta;
  const auto& tr = cfg.record_trace ? res.trace : metrics_trace;
  if (!tr.empty()) {
    RunSummary m = compute_metrics(tr, {dt, sc.rms_start, sc.rms_end});
    sum.max_B = m.max_B;
    sum.steady_B = m.steady_B;
    sum.time_outside = m.time_outside;
    sum.rms_tracking = m.rms_tracking;
    sum.steps = m.steps;
  }
  sum.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return res;
}

struct LossEstimate {
  double mismatch = 0.0;   ///< max ||f(x) - model(x)|| over the sampled safe points
  double lipschitz = 0.0;  ///< max finite-difference slope of f between neighbouring samples
  std::size_t samples = 0;
};

/// Grid-samples the safe set inside [-half_width, half_width]^n to suggest Delta_U and L_U for a given theta.
inline LossEstimate estimate_loss_constants(const Scenario& sc, const Vec& theta, double half_width,
                                            int per_axis = 41) {
  if (per_axis < 2) throw ConfigError("estimate_loss_constants needs at least 2 samples per axis");
  const int n = static_cast<int>(sc.n);
  const double h = 2.0 * half_width / (per_axis - 1);
  LossEstimate out;
  std::vector<int> idx(n, 0);
  auto point = [&](const std::vector<int>& i) {
    Vec x(n);
    for (int d = 0; d < n; ++d) x[d] = -half_width + h * i[d];
    return x;
  };
  for (;;) {
    const Vec x = point(idx);
    if (sc.barrier.contains(x)) {
      const Vec f = sc.true_drift(x);
      const Vec model = sc.model_from_network(x, nn::forward(sc.arch, theta, sc.nn_input(x)));
      out.mismatch = std::max(out.mismatch, (f - model).norm());
      for (int d = 0; d < n; ++d) {
        if (idx[d] + 1 >= per_axis) continue;
        auto j = idx;
        ++j[d];
        const Vec y = point(j);
        if (sc.barrier.contains(y)) out.lipschitz = std::max(out.lipschitz, (sc.true_drift(y) - f).norm() / h);
      }
      ++out.samples;
    }
    int d = 0;
    while (d < n && ++idx[d] == per_axis) idx[d++] = 0;
    if (d == n) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Two 1 s outages starting at U(0, 9) and U(10, 19).
inline std::vector<Interval> draw_loss_windows(std::uint64_t seed) {
  Rng rng = stream(seed, kLossWindows);
  std::uniform_real_distribution<double> first(0.0, 9.0), second(10.0, 19.0);
  const double a = first(rng);
  const double b = second(rng);
  return {{a, a + 1.0}, {b, b + 1.0}};
}

struct TrialResult {
  Method method;
  scen::RefKind trajectory;
  int iteration = 0;
  std::uint64_t seed = 0;
  std::vector<Interval> losses;
  RunSummary summary;
};

struct TableRow {
  std::string method;
  std::string trajectory;
  double max_B = 0.0;
  double avg_max_B = 0.0;
  double avg_time_outside = 0.0;
  int trials = 0;
};

struct MonteCarloResult {
  std::vector<TrialResult> trials;
  std::vector<TableRow> table;
};

struct MonteCarloConfig {
  std::vector<scen::RefKind> trajectories{scen::RefKind::Spiral1, scen::RefKind::Spiral2, scen::RefKind::Figure8};
  std::vector<Method> methods{Method::Adcbf, Method::AdcbfNoPrediction};
  int iterations = 10;
  std::uint64_t base_seed = 0;
  unsigned workers = 0;  ///< 0 = hardware concurrency
  SimConfig sim;
};

inline std::vector<TableRow> aggregate(const std::vector<TrialResult>& trials, const std::vector<Method>& methods,
                                       const std::vector<scen::RefKind>& trajectories) {
  std::vector<TableRow> table;
  for (Method m : methods) {
    std::vector<TableRow> rows;
    for (auto traj : trajectories) {
      TableRow r{std::string(scen::to_string(m)), std::string(scen::to_string(traj)),
                 -std::numeric_limits<double>::infinity(), 0.0, 0.0, 0};
      for (const auto& tr : trials) {
        if (tr.method != m || tr.trajectory != traj) continue;
        r.max_B = std::max(r.max_B, tr.summary.max_B);
        r.avg_max_B += tr.summary.max_B;
        r.avg_time_outside += tr.summary.time_outside;
        ++r.trials;
      }
      if (r.trials > 0) {
        r.avg_max_B /= r.trials;
        r.avg_time_outside /= r.trials;
      }
      rows.push_back(r);
    }
    TableRow avg{std::string(scen::to_string(m)), "average", 0.0, 0.0, 0.0, 0};
    for (const auto& r : rows) {
      avg.max_B += r.max_B;
      avg.avg_max_B += r.avg_max_B;
      avg.avg_time_outside += r.avg_time_outside;
      avg.trials += r.trials;
    }
    if (!rows.empty()) {
      const double nr = static_cast<double>(rows.size());
      avg.max_B /= nr;
      avg.avg_max_B /= nr;
      avg.avg_time_outside /= nr;
    }
    rows.push_back(avg);
    table.insert(table.end(), rows.begin(), rows.end());
  }
  return table;
}

/// `factory` builds the scenario for one reference trajectory.
inline MonteCarloResult monte_carlo(const std::function<Scenario(scen::RefKind)>& factory,
                                    const MonteCarloConfig& mc) {
  if (mc.iterations < 1) throw ConfigError("iterations must be >= 1");
  std::vector<Scenario> scenarios;
  for (auto traj : mc.trajectories) scenarios.push_back(factory(traj));

  struct Job {
    std::size_t traj;
    int iter;
    Method method;
  };
  std::vector<Job> jobs;
  for (std::size_t ti = 0; ti < mc.trajectories.size(); ++ti) {
    for (int i = 0; i < mc.iterations; ++i) {
      for (Method m : mc.methods) jobs.push_back({ti, i, m});
    }
  }

  MonteCarloResult out;
  out.trials.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        const Job& job = jobs[j];
        SimConfig cfg = mc.sim;
        cfg.seed = mc.base_seed + static_cast<std::uint64_t>(job.iter);
        cfg.method = job.method;
        cfg.losses = draw_loss_windows(cfg.seed);
        cfg.record_trace = false;
        const SimResult r = simulate(scenarios[job.traj], cfg);
        out.trials[j] = {job.method, mc.trajectories[job.traj], job.iter, cfg.seed, cfg.losses, r.summary};
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  unsigned nw = mc.workers ? mc.workers : std::max(1u, std::thread::hardware_concurrency());
  nw = std::min<unsigned>(nw, static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < nw; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  out.table = aggregate(out.trials, mc.methods, mc.trajectories);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  if (trace.empty()) {
    os << "t\n";
    return;
  }
  const auto& r0 = trace.front();
  auto vec_header = [&](const char* name, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << name << '_' << i;
  };
  os << "t";
  vec_header("x_true", r0.x_true.size());
  vec_header("x_meas", r0.x_meas.size());
  vec_header("x_pred", r0.x_pred.size());
  vec_header("ref", r0.ref.size());
  os << ",track_err";
  vec_header("u", r0.u.size());
  vec_header("u_nom", r0.u_nom.size());
  vec_header("B", r0.B.size());
  os << ",max_B,chi,gamma_norm,beta,id_residual,id_error,excitation_min_eig,feedback,qp_feasible,active_set,"
        "kkt_residual";
  vec_header("slack", r0.slack.size());
  os << ",envelope,pred_error,dwell_margin\n";

  auto vec_out = [&](const Vec& v, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << (i < v.size() ? fmt17(v[i]) : "nan");
  };
  for (const auto& r : trace) {
    os << fmt17(r.t);
    vec_out(r.x_true, r0.x_true.size());
    vec_out(r.x_meas, r0.x_meas.size());
    vec_out(r.x_pred, r0.x_pred.size());
    vec_out(r.ref, r0.ref.size());
    os << ',' << fmt17(r.track_err);
    vec_out(r.u, r0.u.size());
    vec_out(r.u_nom, r0.u_nom.size());
    vec_out(r.B, r0.B.size());
    os << ',' << fmt17(r.max_B) << ',' << fmt17(r.chi) << ',' << fmt17(r.gamma_norm) << ',' << fmt17(r.beta) << ','
       << fmt17(r.id_residual) << ',' << fmt17(r.id_error) << ',' << fmt17(r.excitation_min_eig) << ','
       << (r.feedback ? 1 : 0) << ',' << (r.qp_feasible ? 1 : 0) << ',' << r.active_mask << ','
       << fmt17(r.kkt_residual);
    vec_out(r.slack, r0.slack.size());
    os << ',' << fmt17(r.envelope) << ',' << fmt17(r.pred_error) << ',' << fmt17(r.dwell_margin) << '\n';
  }
}

inline nlohmann::ordered_json summary_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["max_B"] = s.max_B;
  j["steady_B"] = s.steady_B;
  j["time_outside_s"] = s.time_outside;
  j["rms_tracking"] = s.rms_tracking;
  j["infeasible_count"] = s.infeasible_count;
  j["runtime_s"] = s.runtime_s;
  j["steps"] = s.steps;
  j["aborted"] = s.aborted;
  if (s.aborted) {
    j["abort_step"] = s.abort_step;
    j["abort_reason"] = s.abort_reason;
  }
  j["envelope_violations"] = s.envelope_violations;
  j["max_onset_error"] = s.max_onset_error;
  j["gain_condition_ok"] = s.gain_condition_ok;
  j["warnings"] = s.warnings;
  return j;
}

inline void write_table_csv(std::ostream& os, const std::vector<TableRow>& table) {
  os << "method,trajectory,max_B,avg_max_B,avg_time_outside_s,trials\n";
  for (const auto& r : table) {
    os << r.method << ',' << r.trajectory << ',' << fmt17(r.max_B) << ',' << fmt17(r.avg_max_B) << ','
       << fmt17(r.avg_time_outside) << ',' << r.trials << '\n';
  }
}

}  // namespace adcbf::sim
