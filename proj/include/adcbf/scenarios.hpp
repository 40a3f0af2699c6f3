#pragma once

// The two benchmark plants (adaptive cruise control and the non-polynomial
// tracking system), their references, nominal tracking laws and the
// measurement-noise model.

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adcbf/errors.hpp"
#include "adcbf/identifier.hpp"
#include "adcbf/intermittent.hpp"
#include "adcbf/nn.hpp"
#include "adcbf/safety_filter.hpp"

namespace adcbf::scen {

using Rng = std::mt19937_64;

enum class Method { Adcbf, Robust, Nominal, AdcbfNoPrediction };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Adcbf: return "adcbf";
    case Method::Robust: return "robust";
    case Method::Nominal: return "nominal";
    case Method::AdcbfNoPrediction: return "adcbf-no-prediction";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "adcbf") return Method::Adcbf;
  if (s == "robust") return Method::Robust;
  if (s == "nominal") return Method::Nominal;
  if (s == "adcbf-no-prediction") return Method::AdcbfNoPrediction;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

inline bool uses_identifier(Method m) { return m == Method::Adcbf || m == Method::AdcbfNoPrediction; }

// ---------------------------------------------------------------------------
// Reference trajectories

enum class RefKind { Spiral1, Spiral2, Figure8, Constant };

inline std::string_view to_string(RefKind k) {
  switch (k) {
    case RefKind::Spiral1: return "spiral1";
    case RefKind::Spiral2: return "spiral2";
    case RefKind::Figure8: return "figure8";
    case RefKind::Constant: return "constant";
  }
  return "?";
}

inline RefKind parse_ref(std::string_view s) {
  if (s == "spiral1") return RefKind::Spiral1;
  if (s == "spiral2") return RefKind::Spiral2;
  if (s == "figure8") return RefKind::Figure8;
  if (s == "constant") return RefKind::Constant;
  throw ConfigError("unknown trajectory '" + std::string(s) + "'");
}

struct ReferenceTrajectory {
  RefKind kind = RefKind::Constant;
  Vec constant = Vec::Zero(2);

  Vec position(double t) const {
    switch (kind) {
      case RefKind::Spiral1: return 0.1 * t * Vec{{std::sin(t), std::cos(t)}};
      case RefKind::Spiral2: return 0.075 * t * Vec{{std::sin(t), std::cos(t)}};
      case RefKind::Figure8: return Vec{{2.0 * std::sin(t), 2.0 * std::sin(t) * std::cos(t)}};
      case RefKind::Constant: return constant;
    }
    return constant;
  }

  Vec velocity(double t) const {
    const double s = std::sin(t), c = std::cos(t);
    switch (kind) {
      case RefKind::Spiral1: return 0.1 * Vec{{s + t * c, c - t * s}};
      case RefKind::Spiral2: return 0.075 * Vec{{s + t * c, c - t * s}};
      case RefKind::Figure8: return Vec{{2.0 * c, 2.0 * std::cos(2.0 * t)}};
      case RefKind::Constant: return Vec::Zero(constant.size());
    }
    return Vec::Zero(constant.size());
  }
};

// ---------------------------------------------------------------------------
// Measurement noise

struct NoiseConfig {
  bool enabled = false;
  double snr_db = std::numeric_limits<double>::infinity();
  /// Noise only on these coordinates; all coordinates when empty.
  std::vector<int> coordinates;
  /// Variance from a fixed reference power instead of the running mean square.
  bool fixed_power = false;
  double reference_power = 1.0;
};

/// Additive white Gaussian noise at a target SNR. The signal power of each
/// coordinate is the running mean square of its clean samples so far.
class MeasurementNoise {
 public:
  MeasurementNoise() = default;
  MeasurementNoise(NoiseConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {}

  Vec measure(const Vec& x) {
    if (!cfg_.enabled || !std::isfinite(cfg_.snr_db)) return x;
    if (power_.size() == 0) power_ = Vec::Zero(x.size());
    ++count_;
    power_ += (x.array().square().matrix() - power_) / static_cast<double>(count_);
    const double scale = std::pow(10.0, -cfg_.snr_db / 10.0);
    Vec y = x;
    auto perturb = [&](Eigen::Index i) {
      const double p = cfg_.fixed_power ? cfg_.reference_power : power_[i];
      const double sd = std::sqrt(p * scale);
      y[i] += sd * normal_(rng_);
    };
    if (cfg_.coordinates.empty()) {
      for (Eigen::Index i = 0; i < x.size(); ++i) perturb(i);
    } else {
      for (int i : cfg_.coordinates) {
        if (i < 0 || i >= x.size()) throw ConfigError("noise coordinate out of range");
        perturb(i);
      }
    }
    return y;
  }

 private:
  NoiseConfig cfg_;
  Rng rng_{0};
  std::normal_distribution<double> normal_{0.0, 1.0};
  Vec power_;
  long count_ = 0;
};

// ---------------------------------------------------------------------------
// Scenario

struct NominalInput {
  Method method;
  double t;
  const Vec& x;
  const Vec& phi;  ///< network output on the identified channels (empty for baselines)
};

struct Scenario {
  std::string name;
  int n = 0;
  int m = 0;
  std::function<Vec(const Vec&)> true_drift;  ///< hidden from the controller
  std::function<Mat(const Vec&)> input_map;
  safety::BarrierCandidate barrier;

  // Identification: the network maps nn_input(x) to the drift of the
  // channels selected by `selector` (n x k); known_drift covers the rest.
  Mat selector;
  std::function<Vec(const Vec&)> nn_input;
  std::function<Vec(const Vec&)> known_drift;
  nn::Architecture arch;
  double weight_variance = 1.0;
  ident::GainConfig gains;
  ident::ProblemBounds bounds;

  // Baseline model and disturbance bound.
  std::function<Vec(const Vec&)> model_drift;
  double delta_bar = 0.0;

  std::function<Vec(const NominalInput&)> nominal;
  std::function<Vec(double)> reference;
  std::function<double(double, const Vec&)> tracking_error;
  std::function<Vec(Rng&)> initial_state;

  NoiseConfig noise;
  std::optional<Vec> u_lower;
  std::optional<Vec> u_upper;
  intermittent::LossConstants loss;
  double dwell_C_bar = 0.0;

  double dt = 0.005;
  double duration = 20.0;
  std::vector<std::pair<double, double>> losses;
  double rms_start = 0.0;
  double rms_end = std::numeric_limits<double>::infinity();

  int identified_dim() const { return static_cast<int>(selector.cols()); }

  /// Drift model in state coordinates: known part plus the network on the
  /// identified channels.
  Vec model_from_network(const Vec& x, const Vec& phi) const { return known_drift(x) + selector * phi; }
};

// ---------------------------------------------------------------------------
// Adaptive cruise control

struct AccParams {
  double mass = 100.0;
  double f0 = 0.1;
  double f1 = 5.0;
  double f2 = 0.25;
  double disturbance_amp = 30.0;
  double disturbance_freq = 0.1;
  double v_lead = 10.0;
  double v_d = 20.0;
  double v0 = 16.0;
  double D0 = 60.0;
  double headway = 1.8;
  double gamma_gain = 10.0;
  double k1 = 10.0;
  int depth = 2;
  int width = 6;
  nn::Activation activation = nn::Activation::Tanh;
  double weight_variance = 3.0;
  double delta_bar = 30.0;
  ident::GainConfig gains{5.0, 10.0, 0.001, 50.0, 2.0, 3.0, 5.0};
  ident::ProblemBounds bounds{30.0, 10.0, 0.1, 1.0, 30.0, 1.0, 0.0, 0.0};
  NoiseConfig noise;
  double dt = 0.005;
  double duration = 30.0;

  double rolling_resistance(double v) const { return f0 + f1 * v + f2 * v * v; }
  double disturbance(double v) const { return disturbance_amp * std::sin(disturbance_freq * v); }
};

/// State (D, v): gap to the lead vehicle and follower speed.
inline Scenario make_acc(const AccParams& p) {
  if (!(p.mass > 0.0)) throw ConfigError("acc.mass must be positive");
  Scenario s;
  s.name = "acc";
  s.n = 2;
  s.m = 1;
  s.true_drift = [p](const Vec& x) -> Vec {
    const double v = x[1];
    return Vec{{p.v_lead - v, -p.rolling_resistance(v) / p.mass + p.disturbance(v)}};
  };
  s.input_map = [p](const Vec&) -> Mat { return Mat{{0.0}, {1.0 / p.mass}}; };
  s.barrier = safety::BarrierCandidate::affine(Mat{{-1.0, p.headway}}, Vec::Zero(1), p.gamma_gain);

  s.selector = Mat{{0.0}, {1.0}};
  s.nn_input = [](const Vec& x) -> Vec { return x.tail(1); };
  s.known_drift = [p](const Vec& x) -> Vec { return Vec{{p.v_lead - x[1], 0.0}}; };
  s.arch = nn::Architecture::resnet(1, 1, p.depth, p.width, p.activation);
  s.weight_variance = p.weight_variance;
  s.gains = p.gains;
  s.bounds = p.bounds;

  s.model_drift = [p](const Vec& x) -> Vec {
    const double v = x[1];
    return Vec{{p.v_lead - v, -p.rolling_resistance(v) / p.mass}};
  };
  s.delta_bar = p.delta_bar;

  s.nominal = [p](const NominalInput& in) -> Vec {
    const double v = in.x[1];
    const double track = -p.mass * p.k1 * (v - p.v_d);
    switch (in.method) {
      case Method::Adcbf:
      case Method::AdcbfNoPrediction: return Vec{{-in.phi[0] + track}};
      case Method::Nominal: return Vec{{p.rolling_resistance(v) + track}};
      case Method::Robust: return Vec{{p.rolling_resistance(v) - p.mass * p.delta_bar + track}};
    }
    return Vec::Zero(1);
  };
  s.reference = [p](double) -> Vec { return Vec{{p.v_d}}; };
  s.tracking_error = [p](double, const Vec& x) { return std::abs(x[1] - p.v_d); };
  s.initial_state = [p](Rng&) -> Vec { return Vec{{p.D0, p.v0}}; };

  s.noise = p.noise;
  s.dt = p.dt;
  s.duration = p.duration;
  return s;
}

// ---------------------------------------------------------------------------
// Non-polynomial tracking system

struct NonPolyParams {
  double k_e = 10.0;
  double gamma_gain = 10.0;
  double diamond_radius = 2.0;
  int depth = 3;
  int width = 5;
  nn::Activation activation = nn::Activation::Tanh;
  double weight_variance = 0.5;
  ident::GainConfig gains{10.0, 5.0, 0.001, 50.0, 2.0, 10.0, 5.0, 0.0, ident::GammaNorm::Spectral,
                          ident::ThetaScheme::LinearlyImplicit};
  ident::ProblemBounds bounds{2.0, 20.0, 0.1, 1.0, 10.0, 0.5, 0.0, 0.0};
  intermittent::LossConstants loss{2.0, 0.5, 0.0, std::sqrt(2.0), 0.0};
  double u_max = 20.0;
  double dwell_C_bar = 250.0;
  double x0_range = 0.2;
  RefKind trajectory = RefKind::Spiral1;
  NoiseConfig noise{true, 50.0, {}, false, 1.0};
  double dt = 0.005;
  double duration = 20.0;
  std::vector<std::pair<double, double>> losses{{10.0, 11.0}, {15.0, 16.0}};
  double rms_start = 0.0;
  double rms_end = 14.0;
};

inline Vec nonpoly_drift(const Vec& x) {
  const double x1 = x[0], x2 = x[1];
  const double th = std::tanh(x2);
  return Vec{{x2 * std::sin(x1) * th * th, x1 * x2 * std::cos(x2) / std::cosh(x2)}};
}

/// Rows +-x1 +-x2 - r of the diamond |x1| + |x2| <= r.
inline safety::BarrierCandidate diamond_barrier(double radius, double gamma_gain) {
  const Mat G{{1.0, 1.0}, {1.0, -1.0}, {-1.0, 1.0}, {-1.0, -1.0}};
  return safety::BarrierCandidate::affine(G, Vec::Constant(4, -radius), gamma_gain);
}

inline Scenario make_nonpoly(const NonPolyParams& p) {
  if (!(p.u_max > 0.0)) throw ConfigError("nonpoly.u_max must be positive");
  Scenario s;
  s.name = "nonpoly";
  s.n = 2;
  s.m = 2;
  s.true_drift = nonpoly_drift;
  s.input_map = [](const Vec&) -> Mat { return Mat::Identity(2, 2); };
  s.barrier = diamond_barrier(p.diamond_radius, p.gamma_gain);

  s.selector = Mat::Identity(2, 2);
  s.nn_input = [](const Vec& x) -> Vec { return x; };
  s.known_drift = [](const Vec&) -> Vec { return Vec::Zero(2); };
  s.arch = nn::Architecture::resnet(2, 2, p.depth, p.width, p.activation);
  s.weight_variance = p.weight_variance;
  s.gains = p.gains;
  s.bounds = p.bounds;

  s.model_drift = [](const Vec&) -> Vec { return Vec::Zero(2); };
  s.delta_bar = p.bounds.f_bar;

  ReferenceTrajectory ref{p.trajectory, Vec::Zero(2)};
  s.nominal = [p, ref](const NominalInput& in) -> Vec {
    Vec u = ref.velocity(in.t) - p.k_e * (in.x - ref.position(in.t));
    if (uses_identifier(in.method)) u -= in.phi;
    return u;
  };
  s.reference = [ref](double t) -> Vec { return ref.position(t); };
  s.tracking_error = [ref](double t, const Vec& x) { return (x - ref.position(t)).norm(); };
  s.initial_state = [p](Rng& rng) -> Vec {
    std::uniform_real_distribution<double> U(-p.x0_range, p.x0_range);
    const double a = U(rng);
    const double b = U(rng);
    return Vec{{a, b}};
  };

  s.noise = p.noise;
  s.u_lower = Vec::Constant(2, -p.u_max);
  s.u_upper = Vec::Constant(2, p.u_max);
  s.loss = p.loss;
  s.loss.u_bar = std::sqrt(2.0) * p.u_max;
  s.dwell_C_bar = p.dwell_C_bar;
  s.dt = p.dt;
  s.duration = p.duration;
  s.losses = p.losses;
  s.rms_start = p.rms_start;
  s.rms_end = p.rms_end;
  return s;
}

}  // namespace adcbf::scen
