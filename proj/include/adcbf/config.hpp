#pragma once

// Run configuration: a flat `key = value` file format where every scenario
// constant has a key, plus the registry that parses, validates and echoes it.

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adcbf/errors.hpp"
#include "adcbf/harness.hpp"
#include "adcbf/scenarios.hpp"

namespace adcbf::config {

struct Settings {
  std::string scenario = "acc";
  scen::Method method = scen::Method::Adcbf;
  std::uint64_t seed = 0;
  ode::Integrator integrator = ode::Integrator::Rk4;
  std::string output_dir = "out";
  int iterations = 10;
  std::vector<scen::RefKind> trajectories{scen::RefKind::Spiral1, scen::RefKind::Spiral2, scen::RefKind::Figure8};
  unsigned workers = 0;
  scen::AccParams acc;
  scen::NonPolyParams nonpoly;

  scen::Scenario build() const { return build(nonpoly.trajectory); }
  scen::Scenario build(scen::RefKind trajectory) const {
    if (scenario == "acc") return scen::make_acc(acc);
    if (scenario == "nonpoly") {
      auto p = nonpoly;
      p.trajectory = trajectory;
      return scen::make_nonpoly(p);
    }
    throw ConfigError("unknown scenario '" + scenario + "'");
  }

  sim::SimConfig sim_config() const {
    const auto sc = build();
    sim::SimConfig c;
    c.dt = sc.dt;
    c.duration = sc.duration;
    c.seed = seed;
    c.losses = sc.losses;
    c.method = method;
    c.integrator = integrator;
    return c;
  }
};

inline std::string format_double(double v) { return sim::fmt17(v); }

inline double parse_double(const std::string& key, const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE) throw ConfigError("key '" + key + "': not a number: '" + s + "'");
  return v;
}

inline long long parse_integer(const std::string& key, const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    throw ConfigError("key '" + key + "': not an integer: '" + s + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("key '" + key + "': not a boolean: '" + s + "'");
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

struct Param {
  std::string key;
  std::string doc;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

class Registry {
 public:
  explicit Registry(Settings& s) { bind(s); }

  const std::vector<Param>& params() const { return params_; }

  void set(const std::string& key, const std::string& value) {
    for (auto& p : params_) {
      if (p.key == key) {
        p.set(trim(value));
        return;
      }
    }
    throw ConfigError("unknown config key '" + key + "'");
  }

  /// `key = value` per line; `#` starts a comment.
  void load(std::istream& is, const std::string& origin = "config") {
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
      }
      const std::string key = trim(line.substr(0, eq));
      try {
        set(key, line.substr(eq + 1));
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    load(in, path);
  }

  /// Resolved configuration in the file format; loading it reproduces the run.
  std::string echo() const {
    std::ostringstream os;
    for (const auto& p : params_) os << p.key << " = " << p.get() << '\n';
    return os.str();
  }

  nlohmann::ordered_json echo_json() const {
    nlohmann::ordered_json j;
    for (const auto& p : params_) j[p.key] = p.get();
    return j;
  }

  std::string help() const {
    std::ostringstream os;
    for (const auto& p : params_) os << "  " << p.key << " (default " << p.get() << ")\n      " << p.doc << '\n';
    return os.str();
  }

 private:
  std::vector<Param> params_;

  void add(std::string key, std::string doc, std::function<std::string()> get,
           std::function<void(const std::string&)> set) {
    params_.push_back({std::move(key), std::move(doc), std::move(get), std::move(set)});
  }

  void num(const std::string& key, double& ref, const std::string& doc) {
    add(key, doc, [&ref] { return format_double(ref); }, [&ref, key](const std::string& v) { ref = parse_double(key, v); });
  }

  void integer(const std::string& key, int& ref, const std::string& doc) {
    add(key, doc, [&ref] { return std::to_string(ref); },
        [&ref, key](const std::string& v) { ref = static_cast<int>(parse_integer(key, v)); });
  }

  void flag(const std::string& key, bool& ref, const std::string& doc) {
    add(key, doc, [&ref] { return std::string(ref ? "true" : "false"); },
        [&ref, key](const std::string& v) { ref = parse_bool(key, v); });
  }

  void gains(const std::string& pre, ident::GainConfig& g, const std::string& src) {
    num(pre + "k_x", g.k_x, "estimator gain k_x, 1/s (" + src + ")");
    num(pre + "k_f", g.k_f, "estimator gain k_f, 1/s (" + src + ")");
    num(pre + "k_theta", g.k_theta, "weight leakage gain (" + src + ")");
    num(pre + "alpha", g.alpha, "identification gain");
    num(pre + "beta_0", g.beta_0, "maximum forgetting rate, 1/s (" + src + ")");
    num(pre + "kappa_0", g.kappa_0, "adaptation gain norm cap (" + src + ")");
    num(pre + "gamma_init_scale", g.gamma_init_scale, "initial adaptation gain scale, Gamma(0) = scale I (" + src + ")");
    num(pre + "kappa_1_floor", g.kappa_1_floor, "eigenvalue floor of Gamma; 0 selects 1e-6 * gamma_init_scale");
    add(pre + "gamma_norm", "matrix norm in the forgetting factor: spectral | frobenius",
        [&g] { return std::string(g.gamma_norm == ident::GammaNorm::Spectral ? "spectral" : "frobenius"); },
        [&g, pre](const std::string& v) {
          if (v == "spectral") g.gamma_norm = ident::GammaNorm::Spectral;
          else if (v == "frobenius") g.gamma_norm = ident::GammaNorm::Frobenius;
          else throw ConfigError("key '" + pre + "gamma_norm': expected spectral or frobenius");
        });
    add(pre + "theta_scheme", "weight update discretization: explicit | implicit",
        [&g] { return std::string(g.theta_scheme == ident::ThetaScheme::Explicit ? "explicit" : "implicit"); },
        [&g, pre](const std::string& v) {
          if (v == "explicit") g.theta_scheme = ident::ThetaScheme::Explicit;
          else if (v == "implicit") g.theta_scheme = ident::ThetaScheme::LinearlyImplicit;
          else throw ConfigError("key '" + pre + "theta_scheme': expected explicit or implicit");
        });
    integer(pre + "gamma_refresh_interval", g.gamma_refresh_interval, "steps between eigenvalue refreshes of Gamma");
  }

  void bounds(const std::string& pre, ident::ProblemBounds& b) {
    num(pre + "f_bar", b.f_bar, "bound on ||f|| over the safe set");
    num(pre + "f_dot_bar", b.f_dot_bar, "bound on ||df/dt|| over the safe set");
    num(pre + "c_1", b.c_1, "bound on the Taylor remainder plus reconstruction error");
    num(pre + "c_2", b.c_2, "bound on ||Phi'||_F");
    num(pre + "theta_bar", b.theta_bar, "bound on the ideal weights; projection radius is theta_bar + Xi");
    num(pre + "Xi", b.Xi, "parameter-error radius");
    num(pre + "beta_1", b.beta_1, "forgetting floor certified by excitation");
  }

  void activation(const std::string& key, nn::Activation& a) {
    add(key, "hidden activation: tanh | swish | identity", [&a] { return std::string(nn::to_string(a)); },
        [&a](const std::string& v) { a = nn::parse_activation(v); });
  }

  void noise(const std::string& pre, scen::NoiseConfig& n) {
    flag(pre + "noise", n.enabled, "add white Gaussian measurement noise");
    num(pre + "snr_db", n.snr_db, "measurement signal-to-noise ratio, dB");
    add(pre + "noise_coordinates", "comma-separated noisy state indices; 'all' for every coordinate",
        [&n] {
          if (n.coordinates.empty()) return std::string("all");
          std::string s;
          for (std::size_t i = 0; i < n.coordinates.size(); ++i) s += (i ? "," : "") + std::to_string(n.coordinates[i]);
          return s;
        },
        [&n, pre](const std::string& v) {
          n.coordinates.clear();
          if (v == "all") return;
          for (const auto& item : split(v, ',')) {
            n.coordinates.push_back(static_cast<int>(parse_integer(pre + "noise_coordinates", item)));
          }
        });
    flag(pre + "noise_fixed_power", n.fixed_power, "noise variance from noise_reference_power instead of the running signal power");
    num(pre + "noise_reference_power", n.reference_power, "reference signal power for the fixed-power noise mode");
  }

  void bind(Settings& s) {
    add("scenario", "plant: acc | nonpoly", [&s] { return s.scenario; },
        [&s](const std::string& v) {
          if (v != "acc" && v != "nonpoly") throw ConfigError("key 'scenario': expected acc or nonpoly");
          s.scenario = v;
        });
    add("method", "safety filter: adcbf | robust | nominal | adcbf-no-prediction",
        [&s] { return std::string(scen::to_string(s.method)); },
        [&s](const std::string& v) { s.method = scen::parse_method(v); });
    add("seed", "random seed for initial state, weights, noise and loss windows", [&s] { return std::to_string(s.seed); },
        [&s](const std::string& v) {
          const long long x = parse_integer("seed", v);
          if (x < 0) throw ConfigError("key 'seed': must be non-negative");
          s.seed = static_cast<std::uint64_t>(x);
        });
    add("integrator", "plant and predictor integrator: rk4 | euler",
        [&s] { return std::string(ode::to_string(s.integrator)); },
        [&s](const std::string& v) { s.integrator = ode::parse_integrator(v); });
    add("output_dir", "directory receiving traces and summaries", [&s] { return s.output_dir; },
        [&s](const std::string& v) { s.output_dir = v; });
    integer("iterations", s.iterations, "Monte Carlo iterations per trajectory");
    add("trajectories", "Monte Carlo references, comma-separated: spiral1, spiral2, figure8",
        [&s] {
          std::string r;
          for (std::size_t i = 0; i < s.trajectories.size(); ++i) {
            r += (i ? "," : "") + std::string(scen::to_string(s.trajectories[i]));
          }
          return r;
        },
        [&s](const std::string& v) {
          s.trajectories.clear();
          for (const auto& item : split(v, ',')) s.trajectories.push_back(scen::parse_ref(item));
          if (s.trajectories.empty()) throw ConfigError("key 'trajectories': empty list");
        });
    add("workers", "Monte Carlo worker threads; 0 uses every hardware thread", [&s] { return std::to_string(s.workers); },
        [&s](const std::string& v) {
          const long long x = parse_integer("workers", v);
          if (x < 0) throw ConfigError("key 'workers': must be non-negative");
          s.workers = static_cast<unsigned>(x);
        });

    auto& a = s.acc;
    const std::string acc_src = "cruise-control benchmark";
    num("acc.mass", a.mass, "vehicle mass, kg (100)");
    num("acc.f0", a.f0, "rolling resistance constant term, N (0.1)");
    num("acc.f1", a.f1, "rolling resistance linear term, N s/m (5)");
    num("acc.f2", a.f2, "rolling resistance quadratic term, N s^2/m^2 (0.25)");
    num("acc.disturbance_amp", a.disturbance_amp, "unmodeled acceleration amplitude, m/s^2 (30)");
    num("acc.disturbance_freq", a.disturbance_freq, "unmodeled acceleration frequency in v, s/m (0.1)");
    num("acc.v_lead", a.v_lead, "lead vehicle speed, m/s (10)");
    num("acc.v_d", a.v_d, "desired speed, m/s (20)");
    num("acc.v0", a.v0, "initial follower speed, m/s (16)");
    num("acc.D0", a.D0, "initial gap, m (60)");
    num("acc.headway", a.headway, "time headway in the barrier B = -D + headway v, s (1.8)");
    num("acc.gamma_gain", a.gamma_gain, "class-function gain, gamma(x) = gain B(x) (10)");
    num("acc.k1", a.k1, "speed tracking gain (10)");
    integer("acc.depth", a.depth, "hidden layers (2)");
    integer("acc.width", a.width, "neurons per hidden layer (6)");
    activation("acc.activation", a.activation);
    num("acc.weight_variance", a.weight_variance, "initial weight variance, N(0, var) (3)");
    num("acc.delta_bar", a.delta_bar, "disturbance bound used by the robust baseline (30)");
    gains("acc.", a.gains, acc_src);
    bounds("acc.", a.bounds);
    noise("acc.", a.noise);
    num("acc.dt", a.dt, "simulation step, s");
    num("acc.duration", a.duration, "simulated time, s");

    auto& p = s.nonpoly;
    const std::string np_src = "non-polynomial benchmark";
    num("nonpoly.k_e", p.k_e, "tracking gain (10)");
    num("nonpoly.gamma_gain", p.gamma_gain, "class-function gain (10)");
    num("nonpoly.diamond_radius", p.diamond_radius, "safe set |x1| + |x2| <= radius (2)");
    integer("nonpoly.depth", p.depth, "hidden layers (3)");
    integer("nonpoly.width", p.width, "neurons per hidden layer (5)");
    activation("nonpoly.activation", p.activation);
    num("nonpoly.weight_variance", p.weight_variance, "initial weight variance, N(0, var) (0.5)");
    gains("nonpoly.", p.gains, np_src);
    bounds("nonpoly.", p.bounds);
    num("nonpoly.L_U", p.loss.L_U, "Lipschitz rate of the drift mismatch during feedback loss, 1/s");
    num("nonpoly.Delta_U", p.loss.Delta_U, "frozen-model mismatch bound during feedback loss");
    num("nonpoly.rho", p.loss.rho, "Lipschitz constant of grad B (0 for the diamond)");
    num("nonpoly.B_bar", p.loss.B_bar, "bound on ||grad B|| (sqrt 2 for the diamond)");
    num("nonpoly.u_max", p.u_max, "input box half-width per coordinate");
    num("nonpoly.dwell_C_bar", p.dwell_C_bar, "offset C_bar of the dwell-time bound; 0 disables the report");
    num("nonpoly.x0_range", p.x0_range, "initial state ~ U(-r, r) per coordinate (0.2)");
    add("nonpoly.trajectory", "reference for single runs: spiral1 | spiral2 | figure8 | constant",
        [&p] { return std::string(scen::to_string(p.trajectory)); },
        [&p](const std::string& v) { p.trajectory = scen::parse_ref(v); });
    noise("nonpoly.", p.noise);
    num("nonpoly.dt", p.dt, "simulation step, s (0.005)");
    num("nonpoly.duration", p.duration, "simulated time, s (20)");
    add("nonpoly.losses", "feedback-loss windows 'start:end,...' in s, or 'none'",
        [&p] {
          if (p.losses.empty()) return std::string("none");
          std::string r;
          for (std::size_t i = 0; i < p.losses.size(); ++i) {
            r += (i ? "," : "") + format_double(p.losses[i].first) + ":" + format_double(p.losses[i].second);
          }
          return r;
        },
        [&p](const std::string& v) {
          p.losses.clear();
          if (v == "none") return;
          for (const auto& item : split(v, ',')) {
            const auto parts = split(item, ':');
            if (parts.size() != 2) throw ConfigError("key 'nonpoly.losses': expected start:end, got '" + item + "'");
            p.losses.emplace_back(parse_double("nonpoly.losses", parts[0]), parse_double("nonpoly.losses", parts[1]));
          }
        });
    num("nonpoly.rms_start", p.rms_start, "start of the RMS tracking window, s (0)");
    num("nonpoly.rms_end", p.rms_end, "end of the RMS tracking window, s (14)");
  }
};

}  // namespace adcbf::config
