#pragma once

#include <string_view>

#include "adcbf/errors.hpp"

namespace adcbf::ode {

enum class Integrator { Rk4, Euler };

inline Integrator parse_integrator(std::string_view s) {
  if (s == "rk4") return Integrator::Rk4;
  if (s == "euler") return Integrator::Euler;
  throw ConfigError("unknown integrator '" + std::string(s) + "'");
}

inline std::string_view to_string(Integrator i) { return i == Integrator::Rk4 ? "rk4" : "euler"; }

/// One fixed step of x' = rhs(x) (input held constant by the caller).
template <class Rhs>
Vec step(Integrator method, const Rhs& rhs, const Vec& x, double dt) {
  if (method == Integrator::Euler) return x + dt * rhs(x);
  const Vec k1 = rhs(x);
  const Vec k2 = rhs(Vec(x + 0.5 * dt * k1));
  const Vec k3 = rhs(Vec(x + 0.5 * dt * k2));
  const Vec k4 = rhs(Vec(x + dt * k3));
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace adcbf::ode
