#pragma once

#include <cmath>

namespace ghost {

// Forward-mode scalar: value plus one directional tangent.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants
  constexpr Dual(double value, double tangent) : v(value), d(tangent) {}

  constexpr Dual& operator+=(Dual o) { v += o.v; d += o.d; return *this; }
  constexpr Dual& operator-=(Dual o) { v -= o.v; d -= o.d; return *this; }
  constexpr Dual& operator*=(Dual o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  constexpr Dual& operator/=(Dual o) {
    const double q = v / o.v;
    d = (d - q * o.d) / o.v;
    v = q;
    return *this;
  }
};

constexpr Dual operator+(Dual a, Dual b) { return a += b; }
constexpr Dual operator-(Dual a, Dual b) { return a -= b; }
constexpr Dual operator*(Dual a, Dual b) { return a *= b; }
constexpr Dual operator/(Dual a, Dual b) { return a /= b; }
constexpr Dual operator-(Dual a) { return {-a.v, -a.d}; }

inline Dual sqrt(Dual a) {
  const double s = std::sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}

inline Dual exp(Dual a) {
  const double e = std::exp(a.v);
  return {e, e * a.d};
}

inline Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }

constexpr double value_of(double x) { return x; }
constexpr double value_of(Dual x) { return x.v; }
constexpr double tangent_of(double) { return 0.0; }
constexpr double tangent_of(Dual x) { return x.d; }

}  // namespace ghost
