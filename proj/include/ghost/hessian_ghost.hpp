#pragma once

// Quadratic (Hessian) step scale versus ghost scale for the top-2 reduced loss
// l(t) = log(1 + exp(-(delta + gap t))).

#include <cmath>
#include <limits>
#include <optional>

#include "ghost/error.hpp"

namespace ghost {

struct MarginState {
  double delta = 0.0;      ///< z_y - z_c
  double slope_gap = 0.0;  ///< a_y - a_c
};

/// sigma(delta) (1 - sigma(delta)), evaluated as e^{-|d|} / (1 + e^{-|d|})^2.
inline double logistic_curvature(double delta) {
  const double e = std::exp(-std::abs(delta));
  return e / ((1.0 + e) * (1.0 + e));
}

/// l''(0) = sigma(delta)(1 - sigma(delta)) gap^2.
inline double directional_curvature(const MarginState& m) {
  return logistic_curvature(m.delta) * m.slope_gap * m.slope_gap;
}

/// tau_H = 2 / kappa; infinite for kappa <= 0 (no quadratic scale).
inline double hessian_step(double kappa) {
  if (!(kappa > 0.0)) return std::numeric_limits<double>::infinity();
  return 2.0 / kappa;
}

struct GhostVsHessian {
  double tau_h;        ///< 2 / l''(0)
  double rho;          ///< exact binary radius sqrt(delta^2 + pi^2) / |gap|
  double rho_a;        ///< conservative bound pi / |gap|
  double ratio;        ///< tau_h / rho_a
  double ratio_exact;  ///< tau_h / rho
};

inline GhostVsHessian ghost_vs_hessian(const MarginState& m) {
  if (m.slope_gap == 0.0) throw Error("ghost_vs_hessian: degenerate slope gap");
  GhostVsHessian g{};
  g.tau_h = hessian_step(directional_curvature(m));
  g.rho = std::hypot(m.delta, kPi) / std::abs(m.slope_gap);
  g.rho_a = kPi / std::abs(m.slope_gap);
  g.ratio = g.tau_h / g.rho_a;
  g.ratio_exact = g.tau_h / g.rho;
  return g;
}

/// Asymptotic crossover margin ln(pi |gap| / 2).
inline double crossover_margin(double slope_gap) {
  require(slope_gap != 0.0, "crossover_margin: degenerate slope gap");
  return std::log(kPi * std::abs(slope_gap) / 2.0);
}

/// Margin delta >= 0 where tau_H = rho_a, by bisection on [0, hi]. The ratio
/// is even in delta with minimum 8 / (pi |gap|) at 0, so no crossover exists
/// for |gap| <= 8 / pi.
inline std::optional<double> crossover_margin_refined(double slope_gap, double hi = 50.0) {
  require(slope_gap != 0.0, "crossover_margin: degenerate slope gap");
  const double g = std::abs(slope_gap);
  // f(delta) = tau_H / rho_a - 1 = 2 / (pi g sigma(1 - sigma)) - 1, increasing on [0, inf)
  auto f = [g](double d) { return 2.0 / (kPi * g * logistic_curvature(d)) - 1.0; };
  double lo = 0.0;
  if (f(lo) >= 0.0) return std::nullopt;
  if (f(hi) <= 0.0) return std::nullopt;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace ghost
