#pragma once

// Convergence-radius bounds for softmax cross-entropy along a direction v.
//
// With linearized logits z_k(t) = z_k + a_k t the loss is log F(t) up to a
// linear term, so its Taylor radius is the modulus of the nearest zero of
// F(t) = sum_k exp(z_k) exp(a_k t). Every such zero has |Im t| >= pi/Delta_a.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ghost/error.hpp"
#include "ghost/expsum.hpp"

namespace ghost {

/// Per-sample directional logit derivatives a_k = grad z_k . v.
struct DirectionalSlopes {
  std::vector<double> a;
  std::size_t sample_id = 0;
};

/// Current logits and target class of one sample.
struct LogitState {
  std::vector<double> z;
  std::size_t target = 0;
};

struct RadiusReport {
  double rho_a = kInfinity;                 ///< pi / delta_a_max, or infinity
  std::optional<double> rho_star;           ///< exact radius, when requested
  std::optional<ComplexPoint> ghost;        ///< nearest ghost location
  std::optional<std::size_t> bottleneck_sample;
  double delta_a_max = 0.0;
};

inline void validate(const DirectionalSlopes& s) {
  require(s.a.size() >= 2, "DirectionalSlopes: need at least two classes");
}

inline void validate(const LogitState& st) {
  require(st.z.size() >= 2, "LogitState: need at least two classes");
  require(st.target < st.z.size(), "LogitState: target out of range");
}

/// Delta_a = max_k a_k - min_k a_k.
inline double spread(const DirectionalSlopes& s) {
  validate(s);
  const auto [lo, hi] = std::minmax_element(s.a.begin(), s.a.end());
  return *hi - *lo;
}

/// Exact two-class radius sqrt(delta^2 + pi^2) / Delta_a.
inline double binary_radius(double delta, double delta_a) {
  require(delta_a > 0.0, "binary_radius: degenerate spread");
  return std::hypot(delta, kPi) / delta_a;
}

/// rho_a = pi / Delta_a; infinite for zero spread.
inline double lower_bound(const DirectionalSlopes& s) {
  const double d = spread(s);
  return d > 0.0 ? kPi / d : kInfinity;
}

struct Ghost {
  ComplexPoint location;
  double modulus = 0.0;
};

/// Top-2 reduction: competitor c = argmax_{k != y} z_k (lowest index on ties),
/// ghost at (delta + i*pi) / Delta_{y,c}.
inline Ghost per_sample_ghost(const LogitState& state, const DirectionalSlopes& s) {
  validate(state);
  validate(s);
  require(state.z.size() == s.a.size(), "per_sample_ghost: logits and slopes differ in length");
  const std::size_t y = state.target;
  std::size_t c = (y == 0) ? 1 : 0;
  for (std::size_t k = 0; k < state.z.size(); ++k)
    if (k != y && state.z[k] > state.z[c]) c = k;
  const double delta = state.z[y] - state.z[c];
  const double gap = s.a[y] - s.a[c];
  if (gap == 0.0) throw Error("per_sample_ghost: top-2 degenerate (infinite per-sample radius)");
  return {ComplexPoint(delta, kPi) / gap, std::hypot(delta, kPi) / std::abs(gap)};
}

/// Builds the partition sum for a sample. Logits are shifted by their max;
/// a global positive factor moves no zeros.
inline ExpSum partition_sum(const LogitState& state, const DirectionalSlopes& s) {
  validate(state);
  validate(s);
  require(state.z.size() == s.a.size(), "partition_sum: logits and slopes differ in length");
  const double zmax = *std::max_element(state.z.begin(), state.z.end());
  std::vector<double> lw(state.z.size());
  std::transform(state.z.begin(), state.z.end(), lw.begin(), [&](double z) { return z - zmax; });
  return ExpSum::from_log_weights(std::move(lw), s.a);
}

/// Modulus of the nearest partition zero; infinite when the spread is zero.
inline double exact_radius(const LogitState& state, const DirectionalSlopes& s, const ZeroSearchConfig& cfg = {}) {
  if (spread(s) == 0.0) return kInfinity;
  return nearest_zero(partition_sum(state, s), cfg).modulus;
}

/// rho_a over a set of samples from slopes alone. Bottleneck is the first
/// sample attaining the maximum spread.
inline RadiusReport batch_radius(std::span<const DirectionalSlopes> samples) {
  require(!samples.empty(), "batch_radius: no samples");
  RadiusReport rep;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = spread(samples[i]);
    if (!rep.bottleneck_sample || d > rep.delta_a_max) {
      rep.delta_a_max = d;
      rep.bottleneck_sample = samples[i].sample_id;
    }
  }
  rep.rho_a = rep.delta_a_max > 0.0 ? kPi / rep.delta_a_max : kInfinity;
  return rep;
}

struct SampleSlopes {
  LogitState state;
  DirectionalSlopes slopes;
};

struct BatchRadiusOptions {
  bool exact = false;
  ZeroSearchConfig zero_search{};
};

/// As above, plus the bottleneck's top-2 ghost, or, with `exact`, the minimum
/// exact radius over all samples and the zero that attains it.
inline RadiusReport batch_radius(std::span<const SampleSlopes> samples, const BatchRadiusOptions& opts) {
  require(!samples.empty(), "batch_radius: no samples");
  std::vector<DirectionalSlopes> slopes;
  slopes.reserve(samples.size());
  for (const auto& s : samples) slopes.push_back(s.slopes);
  RadiusReport rep = batch_radius(std::span<const DirectionalSlopes>(slopes));

  if (!opts.exact) {
    for (const auto& s : samples) {
      if (s.slopes.sample_id != *rep.bottleneck_sample) continue;
      try {
        rep.ghost = per_sample_ghost(s.state, s.slopes).location;
      } catch (const Error&) {
        // Top-2 pair has no slope gap; no ghost under the reduction.
      }
      break;
    }
    return rep;
  }

  for (const auto& s : samples) {
    if (spread(s.slopes) == 0.0) continue;
    const NearestZero nz = nearest_zero(partition_sum(s.state, s.slopes), opts.zero_search);
    if (!rep.rho_star || nz.modulus < *rep.rho_star) {
      rep.rho_star = nz.modulus;
      rep.ghost = nz.zero;
    }
  }
  if (!rep.rho_star) rep.rho_star = kInfinity;
  return rep;
}

/// r = tau / rho_a; zero for an infinite radius.
inline double normalized_step(double tau, double rho_a) {
  require(tau >= 0.0, "normalized_step: tau must be nonnegative");
  require(rho_a > 0.0, "normalized_step: rho_a must be positive");
  if (std::isinf(rho_a)) return 0.0;
  return tau / rho_a;
}

/// rho_a(T) = pi * T / Delta_a for logits z / T.
inline double temperature_radius(const DirectionalSlopes& s, double temperature) {
  require(temperature > 0.0, "temperature_radius: invalid temperature");
  const double d = spread(s);
  return d > 0.0 ? kPi * temperature / d : kInfinity;
}

struct LinearizationQuality {
  double epsilon = 0.0;
  std::optional<double> rho_true_floor;  ///< empty: no guarantee (epsilon >= 1)
};

/// Rouche-style perturbation parameter eps = C pi^2 / (2 Delta_a^2 w_min) and
/// the resulting floor (pi / Delta_a)(1 - eps) on the true radius.
inline LinearizationQuality linearization_epsilon(double curvature, double delta_a, double w_min) {
  require(curvature >= 0.0, "linearization_epsilon: curvature must be nonnegative");
  require(delta_a > 0.0, "linearization_epsilon: spread must be positive");
  require(w_min > 0.0, "linearization_epsilon: w_min must be positive");
  LinearizationQuality q;
  q.epsilon = curvature * kPi * kPi / (2.0 * delta_a * delta_a * w_min);
  if (q.epsilon < 1.0) q.rho_true_floor = (kPi / delta_a) * (1.0 - q.epsilon);
  return q;
}

/// Smallest softmax probability, min_k exp(z_k - max z) / sum.
inline double min_normalized_weight(std::span<const double> z) {
  require(z.size() >= 2, "min_normalized_weight: need at least two logits");
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - zmax);
  const double zmin = *std::min_element(z.begin(), z.end());
  return std::exp(zmin - zmax) / total;
}

/// Logit curvature C = max_k |z_k(h) - 2 z_k(0) + z_k(-h)| / h^2 from a
/// callable mapping a step t to the logit vector at theta + t v.
inline double estimate_logit_curvature(const std::function<std::vector<double>(double)>& logits_at, double h) {
  require(h > 0.0, "estimate_logit_curvature: step must be positive");
  const auto zp = logits_at(h), z0 = logits_at(0.0), zm = logits_at(-h);
  require(zp.size() == z0.size() && zm.size() == z0.size(), "estimate_logit_curvature: inconsistent logits");
  double c = 0.0;
  for (std::size_t k = 0; k < z0.size(); ++k) c = std::max(c, std::abs(zp[k] - 2.0 * z0[k] + zm[k]) / (h * h));
  return c;
}

}  // namespace ghost
