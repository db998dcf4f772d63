#pragma once

// KL view of the radius along the softmax path p(t) = softmax(z + t a).
// K(t) = log sum_i exp(z_i + t a_i) is the cumulant generating function of the
// slopes under p(0); its Bregman gap K(t) - K(0) - t K'(0) is KL(p(0) || p(t)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ghost/error.hpp"

namespace ghost {

struct SoftmaxPath {
  std::vector<double> z;
  std::vector<double> a;

  void validate() const {
    require(z.size() == a.size(), "SoftmaxPath: logits and slopes differ in length");
    require(z.size() >= 2, "SoftmaxPath: need at least two classes");
  }

  double spread() const {
    const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
    return *hi - *lo;
  }
};

namespace detail {

inline double lse(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline std::vector<double> base_probs(const SoftmaxPath& path) {
  const double k0 = lse(path.z);
  std::vector<double> p(path.z.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(path.z[i] - k0);
  return p;
}

// Slopes centred on their mean under p(0).
struct Centred {
  std::vector<double> p0;
  std::vector<double> b;
};

inline Centred centre(const SoftmaxPath& path) {
  Centred c{base_probs(path), path.a};
  double mu = 0.0;
  for (std::size_t i = 0; i < c.b.size(); ++i) mu += c.p0[i] * path.a[i];
  for (double& v : c.b) v -= mu;
  return c;
}

}  // namespace detail

/// log-partition K(t).
inline double log_partition(const SoftmaxPath& path, double t) {
  path.validate();
  std::vector<double> v(path.z.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = path.z[i] + t * path.a[i];
  return detail::lse(v);
}

/// KL(p(t) || p(0)) = sum_i p_i(t) log(p_i(t) / p_i(0)).
/// Evaluated as t E_t[b] - G(t) with b the p(0)-centred slopes and
/// G(t) = log E_0[exp(t b)], using expm1/log1p so small steps keep full
/// relative precision.
inline double kl_exact(const SoftmaxPath& path, double t) {
  path.validate();
  require(std::isfinite(t), "kl_exact: step must be finite");
  if (t == 0.0) return 0.0;
  const auto c = detail::centre(path);
  double tb_max = 0.0;
  for (double v : c.b) tb_max = std::max(tb_max, t * v);
  double g = 0.0, mean_b = 0.0;
  if (tb_max < 30.0) {
    double s = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < c.b.size(); ++i) {
      const double e = std::expm1(t * c.b[i]);
      s += c.p0[i] * e;
      sb += c.p0[i] * e * c.b[i];
    }
    g = std::log1p(s);
    mean_b = sb / (1.0 + s);
  } else {
    // Large steps: shift by the dominant exponent.
    double s = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < c.b.size(); ++i) {
      const double e = c.p0[i] * std::exp(t * c.b[i] - tb_max);
      s += e;
      sb += e * c.b[i];
    }
    g = tb_max + std::log(s);
    mean_b = sb / s;
  }
  return std::max(0.0, t * mean_b - g);
}

/// KL(p(0) || p(t)) by direct summation of log-softmax differences.
inline double kl_reverse(const SoftmaxPath& path, double t) {
  path.validate();
  const double k0 = detail::lse(path.z);
  const double kt = log_partition(path, t);
  double s = 0.0;
  for (std::size_t i = 0; i < path.z.size(); ++i) {
    const double logp0 = path.z[i] - k0;
    const double logpt = path.z[i] + t * path.a[i] - kt;
    s += std::exp(logp0) * (logp0 - logpt);
  }
  return s;
}

/// Bregman gap K(t) - K(0) - t K'(0), with K'(0) = E_{p(0)}[a].
inline double kl_bregman(const SoftmaxPath& path, double t) {
  path.validate();
  const auto p0 = detail::base_probs(path);
  double mean = 0.0;
  for (std::size_t i = 0; i < p0.size(); ++i) mean += p0[i] * path.a[i];
  return log_partition(path, t) - log_partition(path, 0.0) - t * mean;
}

/// Var_{p(0)}(a).
inline double slope_variance(const SoftmaxPath& path) {
  path.validate();
  const auto c = detail::centre(path);
  double v = 0.0;
  for (std::size_t i = 0; i < c.b.size(); ++i) v += c.p0[i] * c.b[i] * c.b[i];
  return v;
}

/// t^2 / 2 * Var_{p(0)}(a).
inline double kl_quadratic(const SoftmaxPath& path, double t) { return 0.5 * t * t * slope_variance(path); }

inline constexpr double kRemainderConstant = 0.032075014954979206;  // 1 / (18 sqrt 3)

/// |t|^3 Delta_a^3 / (18 sqrt 3).
inline double remainder_bound(double t, double delta_a) {
  const double x = std::abs(t) * delta_a;
  return x * x * x * kRemainderConstant;
}

/// Smallest |t| at which the cubic remainder bound reaches the quadratic term:
/// Var / (2 c Delta_a^3) with c = 1 / (18 sqrt 3).
inline double kl_crossover(const SoftmaxPath& path) {
  const double d = path.spread();
  require(d > 0.0, "kl_crossover: zero spread");
  return slope_variance(path) / (2.0 * kRemainderConstant * d * d * d);
}

/// Third central moment of X in {0, delta} with P(X = delta) = p.
inline double two_point_third_moment(double delta, double p) {
  return delta * delta * delta * p * (1.0 - p) * (1.0 - 2.0 * p);
}

struct ThirdMomentWitness {
  double p_star;
  double moment;
};

/// Extremal two-point law p* = (3 - sqrt 3) / 6, moment delta^3 / (6 sqrt 3).
inline ThirdMomentWitness third_moment_witness(double delta) {
  require(delta > 0.0, "third_moment_witness: delta must be positive");
  const double p = (3.0 - std::sqrt(3.0)) / 6.0;
  return {p, two_point_third_moment(delta, p)};
}

}  // namespace ghost
