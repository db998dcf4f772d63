#pragma once

// Exponential sums F(t) = sum_k w_k exp(a_k t) with w_k > 0 and real a_k,
// evaluated over the complex plane, and the location of their zeros.
//
// Weights are stored as logarithms so sums built from large logits never
// overflow; every evaluation factors out exp(max_k(log w_k + a_k Re t)).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ghost/error.hpp"

namespace ghost {

using ComplexPoint = std::complex<double>;

struct ZeroSearchConfig {
  /// Search strip height as a multiple of pi/Delta_a.
  double max_imag_multiplier = 4.0;
  /// Newton seeds per pi/Delta_a of length, along both axes.
  int grid_density = 8;
  /// Convergence on |F(t)| / sum_k |w_k exp(a_k t)|.
  double newton_tol = 1e-13;
  int max_newton_iters = 60;
  /// Use grid-seeded Newton even for two-term sums.
  bool force_numeric = false;

  void validate() const {
    require(newton_tol > 0.0, "ZeroSearchConfig: newton_tol must be positive");
    require(grid_density >= 4, "ZeroSearchConfig: grid_density must be >= 4");
    require(max_newton_iters > 0, "ZeroSearchConfig: max_newton_iters must be positive");
    require(max_imag_multiplier >= 1.0, "ZeroSearchConfig: max_imag_multiplier must be >= 1");
  }
};

class ExpSum {
 public:
  ExpSum(const std::vector<double>& weights, std::vector<double> slopes) : slopes_(std::move(slopes)) {
    require(weights.size() == slopes_.size(), "ExpSum: weights and slopes differ in length");
    log_w_.reserve(weights.size());
    for (double w : weights) {
      require(std::isfinite(w) && w > 0.0, "ExpSum: weights must be finite and strictly positive");
      log_w_.push_back(std::log(w));
    }
    check();
  }

  /// Builds the sum from log-weights (e.g. raw logits); never forms exp(log_w).
  static ExpSum from_log_weights(std::vector<double> log_weights, std::vector<double> slopes) {
    require(log_weights.size() == slopes.size(), "ExpSum: weights and slopes differ in length");
    ExpSum s;
    s.log_w_ = std::move(log_weights);
    s.slopes_ = std::move(slopes);
    for (double lw : s.log_w_) require(std::isfinite(lw), "ExpSum: log-weights must be finite");
    s.check();
    return s;
  }

  std::size_t size() const { return slopes_.size(); }
  const std::vector<double>& log_weights() const { return log_w_; }
  const std::vector<double>& slopes() const { return slopes_; }
  double weight(std::size_t k) const { return std::exp(log_w_[k]); }

  double spread() const {
    const auto [lo, hi] = std::minmax_element(slopes_.begin(), slopes_.end());
    return *hi - *lo;
  }

  /// Same zeros, terms sorted by slope with equal slopes merged.
  ExpSum canonical() const {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return slopes_[i] < slopes_[j]; });
    ExpSum out;
    for (std::size_t i : order) {
      if (!out.slopes_.empty() && out.slopes_.back() == slopes_[i]) {
        const double a = out.log_w_.back(), b = log_w_[i];
        const double hi = std::max(a, b);
        out.log_w_.back() = hi + std::log1p(std::exp(std::min(a, b) - hi));
      } else {
        out.slopes_.push_back(slopes_[i]);
        out.log_w_.push_back(log_w_[i]);
      }
    }
    return out;
  }

 private:
  ExpSum() = default;

  void check() const {
    require(slopes_.size() >= 2, "ExpSum: need at least two terms");
    for (double a : slopes_) require(std::isfinite(a), "ExpSum: slopes must be finite");
  }

  std::vector<double> log_w_;
  std::vector<double> slopes_;
};

/// F(t) = exp(log_scale) * value, F'(t) = exp(log_scale) * deriv.
/// `magnitude` is sum_k |term_k| on the same scale (>= 1), so |value|/magnitude
/// measures how much the terms cancel.
struct ScaledEval {
  ComplexPoint value;
  ComplexPoint deriv;
  double log_scale = 0.0;
  double magnitude = 0.0;
};

/// Evaluates with an optional slope shift c: terms become w_k exp((a_k - c) t).
inline ScaledEval eval_scaled(const ExpSum& sum, ComplexPoint t, double slope_shift = 0.0) {
  const auto& lw = sum.log_weights();
  const auto& a = sum.slopes();
  const double x = t.real(), y = t.imag();
  double m = -kInfinity;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, lw[k] + (a[k] - slope_shift) * x);
  ScaledEval out;
  out.log_scale = m;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double ak = a[k] - slope_shift;
    const double mag = std::exp(lw[k] + ak * x - m);
    const ComplexPoint term = std::polar(mag, ak * y);
    out.value += term;
    out.deriv += ak * term;
    out.magnitude += mag;
  }
  return out;
}

/// F(t) in complex arithmetic.
inline ComplexPoint eval(const ExpSum& sum, ComplexPoint t) {
  require(std::isfinite(t.real()) && std::isfinite(t.imag()), "eval: non-finite argument");
  const ScaledEval s = eval_scaled(sum, t);
  if (s.log_scale > 709.0) throw Error("eval: magnitude overflow");
  return std::exp(s.log_scale) * s.value;
}

/// The two zeros nearest the origin of a two-term sum: (delta + i*pi*(2k+1))/Delta_a
/// for k in {0, -1}, with delta = log(w1/w2) and Delta_a = a2 - a1.
inline std::vector<ComplexPoint> binary_zeros(const ExpSum& sum) {
  require(sum.size() == 2, "binary_zeros: need exactly two terms");
  const double gap = sum.slopes()[1] - sum.slopes()[0];
  if (gap == 0.0) throw Error("binary_zeros: degenerate: Delta_a = 0, no zeros, infinite radius");
  const double delta = sum.log_weights()[0] - sum.log_weights()[1];
  return {ComplexPoint(delta, kPi) / gap, ComplexPoint(delta, -kPi) / gap};
}

struct NearestZero {
  ComplexPoint zero;  ///< representative with Im >= 0; its conjugate is also a zero
  double modulus = 0.0;
};

namespace detail {

inline double principal_arg_ratio(ComplexPoint b, ComplexPoint a) { return std::arg(b / a); }

struct ContourAccumulator {
  const ExpSum& sum;
  double shift;
  double radius;
  double phase = 0.0;

  ComplexPoint value_at(double theta) const {
    const ScaledEval s = eval_scaled(sum, std::polar(radius, theta), shift);
    if (std::abs(s.value) < 1e3 * std::numeric_limits<double>::epsilon() * s.magnitude)
      throw Error("count_zeros_in_disk: contour too close to a zero, perturb radius");
    return s.value;
  }

  void arc(double ta, ComplexPoint fa, double tb, ComplexPoint fb, int depth) {
    const double d = principal_arg_ratio(fb, fa);
    if (std::abs(d) > kPi / 4 && depth < 60) {
      const double tm = 0.5 * (ta + tb);
      const ComplexPoint fm = value_at(tm);
      arc(ta, fa, tm, fm, depth + 1);
      arc(tm, fm, tb, fb, depth + 1);
      return;
    }
    phase += d;
  }
};

inline bool better(const NearestZero& a, const NearestZero& b) {
  const double tol = 1e-12 * std::max(a.modulus, b.modulus);
  if (std::abs(a.modulus - b.modulus) > tol) return a.modulus < b.modulus;
  if (a.zero.real() != b.zero.real()) return a.zero.real() < b.zero.real();
  return a.zero.imag() < b.zero.imag();
}

inline std::optional<ComplexPoint> newton(const ExpSum& sum, ComplexPoint t, const ZeroSearchConfig& cfg,
                                          double max_step) {
  for (int it = 0; it < cfg.max_newton_iters; ++it) {
    const ScaledEval s = eval_scaled(sum, t);
    if (std::abs(s.value) < cfg.newton_tol * s.magnitude) {
      for (int polish = 0; polish < 2; ++polish) {
        const ScaledEval p = eval_scaled(sum, t);
        if (p.deriv == ComplexPoint{}) break;
        const ComplexPoint next = t - p.value / p.deriv;
        const ScaledEval q = eval_scaled(sum, next);
        if (std::abs(q.value) / q.magnitude > std::abs(p.value) / p.magnitude) break;
        t = next;
      }
      return t;
    }
    if (s.deriv == ComplexPoint{}) return std::nullopt;
    ComplexPoint step = s.value / s.deriv;
    const double len = std::abs(step);
    if (!std::isfinite(len)) return std::nullopt;
    if (len > max_step) step *= max_step / len;
    t -= step;
  }
  return std::nullopt;
}

struct Rect {
  double re_lo, re_hi, im_lo, im_hi;
};

inline std::optional<NearestZero> grid_search(const ExpSum& sum, const Rect& box, double unit, int density,
                                              const ZeroSearchConfig& cfg) {
  const double h = unit / density;
  const auto nre = static_cast<long>(std::ceil((box.re_hi - box.re_lo) / h)) + 1;
  const auto nim = static_cast<long>(std::ceil((box.im_hi - box.im_lo) / h)) + 1;
  std::optional<NearestZero> best;
  for (long i = 0; i < nim; ++i) {
    for (long j = 0; j < nre; ++j) {
      const ComplexPoint seed(box.re_lo + j * h, box.im_lo + i * h);
      const auto root = newton(sum, seed, cfg, unit);
      if (!root) continue;
      ComplexPoint z = root->imag() < 0 ? std::conj(*root) : *root;
      const NearestZero cand{z, std::abs(z)};
      if (!best || better(cand, *best)) best = cand;
    }
  }
  return best;
}

// Zeros of a canonical sum lie in |Re t| bounded by when the extreme-slope term
// dominates the rest: Re t <= log(W_rest / w_top) / (a_top - a_next), etc.
inline std::pair<double, double> real_part_bounds(const ExpSum& c) {
  const auto& lw = c.log_weights();
  const auto& a = c.slopes();
  const std::size_t n = a.size();
  auto log_sum_except = [&](std::size_t skip) {
    double m = -kInfinity;
    for (std::size_t k = 0; k < n; ++k)
      if (k != skip) m = std::max(m, lw[k]);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != skip) s += std::exp(lw[k] - m);
    return m + std::log(s);
  };
  const double hi = std::max(0.0, (log_sum_except(n - 1) - lw[n - 1]) / (a[n - 1] - a[n - 2]));
  const double lo = std::max(0.0, (log_sum_except(0) - lw[0]) / (a[1] - a[0]));
  return {-lo, hi};
}

}  // namespace detail

/// Winding number of F around |t| = radius, i.e. the number of zeros strictly
/// inside, by phase accumulation over `samples` points with adaptive refinement
/// of arcs whose phase jumps exceed pi/4.
inline int count_zeros_in_disk(const ExpSum& sum, double radius, int samples = 256) {
  require(radius > 0.0 && std::isfinite(radius), "count_zeros_in_disk: radius must be positive");
  require(samples >= 8, "count_zeros_in_disk: need at least 8 samples");
  const auto [lo, hi] = std::minmax_element(sum.slopes().begin(), sum.slopes().end());
  const double shift = 0.5 * (*lo + *hi);
  const double half_span = 0.5 * (*hi - *lo);
  const int n = std::max(samples, static_cast<int>(std::ceil(16.0 * half_span * radius)) + 16);

  detail::ContourAccumulator acc{sum, shift, radius};
  const double step = 2.0 * kPi / n;
  ComplexPoint first = acc.value_at(0.0);
  ComplexPoint prev = first;
  for (int j = 1; j <= n; ++j) {
    const double theta = j * step;
    const ComplexPoint cur = (j == n) ? first : acc.value_at(theta);
    acc.arc((j - 1) * step, prev, theta, cur, 0);
    prev = cur;
  }
  const double turns = acc.phase / (2.0 * kPi);
  const double rounded = std::round(turns);
  if (std::abs(turns - rounded) > 0.25) throw Error("count_zeros_in_disk: phase accumulation did not close");
  return static_cast<int>(rounded);
}

/// Zero of smallest modulus. Two distinct slopes use the closed form; otherwise
/// grid-seeded Newton over the half-strip Im t in [pi/Delta_a, M*pi/Delta_a],
/// confirmed by an argument-principle count on the disk just inside the result.
inline NearestZero nearest_zero(const ExpSum& sum, const ZeroSearchConfig& cfg = {}) {
  cfg.validate();
  const ExpSum c = sum.canonical();
  if (c.size() < 2) throw Error("nearest_zero: degenerate: Delta_a = 0, no zeros, infinite radius");

  if (c.size() == 2 && !cfg.force_numeric) {
    const auto zs = binary_zeros(c);
    const ComplexPoint z = zs[0].imag() > 0 ? zs[0] : zs[1];
    return {z, std::abs(z)};
  }

  const double unit = kPi / c.spread();
  const double im_hi = cfg.max_imag_multiplier * unit;
  const auto [re_lo_raw, re_hi_raw] = detail::real_part_bounds(c);
  const double re_cap = 2.0 * im_hi;
  const detail::Rect strip{std::max(re_lo_raw, -re_cap), std::min(re_hi_raw, re_cap), unit, im_hi};

  auto best = detail::grid_search(c, strip, unit, cfg.grid_density, cfg);
  if (!best) {
    std::ostringstream os;
    os << "nearest_zero: search exhausted: no zero with Im(t) in [" << strip.im_lo << ", " << strip.im_hi
       << "], Re(t) in [" << strip.re_lo << ", " << strip.re_hi << "]";
    throw Error(os.str());
  }

  for (int round = 0; round < 4; ++round) {
    if (count_zeros_in_disk(c, best->modulus * (1.0 - 1e-6)) == 0) return *best;
    // Something closer was missed: reseed the half-disk more densely.
    const double r = best->modulus;
    const detail::Rect disk{std::max(re_lo_raw, -r), std::min(re_hi_raw, r), unit, r};
    if (auto again = detail::grid_search(c, disk, unit, cfg.grid_density << (round + 1), cfg)) {
      if (detail::better(*again, *best)) best = again;
    }
  }
  throw Error("nearest_zero: argument-principle check failed; zeros remain inside the returned modulus");
}

}  // namespace ghost
