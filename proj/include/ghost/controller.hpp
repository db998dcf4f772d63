#pragma once

// Step-size control from the radius bound: the radius clip, the target-r
// controller and a radius-blind gradient-clipping baseline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ghost/autonet.hpp"
#include "ghost/error.hpp"
#include "ghost/radius.hpp"

namespace ghost {

struct ControlDecision {
  double scale = 1.0;
  double rho_a = kInfinity;
  double tau_before = 0.0;
  double tau_after = 0.0;
  double r_after = 0.0;
};

struct Controlled {
  Params update;
  ControlDecision decision;
};

/// s = min(1, rho_a / ||p||); the returned step has norm min(||p||, rho_a).
inline Controlled radius_clip(std::span<const double> p, double rho_a) {
  require(rho_a > 0.0, "radius_clip: rho_a must be positive");
  Controlled out{Params(p.begin(), p.end()), {}};
  ControlDecision& d = out.decision;
  d.rho_a = rho_a;
  d.tau_before = norm2(p);
  if (d.tau_before > rho_a) {
    d.scale = rho_a / d.tau_before;
    for (double& x : out.update) x *= d.scale;
  }
  d.tau_after = d.tau_before > rho_a ? norm2(out.update) : d.tau_before;
  d.r_after = normalized_step(d.tau_after, rho_a);
  return out;
}

struct TargetStep {
  double eta = 0.0;
  Params update;
  double tau = 0.0;
  double r = 0.0;
};

/// eta = r rho_a / ||v|| and update = -eta v (v is a descent-sign-free
/// direction; callers pass the gradient or the momentum buffer). With an
/// infinite radius eta falls back to eta_max.
inline TargetStep target_r_step(std::span<const double> v, double r_target, double rho_a, double eta_max = 1.0) {
  require(r_target > 0.0, "target_r_step: target r must be positive");
  require(rho_a > 0.0, "target_r_step: rho_a must be positive");
  const double n = norm2(v);
  if (n == 0.0) throw Error("target_r_step: zero direction");
  TargetStep s;
  s.eta = std::isinf(rho_a) ? eta_max : r_target * rho_a / n;
  s.update.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) s.update[i] = -s.eta * v[i];
  s.tau = s.eta * n;
  s.r = normalized_step(s.tau, rho_a);
  return s;
}

/// g * min(1, c / ||g||).
inline Params grad_clip_baseline(std::span<const double> g, double c) {
  require(c > 0.0, "grad_clip_baseline: threshold must be positive");
  Params out(g.begin(), g.end());
  const double n = norm2(g);
  if (n > c) {
    const double s = c / n;
    for (double& x : out) x *= s;
  }
  return out;
}

enum class RhoMode { jvp, finite_diff };

inline const char* to_string(RhoMode m) { return m == RhoMode::jvp ? "jvp" : "finite_diff"; }

inline RhoMode parse_rho_mode(const std::string& s) {
  if (s == "jvp") return RhoMode::jvp;
  if (s == "finite_diff" || s == "fd") return RhoMode::finite_diff;
  throw Error("rho mode: unknown '" + s + "'");
}

struct RhoEstimate {
  RadiusReport report;
  RhoMode mode = RhoMode::jvp;
  std::size_t samples_used = 0;
};

inline constexpr std::size_t kRhoBatchCap = 256;

/// rho_a along `direction` over the first min(|batch|, cap) samples.
/// finite_diff uses the central stencil (z(theta + h v) - z(theta - h v)) / 2h
/// with h = 1e-4 max(1, ||theta||_inf) and v the unit direction.
inline RhoEstimate rho_estimate(const NetworkSpec& spec, std::span<const double> params, const Batch& batch,
                                std::span<const double> direction, RhoMode mode = RhoMode::jvp,
                                std::size_t cap = kRhoBatchCap) {
  require(batch.size() > 0, "rho_estimate: empty batch");
  require(cap > 0, "rho_estimate: cap must be positive");
  RhoEstimate est;
  est.mode = mode;
  est.samples_used = std::min(batch.size(), cap);
  std::vector<DirectionalSlopes> slopes;
  slopes.reserve(est.samples_used);

  if (mode == RhoMode::jvp) {
    const auto tp = tangent_params(params, direction);
    for (std::size_t i = 0; i < est.samples_used; ++i) slopes.push_back(logit_jvp(spec, tp, batch.row(i), i).slopes);
  } else {
    require(params.size() == direction.size(), "rho_estimate: direction has wrong length");
    const double n = norm2(direction);
    if (n == 0.0 || !std::isfinite(n)) throw Error("rho_estimate: zero direction");
    double inf_norm = 0.0;
    for (double x : params) inf_norm = std::max(inf_norm, std::abs(x));
    const double h = 1e-4 * std::max(1.0, inf_norm);
    Params plus(params.begin(), params.end()), minus(params.begin(), params.end());
    for (std::size_t j = 0; j < params.size(); ++j) {
      plus[j] += h * direction[j] / n;
      minus[j] -= h * direction[j] / n;
    }
    for (std::size_t i = 0; i < est.samples_used; ++i) {
      const auto zp = forward(spec, plus, batch.row(i));
      const auto zm = forward(spec, minus, batch.row(i));
      DirectionalSlopes s;
      s.sample_id = i;
      s.a.resize(zp.size());
      for (std::size_t k = 0; k < zp.size(); ++k) s.a[k] = (zp[k] - zm[k]) / (2.0 * h);
      slopes.push_back(std::move(s));
    }
  }
  est.report = batch_radius(std::span<const DirectionalSlopes>(slopes));
  return est;
}

/// Recomputes rho_a every `every` steps and reuses the last value otherwise.
class RhoSchedule {
 public:
  explicit RhoSchedule(std::size_t every = 1) : every_(every) { require(every > 0, "RhoSchedule: stride must be positive"); }

  bool due(std::size_t step) const { return !have_ || step - last_step_ >= every_; }

  void record(std::size_t step, double rho) {
    have_ = true;
    last_step_ = step;
    rho_ = rho;
  }

  double rho() const { return rho_; }
  /// Steps since the cached value was computed.
  std::size_t staleness(std::size_t step) const { return have_ ? step - last_step_ : 0; }

 private:
  std::size_t every_;
  bool have_ = false;
  std::size_t last_step_ = 0;
  double rho_ = kInfinity;
};

}  // namespace ghost
