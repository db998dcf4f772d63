#pragma once

// Activation families, their complex singular sets and the per-neuron radius
// min_{s in Sigma} |s - h| / |hdot|, plus the two entire designs: RIA (ReLU
// convolved with a Gaussian) and the Gaussian-CDF gate of GaussGLU.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ghost/dual.hpp"
#include "ghost/error.hpp"

namespace ghost {

enum class Activation {
  relu,
  leaky_relu,
  tanh,
  sigmoid,
  softplus,
  silu,
  gelu_exact,
  gelu_tanh,
  ria,
  identity,
  // gates of gated layers: out = (W_v x) * gate(W_g x)
  gaussglu,
  swiglu,
  reglu,
};

struct ActivationKind {
  Activation family = Activation::identity;
  double param = 0.0;  ///< leaky_relu negative slope, or beta for ria / gaussglu

  static ActivationKind make(Activation f, double p = 0.0) {
    ActivationKind k{f, p};
    if (f == Activation::leaky_relu) require(p > 0.0, "leaky_relu: slope must be positive");
    if (f == Activation::ria || f == Activation::gaussglu) require(p > 0.0, "activation: beta must be positive");
    return k;
  }

  bool gated() const {
    return family == Activation::gaussglu || family == Activation::swiglu || family == Activation::reglu;
  }

  bool operator==(const ActivationKind&) const = default;
};

inline std::string to_string(const ActivationKind& k) {
  auto with = [&](const char* n) {
    std::string s = n;
    s += ':';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", k.param);
    return s + buf;
  };
  switch (k.family) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return with("leaky_relu");
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softplus: return "softplus";
    case Activation::silu: return "silu";
    case Activation::gelu_exact: return "gelu";
    case Activation::gelu_tanh: return "gelu_tanh";
    case Activation::ria: return with("ria");
    case Activation::identity: return "identity";
    case Activation::gaussglu: return with("gaussglu");
    case Activation::swiglu: return "swiglu";
    case Activation::reglu: return "reglu";
  }
  return "?";
}

/// Parses "relu", "tanh", "ria:2", "leaky_relu:0.01", "gaussglu:1.5", ...
inline ActivationKind parse_activation(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  double p = 0.0;
  if (colon != std::string::npos) {
    try {
      p = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error("activation: bad parameter in '" + text + "'");
    }
  }
  if (name == "relu") return ActivationKind::make(Activation::relu);
  if (name == "leaky_relu") return ActivationKind::make(Activation::leaky_relu, colon == std::string::npos ? 0.01 : p);
  if (name == "tanh") return ActivationKind::make(Activation::tanh);
  if (name == "sigmoid") return ActivationKind::make(Activation::sigmoid);
  if (name == "softplus") return ActivationKind::make(Activation::softplus);
  if (name == "silu") return ActivationKind::make(Activation::silu);
  if (name == "gelu" || name == "gelu_exact") return ActivationKind::make(Activation::gelu_exact);
  if (name == "gelu_tanh") return ActivationKind::make(Activation::gelu_tanh);
  if (name == "ria") return ActivationKind::make(Activation::ria, colon == std::string::npos ? 1.0 : p);
  if (name == "identity") return ActivationKind::make(Activation::identity);
  if (name == "gaussglu") return ActivationKind::make(Activation::gaussglu, colon == std::string::npos ? 1.0 : p);
  if (name == "swiglu") return ActivationKind::make(Activation::swiglu);
  if (name == "reglu") return ActivationKind::make(Activation::reglu);
  throw Error("activation: unknown kind '" + text + "'");
}

// --- Gaussian helpers -------------------------------------------------------

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) * 0.39894228040143267794; }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// RIA: phi_beta(x) = x Phi(beta x) + phi(beta x) / beta.
inline double ria(double x, double beta) {
  require(beta > 0.0, "ria: beta must be positive");
  return x * normal_cdf(beta * x) + normal_pdf(beta * x) / beta;
}

inline double ria_derivative(double x, double beta) {
  require(beta > 0.0, "ria: beta must be positive");
  return normal_cdf(beta * x);
}

/// GaussGLU gate Phi(beta x).
inline double gaussglu_gate(double x, double beta) {
  require(beta > 0.0, "gaussglu_gate: beta must be positive");
  return normal_cdf(beta * x);
}

// --- Evaluation ---------------------------------------------------------------

struct ValueSlope {
  double value;
  double slope;
};

/// Elementwise activation (or gate function for gated kinds) and its derivative.
inline ValueSlope activate(const ActivationKind& k, double x) {
  switch (k.family) {
    case Activation::relu:
    case Activation::reglu:
      return x > 0.0 ? ValueSlope{x, 1.0} : ValueSlope{0.0, 0.0};
    case Activation::leaky_relu:
      return x > 0.0 ? ValueSlope{x, 1.0} : ValueSlope{k.param * x, k.param};
    case Activation::tanh: {
      const double t = std::tanh(x);
      return {t, 1.0 - t * t};
    }
    case Activation::sigmoid: {
      const double s = logistic(x);
      return {s, s * (1.0 - s)};
    }
    case Activation::softplus:
      return {std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))), logistic(x)};
    case Activation::silu:
    case Activation::swiglu: {
      const double s = logistic(x);
      return {x * s, s + x * s * (1.0 - s)};
    }
    case Activation::gelu_exact:
      return {x * normal_cdf(x), normal_cdf(x) + x * normal_pdf(x)};
    case Activation::gelu_tanh: {
      constexpr double c = 0.79788456080286535588;  // sqrt(2/pi)
      constexpr double k3 = 0.044715;
      const double u = c * (x + k3 * x * x * x);
      const double t = std::tanh(u);
      return {0.5 * x * (1.0 + t), 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * k3 * x * x)};
    }
    case Activation::ria:
      return {ria(x, k.param), ria_derivative(x, k.param)};
    case Activation::gaussglu:
      return {gaussglu_gate(x, k.param), k.param * normal_pdf(k.param * x)};
    case Activation::identity:
      return {x, 1.0};
  }
  return {x, 1.0};
}

inline double apply(const ActivationKind& k, double x) { return activate(k, x).value; }

inline Dual apply(const ActivationKind& k, Dual x) {
  const ValueSlope vs = activate(k, x.v);
  return {vs.value, vs.slope * x.d};
}

// --- Singular sets ------------------------------------------------------------

struct RealBreakpoints {
  std::vector<double> points;
};

/// {i (offset + spacing k) : k integer}
struct ImaginaryLattice {
  double offset;
  double spacing;
};

struct EmptySet {};

using SingularSet = std::variant<RealBreakpoints, ImaginaryLattice, EmptySet>;

/// Singular or non-analytic set of the activation's complex continuation.
/// For gated kinds this is the set of the gate function.
inline SingularSet singular_set(const ActivationKind& k) {
  switch (k.family) {
    case Activation::relu:
    case Activation::leaky_relu:
    case Activation::reglu:
      return RealBreakpoints{{0.0}};
    case Activation::sigmoid:
    case Activation::softplus:
    case Activation::silu:
    case Activation::swiglu:
      return ImaginaryLattice{kPi, 2.0 * kPi};
    case Activation::tanh:
    case Activation::gelu_tanh:
      return ImaginaryLattice{kPi / 2.0, kPi};
    case Activation::gelu_exact:
    case Activation::ria:
    case Activation::gaussglu:
    case Activation::identity:
      return EmptySet{};
  }
  return EmptySet{};
}

/// Smallest |Im| over a lattice.
inline double nearest_lattice_height(const ImaginaryLattice& l) {
  require(l.spacing > 0.0, "ImaginaryLattice: spacing must be positive");
  const double r = std::abs(std::fmod(l.offset, l.spacing));
  return std::min(r, l.spacing - r);
}

/// Distance from the origin of the singular set, infinite when empty.
inline double nearest_singularity_distance(const SingularSet& s) {
  if (const auto* b = std::get_if<RealBreakpoints>(&s)) {
    double best = kInfinity;
    for (double p : b->points) best = std::min(best, std::abs(p));
    return best;
  }
  if (const auto* l = std::get_if<ImaginaryLattice>(&s)) return nearest_lattice_height(*l);
  return kInfinity;
}

/// Activation-limited directional radius of one neuron.
inline double neuron_radius(double h, double hdot, const ActivationKind& kind) {
  if (hdot == 0.0) return kInfinity;
  const SingularSet s = singular_set(kind);
  if (const auto* b = std::get_if<RealBreakpoints>(&s)) {
    double best = kInfinity;
    for (double p : b->points) best = std::min(best, std::abs(h - p));
    return best / std::abs(hdot);
  }
  if (const auto* l = std::get_if<ImaginaryLattice>(&s))
    return std::hypot(h, nearest_lattice_height(*l)) / std::abs(hdot);
  return kInfinity;
}

/// Empirical q-quantile (linear interpolation between order statistics) of
/// |h| / |hdot|; hdot = 0 contributes +infinity.
inline double ffn_kink_quantile(std::span<const std::pair<double, double>> pairs, double q) {
  require(!pairs.empty(), "ffn_kink_quantile: no preactivations");
  require(q > 0.0 && q < 1.0, "ffn_kink_quantile: q must lie in (0, 1)");
  std::vector<double> ratios;
  ratios.reserve(pairs.size());
  for (const auto& [h, hdot] : pairs) ratios.push_back(hdot == 0.0 ? kInfinity : std::abs(h) / std::abs(hdot));
  std::sort(ratios.begin(), ratios.end());
  const double pos = q * static_cast<double>(ratios.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, ratios.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (std::isinf(ratios[lo])) return kInfinity;
  if (frac == 0.0 || lo == hi) return ratios[lo];
  if (std::isinf(ratios[hi])) return kInfinity;
  return ratios[lo] + frac * (ratios[hi] - ratios[lo]);
}

enum class Bottleneck { out, ffn };

inline const char* to_string(Bottleneck b) { return b == Bottleneck::out ? "out" : "ffn"; }

struct NetworkRadius {
  double value;
  Bottleneck bottleneck;
};

/// rho_net = min(rho_out, rho_ffn); ties go to the output term.
inline NetworkRadius network_radius(double rho_out, double rho_ffn) {
  require(rho_out > 0.0 && rho_ffn > 0.0, "network_radius: radii must be positive");
  if (rho_ffn < rho_out) return {rho_ffn, Bottleneck::ffn};
  return {rho_out, Bottleneck::out};
}

}  // namespace ghost
