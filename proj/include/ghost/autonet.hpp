#pragma once

// Small dense classifiers with reverse-mode gradients and forward-mode
// Jacobian-vector products.
//
// Parameter layout (flat, layer-major). For layer l mapping in -> out:
//   plain layer : W (out x in, row-major), then b (out)
//   gated layer : W_value, b_value, W_gate, b_gate (same shapes)
// Hidden layer output is act(norm(W x + b)) where norm is an optional
// parameter-free standardization across the layer, or for gated kinds
// (W_value x + b_value) * gate(W_gate x + b_gate). The last layer is affine.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ghost/activations.hpp"
#include "ghost/dual.hpp"
#include "ghost/error.hpp"
#include "ghost/radius.hpp"

namespace ghost {

using Params = std::vector<double>;

struct NetworkSpec {
  std::vector<std::size_t> layer_widths;        ///< input, hidden..., classes
  std::vector<ActivationKind> activations;      ///< one per hidden layer
  std::vector<bool> normalize;                  ///< per hidden layer; empty = none
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t num_classes() const { return layer_widths.back(); }
  std::size_t num_layers() const { return layer_widths.size() - 1; }
  std::size_t num_hidden() const { return layer_widths.size() - 2; }

  bool normalized(std::size_t hidden) const { return hidden < normalize.size() && normalize[hidden]; }

  void validate() const {
    require(layer_widths.size() >= 2, "NetworkSpec: need at least one layer");
    for (auto w : layer_widths) require(w > 0, "NetworkSpec: widths must be positive");
    require(num_classes() >= 2, "NetworkSpec: need at least two classes");
    require(activations.size() == num_hidden(), "NetworkSpec: one activation per hidden layer");
    require(normalize.empty() || normalize.size() == num_hidden(), "NetworkSpec: normalize flags per hidden layer");
    for (std::size_t h = 0; h < num_hidden(); ++h) {
      if (normalized(h)) {
        require(!activations[h].gated(), "NetworkSpec: normalization is not supported on gated layers");
        require(layer_widths[h + 1] >= 2, "NetworkSpec: normalized layers need width >= 2");
      }
    }
  }

  bool operator==(const NetworkSpec&) const = default;
};

struct LayerLayout {
  std::size_t in = 0, out = 0;
  bool hidden = false;
  bool gated = false;
  std::size_t w = 0, b = 0, wg = 0, bg = 0;  ///< offsets into Params
};

inline std::vector<LayerLayout> layout(const NetworkSpec& spec) {
  spec.validate();
  std::vector<LayerLayout> out;
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    LayerLayout L;
    L.in = spec.layer_widths[l];
    L.out = spec.layer_widths[l + 1];
    L.hidden = l + 1 < spec.num_layers();
    L.gated = L.hidden && spec.activations[l].gated();
    L.w = off;
    off += L.in * L.out;
    L.b = off;
    off += L.out;
    if (L.gated) {
      L.wg = off;
      off += L.in * L.out;
      L.bg = off;
      off += L.out;
    }
    out.push_back(L);
  }
  return out;
}

inline std::size_t param_count(const NetworkSpec& spec) {
  const auto lay = layout(spec);
  const auto& last = lay.back();
  return last.b + last.out;
}

/// Weights uniform(-s, s), s = sqrt(6 / (fan_in + fan_out)); biases zero.
inline Params init_params(const NetworkSpec& spec) {
  const auto lay = layout(spec);
  Params p(param_count(spec), 0.0);
  std::mt19937_64 rng(spec.seed);
  for (const auto& L : lay) {
    const double s = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
    std::uniform_real_distribution<double> u(-s, s);
    for (std::size_t i = 0; i < L.in * L.out; ++i) p[L.w + i] = u(rng);
    if (L.gated)
      for (std::size_t i = 0; i < L.in * L.out; ++i) p[L.wg + i] = u(rng);
  }
  return p;
}

/// Row-major sample matrix plus class labels.
struct Batch {
  std::vector<double> inputs;
  std::size_t dim = 0;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {inputs.data() + i * dim, dim}; }

  void validate(std::size_t num_classes) const {
    require(dim > 0, "Batch: zero input dimension");
    require(inputs.size() == labels.size() * dim, "Batch: inputs and labels disagree");
    for (auto y : labels) require(y < num_classes, "Batch: label out of range");
  }
};

inline Batch subset(const Batch& b, std::span<const std::size_t> idx) {
  Batch out;
  out.dim = b.dim;
  out.inputs.reserve(idx.size() * b.dim);
  for (auto i : idx) {
    const auto r = b.row(i);
    out.inputs.insert(out.inputs.end(), r.begin(), r.end());
    out.labels.push_back(b.labels[i]);
  }
  return out;
}

// --- vector helpers -------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline std::vector<double> scaled(std::span<const double> x, double s) {
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v *= s;
  return out;
}

inline double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> z) {
  const double lse = log_sum_exp(z);
  std::vector<double> p(z.size());
  std::transform(z.begin(), z.end(), p.begin(), [&](double v) { return std::exp(v - lse); });
  return p;
}

inline std::size_t argmax(std::span<const double> z) {
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

// --- forward ----------------------------------------------------------------------

namespace detail {

template <class T>
void check_finite(std::span<const T> v, std::size_t layer) {
  for (const T& x : v)
    if (!std::isfinite(value_of(x)) || !std::isfinite(tangent_of(x)))
      throw Error("forward: numeric overflow at layer " + std::to_string(layer));
}

template <class T>
void affine(std::span<const T> params, std::size_t w, std::size_t b, std::size_t in, std::size_t out,
            std::span<const T> x, std::vector<T>& y) {
  y.assign(out, T{});
  for (std::size_t o = 0; o < out; ++o) {
    T acc = params[b + o];
    const std::size_t row = w + o * in;
    for (std::size_t i = 0; i < in; ++i) acc += params[row + i] * x[i];
    y[o] = acc;
  }
}

inline constexpr double kNormEps = 1e-5;

template <class T>
void standardize(std::vector<T>& u) {
  T mean{};
  for (const T& v : u) mean += v;
  mean = mean / static_cast<double>(u.size());
  T var{};
  for (const T& v : u) var += (v - mean) * (v - mean);
  var = var / static_cast<double>(u.size());
  using std::sqrt;
  const T inv = T(1.0) / sqrt(var + T(kNormEps));
  for (T& v : u) v = (v - mean) * inv;
}

}  // namespace detail

/// Generic forward pass over scalar type T (double or Dual). When `preacts` is
/// given it receives, per hidden layer, the values fed to the activation (or
/// gate), and finally the logits.
template <class T>
std::vector<T> forward_generic(const NetworkSpec& spec, std::span<const T> params, std::span<const double> input,
                               std::vector<std::vector<T>>* preacts = nullptr) {
  const auto lay = layout(spec);
  require(params.size() == param_count(spec), "forward: parameter count mismatch");
  require(input.size() == spec.input_dim(), "forward: input dimension mismatch");
  std::vector<T> cur(input.begin(), input.end());
  std::vector<T> u, g;
  for (std::size_t l = 0; l < lay.size(); ++l) {
    const auto& L = lay[l];
    detail::affine<T>(params, L.w, L.b, L.in, L.out, cur, u);
    if (!L.hidden) {
      detail::check_finite<T>(u, l);
      if (preacts) preacts->push_back(u);
      return u;
    }
    const ActivationKind& act = spec.activations[l];
    if (L.gated) {
      detail::affine<T>(params, L.wg, L.bg, L.in, L.out, cur, g);
      detail::check_finite<T>(g, l);
      if (preacts) preacts->push_back(g);
      for (std::size_t o = 0; o < L.out; ++o) u[o] = u[o] * apply(act, g[o]);
    } else {
      if (spec.normalized(l)) detail::standardize(u);
      detail::check_finite<T>(u, l);
      if (preacts) preacts->push_back(u);
      for (T& v : u) v = apply(act, v);
    }
    cur.swap(u);
  }
  return cur;  // unreachable: the last layer returns above
}

inline std::vector<double> forward(const NetworkSpec& spec, std::span<const double> params,
                                   std::span<const double> input) {
  return forward_generic<double>(spec, params, input);
}

// --- reverse mode -------------------------------------------------------------------

struct LossGrad {
  double loss = 0.0;
  Params grad;
};

namespace detail {

struct LayerCache {
  std::vector<double> in;     // layer input
  std::vector<double> pre;    // activation input (normalized) or gate preactivation
  std::vector<double> value;  // gated: value path
  double inv_std = 0.0;       // normalized layers
};

// Forward with caches, then accumulate d loss / d params given d loss / d logits.
class Backprop {
 public:
  Backprop(const NetworkSpec& spec, std::span<const double> params)
      : spec_(spec), params_(params), lay_(layout(spec)), caches_(lay_.size()) {}

  std::vector<double> forward(std::span<const double> input) {
    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> u, g;
    for (std::size_t l = 0; l < lay_.size(); ++l) {
      const auto& L = lay_[l];
      auto& c = caches_[l];
      c.in = cur;
      affine<double>(params_, L.w, L.b, L.in, L.out, cur, u);
      if (!L.hidden) {
        check_finite<double>(u, l);
        return u;
      }
      const ActivationKind& act = spec_.activations[l];
      if (L.gated) {
        affine<double>(params_, L.wg, L.bg, L.in, L.out, cur, g);
        check_finite<double>(g, l);
        c.value = u;
        c.pre = g;
        for (std::size_t o = 0; o < L.out; ++o) u[o] *= apply(act, g[o]);
      } else {
        if (spec_.normalized(l)) {
          double mean = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
          double var = 0.0;
          for (double v : u) var += (v - mean) * (v - mean);
          var /= static_cast<double>(u.size());
          c.inv_std = 1.0 / std::sqrt(var + kNormEps);
          for (double& v : u) v = (v - mean) * c.inv_std;
        }
        check_finite<double>(u, l);
        c.pre = u;
        for (double& v : u) v = apply(act, v);
      }
      cur.swap(u);
    }
    return cur;
  }

  void backward(std::vector<double> dout, std::span<double> grad) const {
    for (std::size_t l = lay_.size(); l-- > 0;) {
      const auto& L = lay_[l];
      const auto& c = caches_[l];
      std::vector<double> du(L.out), dg;
      if (!L.hidden) {
        du = dout;
      } else if (L.gated) {
        const ActivationKind& act = spec_.activations[l];
        dg.resize(L.out);
        for (std::size_t o = 0; o < L.out; ++o) {
          const ValueSlope gs = activate(act, c.pre[o]);
          du[o] = dout[o] * gs.value;
          dg[o] = dout[o] * c.value[o] * gs.slope;
        }
      } else {
        const ActivationKind& act = spec_.activations[l];
        for (std::size_t o = 0; o < L.out; ++o) du[o] = dout[o] * activate(act, c.pre[o]).slope;
        if (spec_.normalized(l)) {
          const double n = static_cast<double>(L.out);
          double mean_d = 0.0, mean_dn = 0.0;
          for (std::size_t o = 0; o < L.out; ++o) {
            mean_d += du[o];
            mean_dn += du[o] * c.pre[o];
          }
          mean_d /= n;
          mean_dn /= n;
          for (std::size_t o = 0; o < L.out; ++o) du[o] = (du[o] - mean_d - c.pre[o] * mean_dn) * c.inv_std;
        }
      }
      std::vector<double> din(L.in, 0.0);
      accumulate(L.w, L.b, L.in, L.out, c.in, du, grad, din);
      if (L.gated) accumulate(L.wg, L.bg, L.in, L.out, c.in, dg, grad, din);
      dout.swap(din);
    }
  }

 private:
  void accumulate(std::size_t w, std::size_t b, std::size_t in, std::size_t out, const std::vector<double>& x,
                  const std::vector<double>& du, std::span<double> grad, std::vector<double>& din) const {
    for (std::size_t o = 0; o < out; ++o) {
      const double d = du[o];
      if (d == 0.0) continue;
      grad[b + o] += d;
      const std::size_t row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        grad[row + i] += d * x[i];
        din[i] += d * params_[row + i];
      }
    }
  }

  const NetworkSpec& spec_;
  std::span<const double> params_;
  std::vector<LayerLayout> lay_;
  std::vector<LayerCache> caches_;
};

}  // namespace detail

/// Mean cross-entropy of softmax(z / temperature) and its gradient.
inline LossGrad loss_and_grad(const NetworkSpec& spec, std::span<const double> params, const Batch& batch,
                              double temperature = 1.0) {
  require(temperature > 0.0, "loss_and_grad: invalid temperature");
  require(params.size() == param_count(spec), "loss_and_grad: parameter count mismatch");
  batch.validate(spec.num_classes());
  require(batch.size() > 0, "loss_and_grad: empty batch");
  LossGrad out;
  out.grad.assign(params.size(), 0.0);
  detail::Backprop bp(spec, params);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<double> z = bp.forward(batch.row(i));
    for (double& v : z) v /= temperature;
    const double lse = log_sum_exp(z);
    const std::size_t y = batch.labels[i];
    out.loss += (lse - z[y]) * inv_b;
    std::vector<double> dz(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) dz[k] = std::exp(z[k] - lse) * inv_b / temperature;
    dz[y] -= inv_b / temperature;
    bp.backward(std::move(dz), out.grad);
  }
  return out;
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<std::size_t> predictions;
};

/// Mean loss, accuracy and predicted classes without gradients.
inline Evaluation evaluate(const NetworkSpec& spec, std::span<const double> params, const Batch& batch,
                           double temperature = 1.0) {
  require(temperature > 0.0, "evaluate: invalid temperature");
  batch.validate(spec.num_classes());
  Evaluation ev;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<double> z = forward(spec, params, batch.row(i));
    for (double& v : z) v /= temperature;
    ev.loss += log_sum_exp(z) - z[batch.labels[i]];
    const std::size_t pred = argmax(z);
    ev.predictions.push_back(pred);
    correct += pred == batch.labels[i];
  }
  if (batch.size() > 0) {
    ev.loss /= static_cast<double>(batch.size());
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(batch.size());
  }
  return ev;
}

// --- forward mode ---------------------------------------------------------------------

/// Parameters lifted to dual numbers with the unit direction as tangent.
/// Build once per direction, reuse for every sample.
inline std::vector<Dual> tangent_params(std::span<const double> params, std::span<const double> direction) {
  require(params.size() == direction.size(), "tangent_params: direction has wrong length");
  const double n = norm2(direction);
  if (n == 0.0 || !std::isfinite(n)) throw Error("logit_jvp: zero direction");
  std::vector<Dual> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out[i] = Dual(params[i], direction[i] / n);
  return out;
}

struct LogitJvp {
  std::vector<double> logits;
  DirectionalSlopes slopes;
};

inline LogitJvp logit_jvp(const NetworkSpec& spec, std::span<const Dual> tparams, std::span<const double> input,
                          std::size_t sample_id = 0) {
  const std::vector<Dual> z = forward_generic<Dual>(spec, tparams, input);
  LogitJvp out;
  out.slopes.sample_id = sample_id;
  for (const Dual& d : z) {
    out.logits.push_back(d.v);
    out.slopes.a.push_back(d.d);
  }
  return out;
}

/// a = J_z v for the unit vector along `direction`.
inline DirectionalSlopes logit_jvp(const NetworkSpec& spec, std::span<const double> params,
                                   std::span<const double> input, std::span<const double> direction) {
  const auto tp = tangent_params(params, direction);
  return logit_jvp(spec, tp, input).slopes;
}

struct PreactivationScan {
  /// per hidden layer: (h_j, hdot_j) for every neuron
  std::vector<std::vector<std::pair<double, double>>> hidden;
  /// (z_k, a_k) for the logits
  std::vector<std::pair<double, double>> logits;
};

inline PreactivationScan hidden_preactivations_jvp(const NetworkSpec& spec, std::span<const Dual> tparams,
                                                   std::span<const double> input) {
  std::vector<std::vector<Dual>> pre;
  forward_generic<Dual>(spec, tparams, input, &pre);
  PreactivationScan out;
  for (std::size_t l = 0; l < pre.size(); ++l) {
    std::vector<std::pair<double, double>> row;
    row.reserve(pre[l].size());
    for (const Dual& d : pre[l]) row.emplace_back(d.v, d.d);
    if (l + 1 == pre.size())
      out.logits = std::move(row);
    else
      out.hidden.push_back(std::move(row));
  }
  return out;
}

inline PreactivationScan hidden_preactivations_jvp(const NetworkSpec& spec, std::span<const double> params,
                                                   std::span<const double> input,
                                                   std::span<const double> direction) {
  const auto tp = tangent_params(params, direction);
  return hidden_preactivations_jvp(spec, tp, input);
}

// --- optimizers ---------------------------------------------------------------------------

struct SgdState {
  std::vector<double> buffer;
};

struct SgdHyper {
  double lr = 0.01;
  double momentum = 0.9;
};

/// Tentative update p = -lr * buf with buf <- momentum * buf + g. The norm of
/// p therefore includes the momentum buffer.
inline Params sgd_momentum_step(std::span<const double> grad, SgdState& state, const SgdHyper& hp) {
  if (state.buffer.empty()) state.buffer.assign(grad.size(), 0.0);
  require(state.buffer.size() == grad.size(), "sgd_momentum_step: state shape mismatch");
  Params p(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.buffer[i] = hp.momentum * state.buffer[i] + grad[i];
    p[i] = -hp.lr * state.buffer[i];
  }
  return p;
}

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam; returns the tentative update before it is applied.
inline Params adam_step(std::span<const double> grad, AdamState& state, const AdamHyper& hp) {
  if (state.m.empty()) {
    state.m.assign(grad.size(), 0.0);
    state.v.assign(grad.size(), 0.0);
  }
  require(state.m.size() == grad.size() && state.v.size() == grad.size(), "adam_step: state shape mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  Params p(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grad[i];
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
    p[i] = -hp.lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + hp.eps);
  }
  return p;
}

}  // namespace ghost
