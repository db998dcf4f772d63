#pragma once

// Small diagnostic subcommands and the name -> driver dispatch.

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghost/activations.hpp"
#include "ghost/expsum.hpp"
#include "ghost/harness/experiments.hpp"
#include "ghost/hessian_ghost.hpp"
#include "ghost/klbound.hpp"
#include "ghost/radius.hpp"

namespace ghost::harness {

/// Nearest zero of sum_k w_k e^{a_k t}; keys weights, slopes.
inline ExperimentResult run_zeros(const Config& c) {
  const auto w = c.reals("weights", {1.0, 1.0});
  const auto a = c.reals("slopes", {0.0, 1.0});
  const ExpSum sum(w, a);
  const auto nz = nearest_zero(sum);
  const double d = *std::max_element(a.begin(), a.end()) - *std::min_element(a.begin(), a.end());
  ExperimentResult res;
  res.summary = {{"experiment", "zeros"},
                 {"zero_re", nz.zero.real()},
                 {"zero_im", nz.zero.imag()},
                 {"modulus", nz.modulus},
                 {"lower_bound", d > 0 ? kPi / d : kInfinity}};
  return res;
}

/// Forward KL, its Bregman form and the quadratic model along one softmax
/// path; keys logits, slopes, tau_grid.
inline ExperimentResult run_klcheck(const Config& c) {
  SoftmaxPath path{c.reals("logits", {0.5, -1.0, 2.0}), c.reals("slopes", {1.0, -0.3, 0.7})};
  path.validate();
  const auto taus = c.reals("tau_grid", {-2.5, -1.0, -0.1, 0.1, 1.0, 2.5});
  ExperimentResult res;
  res.summary["experiment"] = "klcheck";
  res.summary["crossover"] = detail::jreal(kl_crossover(path));
  long violations = 0;
  for (double t : taus) {
    const double e = kl_exact(path, t), q = kl_quadratic(path, t), b = remainder_bound(t, path.spread());
    const bool ok = std::abs(e - q) <= b;
    violations += !ok;
    res.summary["rows"].push_back({{"tau", t},
                                   {"kl_exact", e},
                                   {"kl_bregman", kl_bregman(path, t)},
                                   {"kl_quadratic", q},
                                   {"bound", b},
                                   {"within_bound", ok}});
  }
  res.summary["violations"] = violations;
  return res;
}

/// Hessian-vs-ghost crossover margins; key gaps.
inline ExperimentResult run_crossover(const Config& c) {
  ExperimentResult res;
  res.summary["experiment"] = "crossover";
  for (double g : c.reals("gaps", {2, 5, 10, 20, 50, 100})) {
    const auto refined = crossover_margin_refined(g);
    res.summary["rows"].push_back({{"gap", g},
                                   {"asymptotic", crossover_margin(g)},
                                   {"bisection", refined ? nlohmann::json(*refined) : nlohmann::json(nullptr)},
                                   {"balanced_ratio", ghost_vs_hessian({0.0, g}).ratio}});
  }
  return res;
}

/// Neuron radii for a list of activations at (h, hdot).
inline ExperimentResult run_actscan(const Config& c) {
  const double h = c.real("h", 0.0), hdot = c.real("hdot", 1.0);
  ExperimentResult res;
  res.summary["experiment"] = "actscan";
  for (const auto& name : c.list("activations", {"relu", "tanh", "sigmoid", "softplus", "silu", "gelu", "gelu_tanh",
                                                 "ria", "gaussglu", "swiglu"})) {
    const auto kind = parse_activation(name);
    res.summary["rows"].push_back(
        {{"activation", to_string(kind)}, {"h", h}, {"hdot", hdot}, {"radius", detail::jreal(neuron_radius(h, hdot, kind))}});
  }
  return res;
}

/// rho_a of a network along its negative full-batch gradient; trains to the
/// convergence target first unless a checkpoint is given.
inline ExperimentResult run_radius(const Config& c) {
  const Dataset data = load_dataset(DatasetSpec::from_config(c));
  const auto seed = seeds_from(c).front();
  NetworkSpec spec;
  Params theta;
  if (c.has("checkpoint")) {
    auto ck = load_checkpoint(c.str("checkpoint"));
    spec = std::move(ck.spec);
    theta = std::move(ck.params);
    require(spec.input_dim() == data.train.dim && spec.num_classes() == data.classes,
            "radius: checkpoint does not match the dataset shape");
  } else {
    spec = architecture_from_config(c, data.train.dim, data.classes, seed, "mlp_tanh");
    auto co = converge_options_from(c);
    co.seed = seed;
    theta = train_to_convergence(spec, init_params(spec), data.train, co).params;
  }
  const Params v = unit_vector(scaled(loss_and_grad(spec, theta, data.train).grad, -1.0));
  const auto mode = parse_rho_mode(c.str("rho_mode", "jvp"));
  const auto est = rho_estimate(spec, theta, data.train, v, mode, data.train.size());
  ExperimentResult res;
  res.summary = {{"experiment", "radius"},
                 {"rho_a", detail::jreal(est.report.rho_a)},
                 {"delta_a_max", est.report.delta_a_max},
                 {"bottleneck_sample", est.report.bottleneck_sample ? nlohmann::json(*est.report.bottleneck_sample)
                                                                    : nlohmann::json(nullptr)},
                 {"mode", to_string(mode)},
                 {"train_loss", evaluate(spec, theta, data.train).loss}};
  if (c.has("save_checkpoint")) save_checkpoint(c.str("save_checkpoint"), spec, theta);
  return res;
}

using Driver = std::function<ExperimentResult(const Config&)>;

inline const std::map<std::string, Driver>& drivers() {
  static const std::map<std::string, Driver> m{
      {"spike", run_spike},         {"phase_sweep", run_phase_sweep}, {"random_dirs", run_random_dirs},
      {"temperature", run_temperature}, {"target_r_train", run_target_r_train}, {"zeros", run_zeros},
      {"klcheck", run_klcheck},     {"crossover", run_crossover},     {"actscan", run_actscan},
      {"radius", run_radius}};
  return m;
}

inline ExperimentResult run_experiment(const std::string& name, const Config& c) {
  const auto it = drivers().find(name);
  if (it == drivers().end()) throw Error("unknown experiment '" + name + "'");
  return it->second(c);
}

}  // namespace ghost::harness
