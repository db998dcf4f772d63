// Acceptance checks. `acceptance N` runs check N and exits nonzero if it
// fails; `acceptance` runs all of them. One PASS/FAIL line per check.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ghost/activations.hpp"
#include "ghost/autonet.hpp"
#include "ghost/expsum.hpp"
#include "ghost/harness/utilities.hpp"
#include "ghost/hessian_ghost.hpp"
#include "ghost/klbound.hpp"
#include "ghost/radius.hpp"

using namespace ghost;
using namespace ghost::harness;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome binary_radius_identity() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> ud(-6.0, 6.0), ug(0.1, 20.0);
  ZeroSearchConfig numeric;
  numeric.force_numeric = true;
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double d = ud(rng), g = ug(rng);
    const auto sum = ExpSum::from_log_weights({d, 0.0}, {0.0, g});
    const double want = std::sqrt(d * d + kPi * kPi) / g;
    for (const auto& cfg : {ZeroSearchConfig{}, numeric})
      worst = std::max(worst, std::abs(nearest_zero(sum, cfg).modulus - want) / want);
  }
  return {worst <= 1e-9, fmt("max relative error %.3g over 500 pairs (closed form and numeric)", worst)};
}

Outcome general_lower_bound() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> un(2, 10);
  std::uniform_real_distribution<double> ua(-3.0, 3.0), uz(-4.0, 4.0);
  int violations = 0;
  double min_ratio = kInfinity;
  for (int i = 0; i < 200; ++i) {
    const int n = un(rng);
    std::vector<double> z(n), a(n);
    for (int k = 0; k < n; ++k) {
      z[k] = uz(rng);
      a[k] = ua(rng);
    }
    const double spread = *std::max_element(a.begin(), a.end()) - *std::min_element(a.begin(), a.end());
    const double bound = kPi / spread;
    const double m = nearest_zero(ExpSum::from_log_weights(z, a)).modulus;
    violations += m < bound - 1e-9;
    min_ratio = std::min(min_ratio, m / bound);
  }
  return {violations == 0, fmt("%d violations over 200 sums; min modulus / bound = %.6f", violations, min_ratio)};
}

Outcome known_values() {
  const double want[] = {3.14, 0.31, 0.10};
  const double spreads[] = {1.0, 10.0, 30.0};
  double worst = 0.0;
  std::string vals;
  for (int i = 0; i < 3; ++i) {
    const double r = lower_bound(DirectionalSlopes{{0.0, spreads[i]}, 0});
    worst = std::max(worst, std::abs(r - want[i]));
    vals += fmt(" %.4f", r);
  }
  return {worst <= 0.01, "rho_a =" + vals + fmt("; max deviation %.4f", worst)};
}

Outcome three_term_oracle() {
  const double m = nearest_zero(ExpSum({1.0, 1.0, 1.0}, {0.0, 1.0, 2.0})).modulus;
  const double err = std::abs(m - 2.0 * kPi / 3.0);
  return {err <= 1e-9, fmt("modulus %.15f, error %.3g", m, err)};
}

SoftmaxPath random_path(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> un(2, 8);
  std::normal_distribution<double> nz(0.0, 2.0), na(0.0, 1.5);
  SoftmaxPath p;
  const int n = un(rng);
  for (int k = 0; k < n; ++k) {
    p.z.push_back(nz(rng));
    p.a.push_back(na(rng));
  }
  return p;
}

Outcome kl_identity_and_bound() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> ut(-1.0, 1.0);
  double max_gap = 0.0, max_excess = -kInfinity;
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto p = random_path(rng);
    const double d = p.spread();
    const double t = 2.0 * ut(rng) / d;  // |t| d <= 2
    max_gap = std::max(max_gap, std::abs(kl_exact(p, t) - kl_bregman(p, t)));
    const double err = std::abs(kl_exact(p, t) - kl_quadratic(p, t));
    const double bound = remainder_bound(t, d);
    violations += err > bound;
    max_excess = std::max(max_excess, err / bound);
  }
  const double delta = 1.7;
  const auto w = third_moment_witness(delta);
  const double witness_err = std::abs(w.moment - delta * delta * delta / (6.0 * std::sqrt(3.0)));
  const bool identity = max_gap <= 1e-12, bound = violations == 0, witness = witness_err <= 1e-12;
  return {identity && bound && witness,
          fmt("identity %s (max |kl_exact - kl_bregman| = %.3g); bound %s (%d violations, max error/bound %.4f); "
              "witness %s (error %.3g)",
              identity ? "ok" : "FAILED", max_gap, bound ? "ok" : "FAILED", violations, max_excess,
              witness ? "ok" : "FAILED", witness_err)};
}

Outcome crossover() {
  double worst = 0.0;
  bool all_found = true;
  for (double g : {20.0, 25.0, 40.0, 60.0, 100.0, 1000.0, 1e5}) {
    const auto r = crossover_margin_refined(g);
    if (!r) {
      all_found = false;
      continue;
    }
    worst = std::max(worst, std::abs(*r - crossover_margin(g)));
  }
  return {all_found && worst <= 0.1, fmt("max |bisection - ln(pi gap / 2)| = %.4g over gap in [20, 1e5]", worst)};
}

NetworkSpec random_network(std::mt19937_64& rng, int i) {
  static const char* acts[] = {"tanh", "gelu", "silu", "sigmoid", "softplus", "ria:2", "gelu_tanh", "gaussglu:1.5",
                               "swiglu", "identity"};
  std::uniform_int_distribution<std::size_t> width(2, 7), depth(0, 2);
  NetworkSpec s;
  s.seed = 1000 + static_cast<std::uint64_t>(i);
  s.layer_widths = {width(rng)};
  const std::size_t layers = depth(rng);
  for (std::size_t l = 0; l < layers; ++l) {
    s.layer_widths.push_back(width(rng));
    s.activations.push_back(parse_activation(acts[(i + l) % std::size(acts)]));
  }
  s.layer_widths.push_back(std::uniform_int_distribution<std::size_t>(2, 6)(rng));
  if (layers > 0 && i % 3 == 0 && !s.activations[0].gated()) {
    s.normalize.assign(layers, false);
    s.normalize[0] = true;
  }
  s.validate();
  return s;
}

Outcome jvp_correctness() {
  std::mt19937_64 rng(707);
  std::normal_distribution<double> n01;
  double worst_jvp = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto spec = random_network(rng, i);
    Params theta = init_params(spec);
    for (double& x : theta) x += 0.1 * n01(rng);
    Params v(theta.size());
    for (double& x : v) x = n01(rng);
    std::vector<double> input(spec.input_dim());
    for (double& x : input) x = n01(rng);
    const auto a = logit_jvp(spec, theta, input, v).a;
    const double h = 1e-5, nv = norm2(v);
    Params plus = theta, minus = theta;
    for (std::size_t j = 0; j < v.size(); ++j) {
      plus[j] += h * v[j] / nv;
      minus[j] -= h * v[j] / nv;
    }
    const auto zp = forward(spec, plus, input), zm = forward(spec, minus, input);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      num = std::max(num, std::abs(a[k] - (zp[k] - zm[k]) / (2 * h)));
      den = std::max(den, std::abs(a[k]));
    }
    worst_jvp = std::max(worst_jvp, num / std::max(den, 1e-12));
  }

  const auto spec = make_architecture("mlp_tanh", 16, 10, 3);
  const auto data = load_dataset(DatasetSpec{});
  const Batch b = subset(data.train, std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  const Params theta = init_params(spec);
  const auto grad = loss_and_grad(spec, theta, b).grad;
  std::uniform_int_distribution<std::size_t> coord(0, theta.size() - 1);
  double worst_grad = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t j = coord(rng);
    const double h = 1e-5;
    Params p = theta, m = theta;
    p[j] += h;
    m[j] -= h;
    const double fd = (evaluate(spec, p, b).loss - evaluate(spec, m, b).loss) / (2 * h);
    worst_grad = std::max(worst_grad, std::abs(fd - grad[j]) / std::max(std::abs(grad[j]), 1.0));
  }
  return {worst_jvp < 1e-4 && worst_grad < 1e-5,
          fmt("max JVP relative error %.3g over 50 triples; max gradient error %.3g over 20 coordinates", worst_jvp,
              worst_grad)};
}

Outcome clip_guarantee() {
  Config c;
  c.set("arms", "rho_controller");
  const auto res = run_spike(c);
  double max_r = 0.0;
  std::size_t rows = 0;
  for (const auto& [name, rec] : res.parts)
    for (const auto& row : rec.steps) {
      if (std::isfinite(row.r)) max_r = std::max(max_r, row.r);
      ++rows;
    }
  return {max_r <= 1.0 + 1e-12 && rows > 0,
          fmt("max logged r = %.17g over %zu steps (multipliers 10 to 10000, 5 seeds)", max_r, rows)};
}

Outcome temperature_law() {
  std::mt19937_64 rng(909);
  std::normal_distribution<double> n01;
  int mismatches = 0, checks = 0;
  for (int i = 0; i < 200; ++i) {
    DirectionalSlopes s;
    for (int k = 0; k < 5; ++k) s.a.push_back(n01(rng));
    const double base = temperature_radius(s, 1.0);
    for (double T : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0}) {
      ++checks;
      mismatches += temperature_radius(s, T) != T * base;
    }
  }
  return {mismatches == 0, fmt("%d inexact of %d (slopes, T) pairs", mismatches, checks)};
}

Outcome phase_transition() {
  const auto res = run_phase_sweep(Config{});
  bool ok = true;
  std::string parts;
  for (const auto& a : res.summary["archs"]) {
    const double keep = a["min_retained_below_1"].get<double>();
    const double infl = a["max_inflation_at_or_above_10"].get<double>();
    ok = ok && keep >= 0.95 && infl > 2.0;
    parts += fmt(" %s(keep %.3f, inflation %.3g)", a["arch"].get<std::string>().c_str(), keep, infl);
  }
  return {ok && res.summary["archs"].size() == 6, "min retained accuracy below r=1 and max inflation at r>=10:" + parts};
}

Outcome direction_independence() {
  const auto res = run_random_dirs(Config{});
  const auto t = res.summary["min_transition"];
  const double m = t.is_string() ? kInfinity : t.get<double>();
  return {m >= 1.0, fmt("smallest transition r* = %g over %ld groups of 21 directions", m,
                        res.summary["groups_total"].get<long>())};
}

Outcome temperature_fingerprint() {
  const auto res = run_temperature(Config{});
  const double raw = res.summary["raw_log_onset_std"].get<double>();
  const double norm = res.summary["normalized_log_onset_std"].get<double>();
  return {norm <= raw / 3.0, fmt("std log10 onset: raw %.4f, normalized %.4f (reduction %.2fx, %ld censored)", raw, norm,
                                 raw / norm, res.summary["censored"].get<long>())};
}

double median_acc(const nlohmann::json& arms, const std::string& name) {
  for (const auto& a : arms)
    if (a["arm"] == name) return a["final_acc"]["median"].get<double>();
  throw Error("acceptance: arm " + name + " missing");
}

Outcome spike_survival() {
  Config c;
  c.set("spike_multipliers", "10000");
  const auto res = run_spike(c);
  const double plain = median_acc(res.summary["arms"], "plain");
  const double clip = median_acc(res.summary["arms"], "grad_clip");
  const double rho = median_acc(res.summary["arms"], "rho_controller");
  return {rho - plain >= 0.20 && rho - clip >= 0.20,
          fmt("median final accuracy at 10000x: rho_controller %.3f, plain %.3f, grad_clip %.3f", rho, plain, clip)};
}

Outcome target_r_bracketing() {
  Config c;
  c.set("fixed_lrs", "0.1");
  const auto res = run_target_r_train(c);
  const auto& arms = res.summary["arms"];
  const double a05 = median_acc(arms, "r=0.5"), a1 = median_acc(arms, "r=1"), a4 = median_acc(arms, "r=4");
  long viol = 0;
  for (const auto& a : arms)
    if (a["arm"] == "r=0.5" || a["arm"] == "r=1") viol += a["total_violations"].get<long>();
  return {a1 >= a05 && a1 > a4 && viol == 0,
          fmt("median accuracy r=0.5 %.3f, r=1 %.3f, r=4 %.3f; violations in r<=1 arms %ld", a05, a1, a4, viol)};
}

Outcome activation_ranking() {
  const auto k = [](const char* s) { return parse_activation(s); };
  const double gelu = neuron_radius(0, 1, k("gelu")), ria = neuron_radius(0, 1, k("ria:1"));
  const double sig = neuron_radius(0, 1, k("sigmoid")), th = neuron_radius(0, 1, k("tanh"));
  const double eps = 1e-3, relu = neuron_radius(eps, 1, k("relu"));
  const bool ok = std::isinf(gelu) && std::isinf(ria) && sig == kPi && th == kPi / 2 && relu == eps;
  return {ok, fmt("gelu %g, ria %g, sigmoid %.17g, tanh %.17g, relu(h=1e-3) %.17g", gelu, ria, sig, th, relu)};
}

struct Check {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Check>& checks() {
  static const std::vector<Check> all{
      {"binary radius identity", binary_radius_identity},
      {"general lower bound", general_lower_bound},
      {"known radius values", known_values},
      {"three-term oracle", three_term_oracle},
      {"KL identity and remainder bound", kl_identity_and_bound},
      {"Hessian crossover margin", crossover},
      {"JVP and gradient correctness", jvp_correctness},
      {"radius clip guarantee", clip_guarantee},
      {"temperature law", temperature_law},
      {"phase transition", phase_transition},
      {"direction independence", direction_independence},
      {"temperature fingerprint", temperature_fingerprint},
      {"spike survival", spike_survival},
      {"target-r bracketing", target_r_bracketing},
      {"activation ranking", activation_ranking},
  };
  return all;
}

bool run_one(std::size_t i) {
  const auto& c = checks()[i - 1];
  Outcome o;
  try {
    o = c.run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::cout << "criterion " << (i < 10 ? " " : "") << i << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << c.name << ": "
            << o.detail << std::endl;
  return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 2) {
    std::cerr << "usage: acceptance [1-" << checks().size() << "]\n";
    return 1;
  }
  if (argc == 2) {
    const long i = std::strtol(argv[1], nullptr, 10);
    if (i < 1 || i > static_cast<long>(checks().size())) {
      std::cerr << "acceptance: no check " << argv[1] << '\n';
      return 1;
    }
    return run_one(static_cast<std::size_t>(i)) ? 0 : 1;
  }
  bool all = true;
  for (std::size_t i = 1; i <= checks().size(); ++i) all = run_one(i) && all;
  return all ? 0 : 1;
}
