#pragma once

// Experiment drivers. Each returns an ExperimentResult made of named parts
// (one RunRecord per arm or per group) plus an overall summary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ghost/activations.hpp"
#include "ghost/autonet.hpp"
#include "ghost/controller.hpp"
#include "ghost/error.hpp"
#include "ghost/harness/config.hpp"
#include "ghost/harness/dataset.hpp"
#include "ghost/harness/models.hpp"
#include "ghost/harness/record.hpp"
#include "ghost/harness/stats.hpp"
#include "ghost/harness/train.hpp"
#include "ghost/radius.hpp"

namespace ghost::harness {

struct ExperimentResult {
  std::vector<std::pair<std::string, RunRecord>> parts;
  nlohmann::json summary = nlohmann::json::object();
  bool divergent = false;
};

/// Writes every part under out_dir/<part name>/ and the overall summary.json.
inline void emit_experiment(const ExperimentResult& res, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& [name, rec] : res.parts) emit(rec, (std::filesystem::path(out_dir) / name).string());
  std::ofstream f(std::filesystem::path(out_dir) / "summary.json");
  if (!f) throw Error("experiment: cannot write summary under '" + out_dir + "'");
  f << res.summary.dump(2) << '\n';
}

inline std::vector<std::uint64_t> seeds_from(const Config& c) {
  std::vector<std::uint64_t> out;
  for (double s : c.reals("seeds", {1, 2, 3, 4, 5})) {
    require(s >= 0.0 && s == std::floor(s), "config: seeds must be nonnegative integers");
    out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

inline nlohmann::json spread_json(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  const auto s = median_iqr(v);
  return {{"median", detail::jreal(s.median)}, {"q25", detail::jreal(s.q25)}, {"q75", detail::jreal(s.q75)}};
}

/// Compact label for a grid value, e.g. 0.03 or 10000.
inline std::string short_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::vector<double> default_r_grid() { return Config::log_grid(0.01, 100.0, 13); }

inline TrainOptions train_options_from(const Config& c, TrainOptions o) {
  if (c.has("optimizer")) o.optimizer = parse_optimizer(c.str("optimizer"));
  o.lr = c.real("lr", o.lr);
  o.momentum = c.real("momentum", o.momentum);
  o.steps = c.integer("steps", o.steps);
  o.batch_size = static_cast<std::size_t>(c.integer("batch_size", static_cast<long>(o.batch_size)));
  o.clip_c = c.real("clip_c", o.clip_c);
  o.eta_max = c.real("eta_max", o.eta_max);
  o.spike_step = c.integer("spike_step", o.spike_step);
  o.spike_hold = c.integer("spike_hold", o.spike_hold);
  o.rho_mode = parse_rho_mode(c.str("rho_mode", to_string(o.rho_mode)));
  o.rho_every = static_cast<std::size_t>(c.integer("rho_every", static_cast<long>(o.rho_every)));
  o.rho_cap = static_cast<std::size_t>(c.integer("rho_cap", static_cast<long>(o.rho_cap)));
  o.divergence_loss = c.real("divergence_loss", o.divergence_loss);
  require(o.rho_every > 0 && o.rho_cap > 0, "config: rho_every and rho_cap must be positive");
  return o;
}

inline ConvergeOptions converge_options_from(const Config& c) {
  ConvergeOptions o;
  o.lr = c.real("converge_lr", o.lr);
  o.target_loss = c.real("converge_loss", o.target_loss);
  o.max_steps = c.integer("converge_steps", o.max_steps);
  return o;
}

// --- single-step probes ----------------------------------------------------------

struct Probe {
  double loss;
  double accuracy;
  double flip_fraction;
};

/// Loss and predictions at theta0 + tau * unit(v), against a baseline.
inline Probe probe_step(const NetworkSpec& spec, const Params& theta0, const Params& unit, double tau, const Batch& loss_set,
                        const Batch& acc_set, const std::vector<std::size_t>& base_preds, double temperature = 1.0) {
  Params theta = theta0;
  axpy(tau, unit, theta);
  const auto l = safe_evaluate(spec, theta, loss_set, temperature);
  const auto a = safe_evaluate(spec, theta, acc_set, temperature);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < base_preds.size(); ++i) flips += a.predictions[i] != base_preds[i];
  return {l.loss, a.accuracy, base_preds.empty() ? 0.0 : static_cast<double>(flips) / static_cast<double>(base_preds.size())};
}

inline Params unit_vector(Params v) {
  const double n = norm2(v);
  require(n > 0.0 && std::isfinite(n), "experiment: zero or non-finite direction");
  for (double& x : v) x /= n;
  return v;
}

/// rho_a along v over the whole batch.
inline double full_rho(const NetworkSpec& spec, const Params& theta, const Batch& b, const Params& v,
                       RhoMode mode = RhoMode::jvp) {
  return rho_estimate(spec, theta, b, v, mode, b.size()).report.rho_a;
}

// --- spike ----------------------------------------------------------------------

inline ExperimentResult run_spike(const Config& c) {
  const Dataset data = load_dataset(DatasetSpec::from_config(c));
  const auto seeds = seeds_from(c);
  const auto mults = c.reals("spike_multipliers", {10, 100, 1000, 10000});
  for (double m : mults) require(m > 0.0, "spike: multipliers must be positive");
  const auto arms = c.list("arms", {"plain", "grad_clip", "rho_controller"});
  TrainOptions base;
  base.optimizer = Optimizer::adam;
  base.lr = 1e-3;
  base.steps = 200;
  base.batch_size = 64;
  base.spike_step = 50;
  base.spike_hold = 150;
  base = train_options_from(c, base);

  ExperimentResult res;
  res.summary["experiment"] = "spike";
  for (double m : mults) {
    for (const auto& arm_name : arms) {
      const Arm arm = parse_arm(arm_name);
      RunRecord rec;
      std::vector<double> accs, losses;
      double max_r = 0.0;
      long divergent_runs = 0, violations = 0;
      for (auto seed : seeds) {
        const NetworkSpec spec = architecture_from_config(c, data.train.dim, data.classes, seed, "deep_mlp");
        TrainOptions o = base;
        o.arm = arm;
        o.spike_multiplier = m;
        o.seed = seed;
        const auto tr = train(spec, init_params(spec), data, o);
        rec.steps.insert(rec.steps.end(), tr.rows.begin(), tr.rows.end());
        accs.push_back(tr.final_acc);
        losses.push_back(tr.final_loss);
        max_r = std::max(max_r, tr.max_r);
        violations += tr.violations;
        divergent_runs += tr.divergent;
      }
      rec.divergent = divergent_runs > 0;
      res.divergent = res.divergent || rec.divergent;
      rec.summary = {{"spike_multiplier", m},
                     {"arm", arm_name},
                     {"final_acc", spread_json(accs)},
                     {"final_loss", spread_json(losses)},
                     {"divergent_runs", divergent_runs},
                     {"max_r", detail::jreal(max_r)},
                     {"violations", violations},
                     {"seeds", seeds.size()}};
      res.summary["arms"].push_back(rec.summary);
      res.parts.emplace_back("x" + short_label(m) + "/" + arm_name, std::move(rec));
    }
  }
  return res;
}

// --- phase sweep ----------------------------------------------------------------

inline ExperimentResult run_phase_sweep(const Config& c) {
  const Dataset data = load_dataset(DatasetSpec::from_config(c));
  const auto seeds = seeds_from(c);
  const auto archs = c.list("archs", architecture_menu());
  const auto grid = c.reals("r_grid", default_r_grid());
  const auto conv = converge_options_from(c);

  ExperimentResult res;
  res.summary["experiment"] = "phase_sweep";
  for (const auto& arch : archs) {
    RunRecord rec;
    double worst_sub1 = 1.0, max_inflation_ge10 = 0.0;
    bool restored = true;
    long unconverged = 0;
    for (auto seed : seeds) {
      const NetworkSpec spec = make_architecture(arch, data.train.dim, data.classes, seed);
      ConvergeOptions co = conv;
      co.seed = seed;
      const auto cv = train_to_convergence(spec, init_params(spec), data.train, co);
      unconverged += !cv.reached_target;
      const Params theta0 = cv.params;
      const auto base_tr = evaluate(spec, theta0, data.train);
      const auto base_te = evaluate(spec, theta0, data.test);
      const Params v = unit_vector(scaled(loss_and_grad(spec, theta0, data.train).grad, -1.0));
      const double rho = full_rho(spec, theta0, data.train, v);
      for (double r : grid) {
        const auto pr = probe_step(spec, theta0, v, r * rho, data.train, data.test, base_te.predictions);
        SweepRow row{r, pr.loss / base_tr.loss, base_te.accuracy > 0 ? pr.accuracy / base_te.accuracy : NAN,
                     pr.flip_fraction, arch, seed};
        if (r < 1.0) worst_sub1 = std::min(worst_sub1, row.retained_acc);
        if (r >= 10.0) max_inflation_ge10 = std::max(max_inflation_ge10, row.loss_ratio);
        rec.sweeps.push_back(row);
      }
      restored = restored && cv.params == theta0;
    }
    rec.summary = {{"arch", arch},
                   {"min_retained_below_1", detail::jreal(worst_sub1)},
                   {"max_inflation_at_or_above_10", detail::jreal(max_inflation_ge10)},
                   {"checkpoint_restored", restored},
                   {"unconverged_seeds", unconverged}};
    res.summary["archs"].push_back(rec.summary);
    res.parts.emplace_back(arch, std::move(rec));
  }
  return res;
}

// --- random directions ---------------------------------------------------------

/// First grid value whose loss ratio exceeds the threshold; infinity if none.
inline double transition_r(const std::vector<SweepRow>& rows, double threshold) {
  for (const auto& r : rows)
    if (r.loss_ratio > threshold) return r.param;
  return kInfinity;
}

inline ExperimentResult run_random_dirs(const Config& c) {
  const Dataset data = load_dataset(DatasetSpec::from_config(c));
  const auto seeds = seeds_from(c);
  const auto grid = c.reals("r_grid", default_r_grid());
  const auto phases = c.reals("phase_steps", {20, 200, 1000});
  const auto n_random = static_cast<std::size_t>(c.integer("n_random_dirs", 20));
  const double threshold = c.real("transition_ratio", 1.5);
  const double lr = c.real("lr", 1e-2);
  const std::string arch = c.str("arch", "mlp_tanh");
  const std::string sense = c.str("gradient_sense", "ascent");
  require(sense == "descent" || sense == "ascent", "random_dirs: gradient_sense must be descent or ascent");
  require(std::is_sorted(phases.begin(), phases.end()), "random_dirs: phase_steps must be increasing");

  ExperimentResult res;
  res.summary["experiment"] = "random_dirs";
  double min_transition = kInfinity;
  long grad_le_median = 0, groups = 0;
  std::vector<double> small_flips;
  for (auto seed : seeds) {
    const NetworkSpec spec = make_architecture(arch, data.train.dim, data.classes, seed);
    Params theta = init_params(spec);
    AdamState st;
    AdamHyper hp;
    hp.lr = lr;
    long done = 0;
    for (double ph : phases) {
      for (; done < static_cast<long>(ph); ++done)
        axpy(1.0, adam_step(loss_and_grad(spec, theta, data.train).grad, st, hp), theta);
      const std::string tag = "p" + std::to_string(done);
      const auto base_tr = evaluate(spec, theta, data.train);
      const auto base_te = evaluate(spec, theta, data.test);

      std::vector<std::pair<std::string, Params>> dirs;
      dirs.emplace_back("grad", scaled(loss_and_grad(spec, theta, data.train).grad, sense == "descent" ? -1.0 : 1.0));
      std::mt19937_64 rng(seed * 1000003 + static_cast<std::uint64_t>(done));
      std::normal_distribution<double> n01;
      for (std::size_t k = 0; k < n_random; ++k) {
        Params v(theta.size());
        for (double& x : v) x = n01(rng);
        dirs.emplace_back("rand" + std::to_string(k), std::move(v));
      }

      RunRecord rec;
      double grad_t = kInfinity;
      std::vector<double> rand_t;
      for (auto& [name, raw] : dirs) {
        const Params v = unit_vector(raw);
        const double rho = full_rho(spec, theta, data.train, v);
        std::vector<SweepRow> rows;
        for (double r : grid) {
          const auto pr = probe_step(spec, theta, v, r * rho, data.train, data.train, base_tr.predictions);
          const auto te = safe_evaluate(spec, [&] {
            Params t = theta;
            axpy(r * rho, v, t);
            return t;
          }(), data.test);
          rows.push_back({r, pr.loss / base_tr.loss, base_te.accuracy > 0 ? te.accuracy / base_te.accuracy : NAN,
                          pr.flip_fraction, tag + "/" + name, seed});
          if (r <= 0.01 + 1e-15) small_flips.push_back(pr.flip_fraction);
        }
        const double t = transition_r(rows, threshold);
        min_transition = std::min(min_transition, t);
        if (name == "grad")
          grad_t = t;
        else
          rand_t.push_back(t);
        rec.sweeps.insert(rec.sweeps.end(), rows.begin(), rows.end());
      }
      const double med = rand_t.empty() ? kInfinity : median(rand_t);
      ++groups;
      grad_le_median += grad_t <= med;
      rec.summary = {{"seed", seed},
                     {"phase_step", done},
                     {"train_loss", base_tr.loss},
                     {"grad_transition", detail::jreal(grad_t)},
                     {"median_random_transition", detail::jreal(med)},
                     {"min_random_transition", detail::jreal(*std::min_element(rand_t.begin(), rand_t.end()))}};
      res.summary["groups"].push_back(rec.summary);
      res.parts.emplace_back("seed" + std::to_string(seed) + "/" + tag, std::move(rec));
    }
  }
  res.summary["min_transition"] = detail::jreal(min_transition);
  res.summary["grad_le_median_groups"] = grad_le_median;
  res.summary["groups_total"] = groups;
  res.summary["max_flip_at_smallest_r"] = small_flips.empty() ? nlohmann::json(nullptr)
                                                              : nlohmann::json(*std::max_element(small_flips.begin(), small_flips.end()));
  return res;
}

// --- temperature ----------------------------------------------------------------

inline ExperimentResult run_temperature(const Config& c) {
  const Dataset data = load_dataset(DatasetSpec::from_config(c));
  const auto seeds = seeds_from(c);
  const auto temps = c.reals("T_grid", {0.25, 0.5, 1, 2, 4, 8, 16, 64});
  const auto taus = c.reals("tau_grid", Config::log_grid(1e-4, 1e4, 161));
  const double threshold = c.real("onset_ratio", 2.0);
  const std::string arch = c.str("arch", "mlp_tanh");
  const std::string dir_mode = c.str("direction", "fixed");
  require(dir_mode == "fixed" || dir_mode == "tempered", "temperature: direction must be fixed or tempered");
  const auto conv = converge_options_from(c);
  for (double t : temps) require(t > 0.0, "temperature: T_grid entries must be positive");

  ExperimentResult res;
  res.summary["experiment"] = "temperature";
  std::vector<double> raw_log, norm_log;
  bool law_exact = true, ordered = true;
  long censored = 0;
  for (auto seed : seeds) {
    const NetworkSpec spec = make_architecture(arch, data.train.dim, data.classes, seed);
    ConvergeOptions co = conv;
    co.seed = seed;
    const Params theta0 = train_to_convergence(spec, init_params(spec), data.train, co).params;
    RunRecord rec;
    double prev_onset = 0.0;
    nlohmann::json per_t = nlohmann::json::array();
    // fixed: the T = 1 descent direction for every T; tempered: the descent direction of each tempered loss
    const Params v1 = unit_vector(scaled(loss_and_grad(spec, theta0, data.train).grad, -1.0));
    for (double T : temps) {
      const Params v = dir_mode == "fixed" ? v1 : unit_vector(scaled(loss_and_grad(spec, theta0, data.train, T).grad, -1.0));
      const auto est = rho_estimate(spec, theta0, data.train, v, RhoMode::jvp, data.train.size());
      // Temperature enters the radius through the slopes a/T of the tempered logits.
      DirectionalSlopes witness{{0.0, est.report.delta_a_max}, 0};
      const double rho_t = temperature_radius(witness, T);
      law_exact = law_exact && rho_t == T * temperature_radius(witness, 1.0);
      const double base = evaluate(spec, theta0, data.train, T).loss;
      double onset = kInfinity;
      for (double tau : taus) {
        Params theta = theta0;
        axpy(tau, v, theta);
        const double ratio = safe_evaluate(spec, theta, data.train, T).loss / base;
        rec.sweeps.push_back({tau, ratio, NAN, NAN, "T=" + short_label(T), seed});
        if (ratio > threshold) {
          onset = tau;
          break;
        }
      }
      per_t.push_back({{"T", T}, {"rho_a", detail::jreal(rho_t)}, {"onset", detail::jreal(onset)}});
      if (!std::isfinite(onset)) {
        ++censored;
        std::cerr << "warning: temperature T=" << T << " seed " << seed << ": no onset on the tau grid; excluded\n";
        continue;
      }
      ordered = ordered && onset >= prev_onset;
      prev_onset = onset;
      raw_log.push_back(std::log10(onset));
      norm_log.push_back(std::log10(onset / rho_t));
    }
    rec.summary = {{"seed", seed}, {"per_T", per_t}};
    res.summary["seeds"].push_back(rec.summary);
    res.parts.emplace_back("seed" + std::to_string(seed), std::move(rec));
  }
  const double sr = raw_log.empty() ? NAN : stddev(raw_log);
  const double sn = norm_log.empty() ? NAN : stddev(norm_log);
  res.summary["raw_log_onset_std"] = detail::jreal(sr);
  res.summary["normalized_log_onset_std"] = detail::jreal(sn);
  res.summary["reduction"] = detail::jreal(sr / sn);
  res.summary["temperature_law_exact"] = law_exact;
  res.summary["onset_nondecreasing"] = ordered;
  res.summary["censored"] = censored;
  return res;
}

// --- target-r training -----------------------------------------------------------

inline ExperimentResult run_target_r_train(const Config& c) {
  const Dataset data = load_dataset(DatasetSpec::from_config(c));
  const auto seeds = seeds_from(c);
  const auto targets = c.reals("r_targets", {0.5, 1, 2, 4});
  const auto lrs = c.reals("fixed_lrs", {0.01, 0.03, 0.1, 0.3});
  TrainOptions base;
  base.optimizer = Optimizer::sgd;
  base.momentum = 0.9;
  base.lr = 0.01;
  base.steps = 300;
  base.batch_size = 64;
  base = train_options_from(c, base);
  const long epoch = std::max<long>(1, static_cast<long>((data.train.size() + base.batch_size - 1) /
                                                         std::max<std::size_t>(1, base.batch_size)));

  struct ArmSpec {
    std::string name;
    Arm arm;
    double value;
  };
  std::vector<ArmSpec> arms;
  for (double r : targets) arms.push_back({"r=" + short_label(r), Arm::target_r, r});
  for (double lr : lrs) arms.push_back({"lr=" + short_label(lr), Arm::plain, lr});

  ExperimentResult res;
  res.summary["experiment"] = "target_r_train";
  for (const auto& a : arms) {
    RunRecord rec;
    std::vector<double> accs, viol, max_rs;
    long divergent_runs = 0;
    for (auto seed : seeds) {
      const NetworkSpec spec = architecture_from_config(c, data.train.dim, data.classes, seed, "deep_mlp");
      TrainOptions o = base;
      o.arm = a.arm;
      o.seed = seed;
      o.label = a.name;
      if (a.arm == Arm::target_r)
        o.r_target = a.value;
      else
        o.lr = a.value;
      const auto tr = train(spec, init_params(spec), data, o);
      rec.steps.insert(rec.steps.end(), tr.rows.begin(), tr.rows.end());
      accs.push_back(tr.final_acc);
      viol.push_back(static_cast<double>(tr.violations));
      max_rs.push_back(tr.max_r);
      divergent_runs += tr.divergent;
    }
    // max r per epoch-equivalent, pooled over seeds
    nlohmann::json per_epoch = nlohmann::json::array();
    for (const auto& row : rec.steps) {
      const auto e = static_cast<std::size_t>(row.step / epoch);
      if (per_epoch.size() <= e) per_epoch.push_back(0.0);
      if (std::isfinite(row.r)) per_epoch[e] = std::max(per_epoch[e].get<double>(), row.r);
    }
    rec.divergent = divergent_runs > 0;
    res.divergent = res.divergent || rec.divergent;
    rec.summary = {{"arm", a.name},
                   {"final_acc", spread_json(accs)},
                   {"violations", spread_json(viol)},
                   {"total_violations", static_cast<long>(std::accumulate(viol.begin(), viol.end(), 0.0))},
                   {"max_r", detail::jreal(*std::max_element(max_rs.begin(), max_rs.end()))},
                   {"max_r_per_epoch", per_epoch},
                   {"divergent_runs", divergent_runs}};
    res.summary["arms"].push_back(rec.summary);
    res.parts.emplace_back(a.name, std::move(rec));
  }
  return res;
}

}  // namespace ghost::harness
