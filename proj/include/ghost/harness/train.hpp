#pragma once

// Training loop with optional LR spike and the radius-aware arms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ghost/autonet.hpp"
#include "ghost/controller.hpp"
#include "ghost/error.hpp"
#include "ghost/harness/dataset.hpp"
#include "ghost/harness/record.hpp"
#include "ghost/radius.hpp"

namespace ghost::harness {

enum class Arm { plain, grad_clip, rho_controller, target_r };

inline const char* to_string(Arm a) {
  switch (a) {
    case Arm::plain: return "plain";
    case Arm::grad_clip: return "grad_clip";
    case Arm::rho_controller: return "rho_controller";
    case Arm::target_r: return "target_r";
  }
  return "?";
}

inline Arm parse_arm(const std::string& s) {
  if (s == "plain") return Arm::plain;
  if (s == "grad_clip") return Arm::grad_clip;
  if (s == "rho_controller") return Arm::rho_controller;
  if (s == "target_r") return Arm::target_r;
  throw Error("arm: unknown '" + s + "'");
}

enum class Optimizer { adam, sgd };

inline Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw Error("optimizer: unknown '" + s + "'");
}

struct TrainOptions {
  Optimizer optimizer = Optimizer::adam;
  double lr = 1e-3;
  double momentum = 0.9;
  long steps = 200;
  std::size_t batch_size = 64;  ///< 0: full batch
  Arm arm = Arm::plain;
  double clip_c = 1.0;
  double r_target = 1.0;
  double eta_max = 1.0;
  long spike_step = -1;  ///< first step of the spike; negative disables it
  long spike_hold = 0;   ///< number of spiked steps
  double spike_multiplier = 1.0;
  RhoMode rho_mode = RhoMode::jvp;
  std::size_t rho_every = 1;
  std::size_t rho_cap = kRhoBatchCap;
  double divergence_loss = 10.0;
  std::uint64_t seed = 0;
  std::string label;  ///< arm column in the step log; defaults to the arm name
};

struct TrainResult {
  Params params;
  std::vector<StepRow> rows;
  double final_loss = 0.0;  ///< mean training loss of the final parameters
  double final_acc = 0.0;   ///< test accuracy of the final parameters
  bool divergent = false;
  double max_r = 0.0;
  long violations = 0;  ///< steps with r > 1 + 1e-12
  long steps_run = 0;
};

inline bool spiked(const TrainOptions& o, long step) {
  return o.spike_step >= 0 && step >= o.spike_step && step < o.spike_step + o.spike_hold;
}

/// Seeded epoch-wise minibatch order.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
      : order_(n), batch_(batch == 0 || batch > n ? n : batch), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next() {
    if (pos_ + batch_ > order_.size()) reshuffle();
    std::vector<std::size_t> idx(order_.begin() + static_cast<long>(pos_),
                                 order_.begin() + static_cast<long>(pos_ + batch_));
    pos_ += batch_;
    return idx;
  }

 private:
  void reshuffle() {
    if (batch_ < order_.size()) std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

inline bool all_finite(const Params& p) {
  return std::all_of(p.begin(), p.end(), [](double x) { return std::isfinite(x); });
}

/// Evaluation that reports overflow as an infinite loss and zero accuracy.
inline Evaluation safe_evaluate(const NetworkSpec& spec, const Params& p, const Batch& b, double temperature = 1.0) {
  try {
    Evaluation ev = evaluate(spec, p, b, temperature);
    if (!std::isfinite(ev.loss)) ev.loss = INFINITY;
    return ev;
  } catch (const Error&) {
    Evaluation ev;
    ev.loss = INFINITY;
    ev.accuracy = 0.0;
    ev.predictions.assign(b.size(), spec.num_classes());  // no valid class
    return ev;
  }
}

inline TrainResult train(const NetworkSpec& spec, Params params, const Dataset& data, const TrainOptions& o) {
  require(o.steps >= 0, "train: steps must be nonnegative");
  require(o.lr > 0.0, "train: lr must be positive");
  TrainResult res;
  const std::string label = o.label.empty() ? to_string(o.arm) : o.label;
  BatchSampler sampler(data.train.size(), o.batch_size, o.seed * 7919 + 17);
  AdamState adam;
  SgdState sgd;
  RhoSchedule schedule(o.rho_every);
  bool overflow = false;

  for (long step = 0; step < o.steps; ++step) {
    const auto idx = sampler.next();
    const Batch mb = subset(data.train, idx);
    StepRow row;
    row.step = step;
    row.arm = label;
    row.seed = o.seed;

    LossGrad lg;
    try {
      lg = loss_and_grad(spec, params, mb);
    } catch (const Error&) {
      lg.loss = INFINITY;
    }
    if (!std::isfinite(lg.loss) || !all_finite(lg.grad)) {
      row.loss = INFINITY;
      row.divergent = true;
      row.tau = row.rho_a = row.r = row.lr_effective = NAN;
      res.rows.push_back(row);
      res.divergent = overflow = true;
      break;
    }
    row.loss = lg.loss;

    Params g = std::move(lg.grad);
    if (o.arm == Arm::grad_clip) g = grad_clip_baseline(g, o.clip_c);
    // The target-r arm sets the step length itself; the optimizer only supplies a direction.
    const double lr_eff = o.arm == Arm::target_r ? 1.0 : o.lr * (spiked(o, step) ? o.spike_multiplier : 1.0);
    Params p;
    if (o.optimizer == Optimizer::adam) {
      AdamHyper hp;
      hp.lr = lr_eff;
      p = adam_step(g, adam, hp);
    } else {
      p = sgd_momentum_step(g, sgd, {lr_eff, o.momentum});
    }

    if (!std::isfinite(norm2(p))) {
      row.divergent = true;
      row.tau = INFINITY;
      row.rho_a = row.r = NAN;
      row.lr_effective = lr_eff;
      res.rows.push_back(row);
      res.divergent = overflow = true;
      break;
    }

    double rho = kInfinity;
    if (norm2(p) > 0.0) {
      if (schedule.due(static_cast<std::size_t>(step)))
        schedule.record(static_cast<std::size_t>(step), rho_estimate(spec, params, mb, p, o.rho_mode, o.rho_cap).report.rho_a);
      rho = schedule.rho();
    }

    Params update;
    double lr_logged = lr_eff;
    if (o.arm == Arm::rho_controller) {
      auto c = radius_clip(p, rho);
      update = std::move(c.update);
      lr_logged = lr_eff * c.decision.scale;
    } else if (o.arm == Arm::target_r) {
      if (norm2(p) > 0.0) {
        const Params v = scaled(p, -1.0);
        auto ts = target_r_step(v, o.r_target, rho, o.eta_max);
        update = std::move(ts.update);
        lr_logged = ts.eta;
      } else {
        update = p;
      }
    } else {
      update = std::move(p);
    }

    row.tau = norm2(update);
    row.rho_a = rho;
    row.r = normalized_step(row.tau, rho);
    row.lr_effective = lr_logged;
    axpy(1.0, update, params);
    res.max_r = std::max(res.max_r, row.r);
    if (row.r > 1.0 + 1e-12) ++res.violations;

    const Evaluation ev = safe_evaluate(spec, params, data.test);
    row.test_acc = ev.accuracy;
    row.divergent = !(row.loss <= o.divergence_loss);
    res.rows.push_back(row);
    res.steps_run = step + 1;
    if (!all_finite(params)) {
      res.divergent = overflow = true;
      break;
    }
  }

  const Evaluation tr = safe_evaluate(spec, params, data.train);
  const Evaluation te = safe_evaluate(spec, params, data.test);
  res.final_loss = tr.loss;
  // An overflowed run has no usable model.
  res.final_acc = overflow ? 0.0 : te.accuracy;
  if (!(res.final_loss <= o.divergence_loss)) res.divergent = true;
  res.params = std::move(params);
  return res;
}

struct ConvergeOptions {
  double lr = 1e-2;
  double target_loss = 0.1;
  long max_steps = 2000;
  long check_every = 10;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  double temperature = 1.0;
};

struct Converged {
  Params params;
  long steps = 0;
  double train_loss = 0.0;
  bool reached_target = false;
};

/// Adam until the full training loss drops below the target or the step
/// budget runs out.
inline Converged train_to_convergence(const NetworkSpec& spec, Params params, const Batch& train,
                                      const ConvergeOptions& o) {
  BatchSampler sampler(train.size(), o.batch_size, o.seed * 104729 + 3);
  AdamState st;
  AdamHyper hp;
  hp.lr = o.lr;
  Converged c;
  for (long step = 0; step < o.max_steps; ++step) {
    if (step % o.check_every == 0) {
      const double l = evaluate(spec, params, train, o.temperature).loss;
      if (l < o.target_loss) {
        c.reached_target = true;
        c.steps = step;
        c.train_loss = l;
        c.params = std::move(params);
        return c;
      }
    }
    const auto idx = sampler.next();
    const Batch mb = idx.size() == train.size() ? train : subset(train, idx);
    const auto lg = loss_and_grad(spec, params, mb, o.temperature);
    axpy(1.0, adam_step(lg.grad, st, hp), params);
  }
  c.steps = o.max_steps;
  c.train_loss = evaluate(spec, params, train, o.temperature).loss;
  c.reached_target = c.train_loss < o.target_loss;
  c.params = std::move(params);
  return c;
}

}  // namespace ghost::harness
