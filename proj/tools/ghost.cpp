// ghost <subcommand> --config <path> [overrides]
//
// Exit codes: 0 success, 2 divergence detected (records still written), 1 error.

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ghost/error.hpp"
#include "ghost/harness/utilities.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out_dir;
  std::string seed;
  std::string arm;
  std::string r_grid;
  std::string spike_mult;
  std::vector<std::string> sets;
};

void add_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "key = value config file");
  sub->add_option("--out-dir", o.out_dir, "output directory (default out/<subcommand>)");
  sub->add_option("--seed", o.seed, "seed or comma list of seeds");
  sub->add_option("--arm", o.arm, "arm or comma list of arms");
  sub->add_option("--r-grid", o.r_grid, "comma list or log:lo:hi:n");
  sub->add_option("--spike-mult", o.spike_mult, "spike multiplier or comma list");
  sub->add_option("--set", o.sets, "extra key=value override (repeatable)");
}

ghost::harness::Config build_config(const Overrides& o) {
  using ghost::harness::Config;
  Config c = o.config.empty() ? Config{} : Config::load(o.config);
  if (!o.seed.empty()) c.set("seeds", o.seed);
  if (!o.arm.empty()) c.set("arms", o.arm);
  if (!o.r_grid.empty()) c.set("r_grid", o.r_grid);
  if (!o.spike_mult.empty()) c.set("spike_multipliers", o.spike_mult);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ghost::Error("--set expects key=value, got '" + kv + "'");
    c.set(ghost::harness::detail::trim(kv.substr(0, eq)), ghost::harness::detail::trim(kv.substr(eq + 1)));
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ghost radius experiments"};
  app.require_subcommand(1);
  Overrides o;
  for (const auto& [name, driver] : ghost::harness::drivers()) add_flags(app.add_subcommand(name, name), o);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = build_config(o);
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = ghost::harness::run_experiment(name, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string out = o.out_dir.empty() ? "out/" + name : o.out_dir;
    ghost::harness::emit_experiment(res, out);
    std::cout << res.summary.dump(2) << '\n';
    std::cerr << name << ": wrote " << out << " in " << secs << " s\n";
    if (res.divergent) {
      std::cerr << name << ": divergence detected\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "ghost " << name << ": error: " << e.what() << '\n';
    return 1;
  }
}
