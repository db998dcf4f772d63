#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ghost/harness/utilities.hpp"

using namespace ghost;
using namespace ghost::harness;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ghost_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

Config small_training_config() {
  return Config::parse(
      "per_class = 20\n"
      "steps = 30\n"
      "seeds = 3\n"
      "spike_step = 10\n"
      "spike_hold = 10\n"
      "arch = mlp_tanh\n");
}

}  // namespace

TEST(Config, ParsesCommentsAndOverrides) {
  const auto c = Config::parse("# header\nlr = 0.5   # trailing\n\nname = a b\nlr=0.25\n");
  EXPECT_DOUBLE_EQ(c.real("lr"), 0.25);
  EXPECT_EQ(c.str("name"), "a b");
  EXPECT_EQ(c.integer("missing", 4), 4);
  EXPECT_FALSE(c.has("header"));
}

TEST(Config, ErrorsCarryLineNumbers) {
  try {
    Config::parse("a = 1\nbroken line\n", "x.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("x.cfg:2"), std::string::npos);
  }
  EXPECT_THROW(Config::parse(" = 3\n"), Error);
  const auto c = Config::parse("n = 2.5\nb = maybe\ngrid = log:1:0.1:3\n");
  EXPECT_THROW(c.integer("n"), Error);
  EXPECT_THROW(c.flag("b", false), Error);
  EXPECT_THROW(c.reals("grid", {}), Error);
  EXPECT_THROW(c.str("absent"), Error);
}

TEST(Config, RealListsAndLogGrids) {
  const auto c = Config::parse("a = 1, 2.5 ,3\ng = log:0.01:100:13\n");
  EXPECT_EQ(c.reals("a", {}), (std::vector<double>{1, 2.5, 3}));
  const auto g = c.reals("g", {});
  ASSERT_EQ(g.size(), 13u);
  EXPECT_EQ(g.front(), 0.01);
  EXPECT_EQ(g.back(), 100.0);
  EXPECT_EQ(g[6], 1.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::pow(10.0, 1.0 / 3.0), 1e-12);
}

TEST(Dataset, BlobsCountsAndSplit) {
  DatasetSpec s;
  const auto raw = make_blobs(s);
  EXPECT_EQ(raw.y.size(), 500u);
  const auto d = load_dataset(s);
  EXPECT_EQ(d.train.size(), 400u);
  EXPECT_EQ(d.test.size(), 100u);
  EXPECT_EQ(d.classes, 10u);
  EXPECT_EQ(d.train.dim, 16u);
  for (std::size_t j = 0; j < d.train.dim; ++j) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < d.train.size(); ++i) m += d.train.row(i)[j];
    m /= d.train.size();
    for (std::size_t i = 0; i < d.train.size(); ++i) v += std::pow(d.train.row(i)[j] - m, 2);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / d.train.size(), 1.0, 1e-12);
  }
}

TEST(Dataset, SnapshotIsDeterministic) {
  std::ostringstream a, b;
  write_snapshot(a, load_dataset(DatasetSpec{}));
  write_snapshot(b, load_dataset(DatasetSpec{}));
  EXPECT_EQ(a.str(), b.str());
  DatasetSpec other;
  other.seed = 8;
  std::ostringstream c;
  write_snapshot(c, load_dataset(other));
  EXPECT_NE(a.str(), c.str());
}

TEST(Dataset, CsvShapes) {
  std::istringstream in("f0,label,f1\n0.5,1,2\n1.5,0,-1\n\n2.5,2,0\n3.5,1,4\n");
  const auto raw = parse_csv(in, "label");
  EXPECT_EQ(raw.dim, 2u);
  EXPECT_EQ(raw.y, (std::vector<std::size_t>{1, 0, 2, 1}));
  EXPECT_EQ(raw.x, (std::vector<double>{0.5, 2, 1.5, -1, 2.5, 0, 3.5, 4}));
  EXPECT_EQ(raw.classes, 3u);
  const auto d = split_and_standardize(raw, 0.5, 1);
  EXPECT_EQ(d.train.size() + d.test.size(), 4u);
}

TEST(Dataset, CsvErrorsNameTheLine) {
  auto err = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_csv(in, "label", "d.csv");
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(err("a,label\n1,0\n2\n").find("d.csv:3"), std::string::npos);
  EXPECT_NE(err("a,label\n1,0\nx,1\n").find("d.csv:3"), std::string::npos);
  EXPECT_NE(err("a,label\n1,0.5\n").find("d.csv:2"), std::string::npos);
  EXPECT_NE(err("a,b\n1,0\n").find("no column"), std::string::npos);
  EXPECT_NE(err("").find("empty"), std::string::npos);
  RawData raw;
  raw.dim = 1;
  raw.x = {0, 1, 2};
  raw.y = {0, 1, 3};
  EXPECT_THROW(split_and_standardize(raw, 0.5, 1, 3), Error);
}

namespace {

double random_real(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 9);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  switch (kind(rng)) {
    case 0: return INFINITY;
    case 1: return -INFINITY;
    case 2: return std::ldexp(u(rng), -300);
    default: return u(rng) * std::pow(10.0, std::uniform_int_distribution<int>(-20, 20)(rng));
  }
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same(const StepRow& a, const StepRow& b) {
  return a.step == b.step && same(a.loss, b.loss) && same(a.test_acc, b.test_acc) && same(a.tau, b.tau) &&
         same(a.rho_a, b.rho_a) && same(a.r, b.r) && same(a.lr_effective, b.lr_effective) && a.arm == b.arm &&
         a.seed == b.seed && a.divergent == b.divergent;
}

}  // namespace

TEST(Record, CsvAndJsonlRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    RunRecord rec;
    const int n = std::uniform_int_distribution<int>(0, 6)(rng);
    for (int i = 0; i < n; ++i) {
      StepRow s{i, random_real(rng), random_real(rng), random_real(rng), random_real(rng), random_real(rng),
                trial % 7 == 0 ? NAN : random_real(rng), "arm" + std::to_string(i % 3), rng() % 1000, (rng() & 1) != 0};
      rec.steps.push_back(s);
      rec.sweeps.push_back({random_real(rng), random_real(rng), random_real(rng), random_real(rng),
                            "dir/" + std::to_string(i), rng() % 1000});
    }
    rec.summary = {{"trial", trial}};
    rec.divergent = trial % 2 == 0;

    std::stringstream sc, wc, jl;
    write_steps_csv(sc, rec.steps);
    write_sweep_csv(wc, rec.sweeps);
    write_jsonl(jl, rec);
    const auto steps = parse_steps_csv(sc);
    const auto sweeps = parse_sweep_csv(wc);
    const auto back = parse_jsonl(jl);
    ASSERT_EQ(steps.size(), rec.steps.size());
    ASSERT_EQ(back.steps.size(), rec.steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
      EXPECT_TRUE(same(steps[i], rec.steps[i]));
      EXPECT_TRUE(same(back.steps[i], rec.steps[i]));
    }
    EXPECT_EQ(sweeps, rec.sweeps);
    EXPECT_EQ(back.sweeps, rec.sweeps);
    EXPECT_EQ(back.summary, rec.summary);
    EXPECT_EQ(back.divergent, rec.divergent);
  }
}

TEST(Record, EmptyRecordWritesHeaders) {
  const auto dir = scratch("empty");
  emit(RunRecord{}, dir.string());
  EXPECT_EQ(slurp(dir / "steps.csv"), std::string(kStepsHeader) + "\n");
  EXPECT_EQ(slurp(dir / "sweep.csv"), std::string(kSweepHeader) + "\n");
  std::filesystem::remove_all(dir);
}

TEST(Record, DivergenceMarker) {
  StepRow s;
  s.loss = INFINITY;
  s.divergent = true;
  s.arm = "plain";
  std::ostringstream os;
  write_steps_csv(os, {s});
  EXPECT_NE(os.str().find(",inf,"), std::string::npos);
  EXPECT_NE(os.str().find(",true\n"), std::string::npos);
}

TEST(Record, RejectsMalformedInput) {
  std::istringstream bad_header("step,loss\n");
  EXPECT_THROW(parse_steps_csv(bad_header), Error);
  std::istringstream short_row(std::string(kSweepHeader) + "\n1,2,3\n");
  EXPECT_THROW(parse_sweep_csv(short_row), Error);
  StepRow s;
  s.arm = "a,b";
  std::ostringstream os;
  EXPECT_THROW(write_steps_csv(os, {s}), Error);
}

TEST(Stats, QuantilesAndSpread) {
  const std::vector<double> v{4, 1, 3, 2, 5};
  EXPECT_EQ(median(v), 3.0);
  const auto s = median_iqr(v);
  EXPECT_EQ(s.q25, 2.0);
  EXPECT_EQ(s.q75, 4.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2}, 0.5), 1.5);
  EXPECT_DOUBLE_EQ(stddev({1, 3}), 1.0);
  EXPECT_THROW(median({}), Error);
}

TEST(Models, MenuBuildsAndCheckpointsRoundTrip) {
  for (const auto& id : architecture_menu()) {
    const auto spec = make_architecture(id, 16, 10, 5);
    const auto params = init_params(spec);
    std::stringstream ss;
    ss << checkpoint_json(spec, params).dump();
    const auto ck = parse_checkpoint(nlohmann::json::parse(ss));
    EXPECT_EQ(ck.spec, spec) << id;
    EXPECT_EQ(ck.params, params) << id;
  }
  EXPECT_THROW(make_architecture("resnet", 16, 10, 0), Error);
  auto j = checkpoint_json(make_architecture("linear", 2, 2, 0), Params(6, 0.0));
  j["params"].push_back(1.0);
  EXPECT_THROW(parse_checkpoint(j), Error);
  j["version"] = 2;
  EXPECT_THROW(parse_checkpoint(j), Error);
}

TEST(Models, CustomArchitecture) {
  const auto c = Config::parse("arch = custom\nhidden = 8, 4\nactivation = ria:2, gelu\nnormalize = true\n");
  const auto s = architecture_from_config(c, 3, 2, 1);
  EXPECT_EQ(s.layer_widths, (std::vector<std::size_t>{3, 8, 4, 2}));
  EXPECT_EQ(to_string(s.activations[0]), "ria:2");
  EXPECT_TRUE(s.normalized(1));
}

TEST(Train, NoSpikeMeansIdenticalArms) {
  const auto data = load_dataset(DatasetSpec::from_config(small_training_config()));
  const auto spec = make_architecture("mlp_tanh", data.train.dim, data.classes, 3);
  TrainOptions o;
  o.steps = 30;
  o.spike_step = 5;
  o.spike_hold = 10;
  o.spike_multiplier = 1.0;
  o.lr = 1e-4;
  o.clip_c = 1e6;
  o.seed = 3;
  std::vector<TrainResult> runs;
  for (Arm a : {Arm::plain, Arm::grad_clip, Arm::rho_controller}) {
    o.arm = a;
    runs.push_back(train(spec, init_params(spec), data, o));
  }
  // Small steps sit inside the radius and far under the clip threshold, so no
  // arm intervenes.
  for (const auto& r : runs) {
    EXPECT_EQ(r.params, runs[0].params);
    EXPECT_LT(r.max_r, 1.0);
    ASSERT_EQ(r.rows.size(), runs[0].rows.size());
    for (std::size_t i = 0; i < r.rows.size(); ++i) EXPECT_EQ(r.rows[i].loss, runs[0].rows[i].loss);
  }
}

TEST(Train, LoggedRatioMatchesTauOverRho) {
  const auto data = load_dataset(DatasetSpec::from_config(small_training_config()));
  const auto spec = make_architecture("mlp_tanh", data.train.dim, data.classes, 1);
  for (Arm a : {Arm::plain, Arm::rho_controller, Arm::target_r}) {
    TrainOptions o;
    o.steps = 25;
    o.arm = a;
    o.lr = 0.05;
    o.r_target = 2.0;
    o.optimizer = Optimizer::sgd;
    const auto r = train(spec, init_params(spec), data, o);
    for (const auto& row : r.rows) {
      EXPECT_NEAR(row.r, normalized_step(row.tau, row.rho_a), 1e-12);
      if (a == Arm::rho_controller) {
        EXPECT_LE(row.r, 1.0 + 1e-12);
      }
      if (a == Arm::target_r && std::isfinite(row.rho_a)) {
        EXPECT_NEAR(row.r, 2.0, 1e-12);
      }
    }
  }
}

TEST(Train, RhoStrideReusesEstimates) {
  const auto data = load_dataset(DatasetSpec::from_config(small_training_config()));
  const auto spec = make_architecture("mlp_tanh", data.train.dim, data.classes, 1);
  TrainOptions o;
  o.steps = 9;
  o.rho_every = 3;
  const auto r = train(spec, init_params(spec), data, o);
  ASSERT_EQ(r.rows.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(r.rows[i].rho_a, r.rows[i - i % 3].rho_a);
}

TEST(Train, OverflowIsMarkedDivergent) {
  const auto data = load_dataset(DatasetSpec::from_config(small_training_config()));
  const auto spec = make_architecture("mlp_relu", data.train.dim, data.classes, 1);
  TrainOptions o;
  o.steps = 40;
  o.optimizer = Optimizer::sgd;
  o.lr = 1e200;
  const auto r = train(spec, init_params(spec), data, o);
  EXPECT_TRUE(r.divergent);
  EXPECT_EQ(r.final_acc, 0.0);
  EXPECT_TRUE(r.rows.back().divergent);
}

TEST(Train, BatchSamplerCoversEpochs) {
  BatchSampler s(10, 3, 4);
  std::vector<int> seen(10, 0);
  for (int i = 0; i < 3; ++i)
    for (auto j : s.next()) ++seen[j];
  for (int v : seen) EXPECT_LE(v, 1);
  BatchSampler full(5, 0, 1);
  EXPECT_EQ(full.next(), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Experiments, SpikeIsReproducible) {
  auto c = small_training_config();
  c.set("spike_multipliers", "100");
  const auto a = run_spike(c);
  const auto b = run_spike(c);
  ASSERT_EQ(a.parts.size(), 3u);
  const auto da = scratch("spike_a"), db = scratch("spike_b");
  emit_experiment(a, da.string());
  emit_experiment(b, db.string());
  for (const auto& [name, rec] : a.parts)
    for (const char* f : {"steps.csv", "record.jsonl"}) EXPECT_EQ(slurp(da / name / f), slurp(db / name / f));
  std::filesystem::remove_all(da);
  std::filesystem::remove_all(db);
}

TEST(Experiments, PhaseSweepLeavesCheckpointIntact) {
  const auto c = Config::parse("per_class = 20\nseeds = 1\narchs = linear\nr_grid = 0.01, 1, 100\n");
  const auto res = run_phase_sweep(c);
  ASSERT_EQ(res.parts.size(), 1u);
  const auto& rows = res.parts[0].second.sweeps;
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].direction_id, "linear");
  EXPECT_GT(rows[0].retained_acc, 0.95);
  EXPECT_LT(rows[0].loss_ratio, 1.0);
  EXPECT_TRUE(res.summary["archs"][0]["checkpoint_restored"].get<bool>());
}

TEST(Experiments, TemperatureLawAndCensoring) {
  const auto c = Config::parse("per_class = 20\nseeds = 1\nT_grid = 0.5, 1, 2\ntau_grid = 1e-6, 1e-5\n");
  const auto res = run_temperature(c);
  EXPECT_TRUE(res.summary["temperature_law_exact"].get<bool>());
  EXPECT_EQ(res.summary["censored"].get<long>(), 3);
}

TEST(Experiments, UtilitySubcommands) {
  const auto z = run_experiment("zeros", Config::parse("weights = 1,1,1\nslopes = 0,1,2\n"));
  EXPECT_NEAR(z.summary["modulus"].get<double>(), 2.0 * kPi / 3.0, 1e-12);
  const auto k = run_experiment("klcheck", Config{});
  EXPECT_EQ(k.summary["violations"].get<long>(), 0);
  const auto x = run_experiment("crossover", Config::parse("gaps = 2, 20\n"));
  EXPECT_TRUE(x.summary["rows"][0]["bisection"].is_null());
  EXPECT_NEAR(x.summary["rows"][1]["bisection"].get<double>(), std::log(10.0 * kPi), 0.1);
  const auto a = run_experiment("actscan", Config::parse("activations = tanh, relu\n"));
  EXPECT_DOUBLE_EQ(a.summary["rows"][0]["radius"].get<double>(), kPi / 2.0);
  EXPECT_DOUBLE_EQ(a.summary["rows"][1]["radius"].get<double>(), 0.0);
  EXPECT_THROW(run_experiment("nope", Config{}), Error);
}

TEST(Configs, SampleFilesParse) {
  const std::filesystem::path dir = std::filesystem::path(GHOST_SOURCE_DIR) / "configs";
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".cfg") continue;
    ++n;
    const auto c = Config::load(e.path().string());
    const std::string name = e.path().stem().string();
    ASSERT_TRUE(drivers().count(name)) << name;
    if (name == "zeros" || name == "klcheck" || name == "crossover" || name == "actscan") {
      EXPECT_NO_THROW(run_experiment(name, c)) << name;
    }
    if (c.has("seeds")) {
      EXPECT_NO_THROW(seeds_from(c));
    }
    if (c.has("dataset")) {
      EXPECT_NO_THROW(DatasetSpec::from_config(c));
    }
  }
  EXPECT_EQ(n, drivers().size());
}
