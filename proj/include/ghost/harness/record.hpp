#pragma once

// Run records and their file formats.
//
// steps.csv : step,loss,test_acc,tau,rho_a,r,lr_effective,arm,seed,divergent
// sweep.csv : param,loss_ratio,retained_acc,flip_fraction,direction_id,seed
//
// Reals are written with 17 significant digits so files round-trip exactly;
// non-finite values appear as inf / -inf / nan.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghost/error.hpp"

namespace ghost::harness {

struct StepRow {
  long step = 0;
  double loss = 0.0;
  double test_acc = 0.0;
  double tau = 0.0;
  double rho_a = 0.0;
  double r = 0.0;
  double lr_effective = 0.0;
  std::string arm;
  std::uint64_t seed = 0;
  bool divergent = false;

  bool operator==(const StepRow&) const = default;
};

struct SweepRow {
  double param = 0.0;
  double loss_ratio = 0.0;
  double retained_acc = 0.0;
  double flip_fraction = 0.0;
  std::string direction_id;
  std::uint64_t seed = 0;

  bool operator==(const SweepRow&) const = default;
};

struct RunRecord {
  std::vector<StepRow> steps;
  std::vector<SweepRow> sweeps;
  nlohmann::json summary = nlohmann::json::object();
  bool divergent = false;
};

inline constexpr const char* kStepsHeader = "step,loss,test_acc,tau,rho_a,r,lr_effective,arm,seed,divergent";
inline constexpr const char* kSweepHeader = "param,loss_ratio,retained_acc,flip_fraction,direction_id,seed";

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void check_label(const std::string& s, const char* what) {
  if (s.find_first_of(",\n\r\"") != std::string::npos)
    throw Error(std::string("record: ") + what + " must not contain commas, quotes or newlines");
}

inline double parse_real(const std::string& s, std::size_t lineno) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw Error("record:" + std::to_string(lineno) + ": bad number '" + s + "'");
  return v;
}

inline std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::string c;
  std::istringstream is(line);
  while (std::getline(is, c, ',')) out.push_back(c);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline void write_steps_csv(std::ostream& os, const std::vector<StepRow>& rows) {
  os << kStepsHeader << '\n';
  for (const auto& r : rows) {
    detail::check_label(r.arm, "arm");
    os << r.step << ',' << format_real(r.loss) << ',' << format_real(r.test_acc) << ',' << format_real(r.tau) << ','
       << format_real(r.rho_a) << ',' << format_real(r.r) << ',' << format_real(r.lr_effective) << ',' << r.arm << ','
       << r.seed << ',' << (r.divergent ? "true" : "false") << '\n';
  }
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    detail::check_label(r.direction_id, "direction_id");
    os << format_real(r.param) << ',' << format_real(r.loss_ratio) << ',' << format_real(r.retained_acc) << ','
       << format_real(r.flip_fraction) << ',' << r.direction_id << ',' << r.seed << '\n';
  }
}

inline std::vector<StepRow> parse_steps_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kStepsHeader) throw Error("record:1: unexpected steps.csv header");
  std::vector<StepRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = detail::cells(line);
    if (c.size() != 10) throw Error("record:" + std::to_string(lineno) + ": expected 10 fields");
    StepRow r;
    r.step = std::stol(c[0]);
    r.loss = detail::parse_real(c[1], lineno);
    r.test_acc = detail::parse_real(c[2], lineno);
    r.tau = detail::parse_real(c[3], lineno);
    r.rho_a = detail::parse_real(c[4], lineno);
    r.r = detail::parse_real(c[5], lineno);
    r.lr_effective = detail::parse_real(c[6], lineno);
    r.arm = c[7];
    r.seed = std::stoull(c[8]);
    if (c[9] != "true" && c[9] != "false") throw Error("record:" + std::to_string(lineno) + ": bad divergent flag");
    r.divergent = c[9] == "true";
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<SweepRow> parse_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) throw Error("record:1: unexpected sweep.csv header");
  std::vector<SweepRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = detail::cells(line);
    if (c.size() != 6) throw Error("record:" + std::to_string(lineno) + ": expected 6 fields");
    SweepRow r;
    r.param = detail::parse_real(c[0], lineno);
    r.loss_ratio = detail::parse_real(c[1], lineno);
    r.retained_acc = detail::parse_real(c[2], lineno);
    r.flip_fraction = detail::parse_real(c[3], lineno);
    r.direction_id = c[4];
    r.seed = std::stoull(c[5]);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace detail {

// JSON has no inf / nan; keep them as strings.
inline nlohmann::json jreal(double v) {
  if (std::isfinite(v)) return v;
  return format_real(v);
}

inline double from_jreal(const nlohmann::json& j) {
  if (j.is_string()) return parse_real(j.get<std::string>(), 0);
  return j.get<double>();
}

}  // namespace detail

/// One JSON object per line; "kind" is "step", "sweep" or "summary".
inline void write_jsonl(std::ostream& os, const RunRecord& rec) {
  for (const auto& r : rec.steps) {
    nlohmann::json j = {{"kind", "step"},
                        {"step", r.step},
                        {"loss", detail::jreal(r.loss)},
                        {"test_acc", detail::jreal(r.test_acc)},
                        {"tau", detail::jreal(r.tau)},
                        {"rho_a", detail::jreal(r.rho_a)},
                        {"r", detail::jreal(r.r)},
                        {"lr_effective", detail::jreal(r.lr_effective)},
                        {"arm", r.arm},
                        {"seed", r.seed},
                        {"divergent", r.divergent}};
    os << j.dump() << '\n';
  }
  for (const auto& r : rec.sweeps) {
    nlohmann::json j = {{"kind", "sweep"},
                        {"param", detail::jreal(r.param)},
                        {"loss_ratio", detail::jreal(r.loss_ratio)},
                        {"retained_acc", detail::jreal(r.retained_acc)},
                        {"flip_fraction", detail::jreal(r.flip_fraction)},
                        {"direction_id", r.direction_id},
                        {"seed", r.seed}};
    os << j.dump() << '\n';
  }
  nlohmann::json s = {{"kind", "summary"}, {"divergent", rec.divergent}, {"summary", rec.summary}};
  os << s.dump() << '\n';
}

inline RunRecord parse_jsonl(std::istream& in) {
  RunRecord rec;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const std::string kind = j.at("kind");
    if (kind == "step") {
      StepRow r;
      r.step = j.at("step");
      r.loss = detail::from_jreal(j.at("loss"));
      r.test_acc = detail::from_jreal(j.at("test_acc"));
      r.tau = detail::from_jreal(j.at("tau"));
      r.rho_a = detail::from_jreal(j.at("rho_a"));
      r.r = detail::from_jreal(j.at("r"));
      r.lr_effective = detail::from_jreal(j.at("lr_effective"));
      r.arm = j.at("arm");
      r.seed = j.at("seed");
      r.divergent = j.at("divergent");
      rec.steps.push_back(std::move(r));
    } else if (kind == "sweep") {
      SweepRow r;
      r.param = detail::from_jreal(j.at("param"));
      r.loss_ratio = detail::from_jreal(j.at("loss_ratio"));
      r.retained_acc = detail::from_jreal(j.at("retained_acc"));
      r.flip_fraction = detail::from_jreal(j.at("flip_fraction"));
      r.direction_id = j.at("direction_id");
      r.seed = j.at("seed");
      rec.sweeps.push_back(std::move(r));
    } else if (kind == "summary") {
      rec.divergent = j.at("divergent");
      rec.summary = j.at("summary");
    } else {
      throw Error("record: unknown kind '" + kind + "'");
    }
  }
  return rec;
}

/// Writes steps.csv, sweep.csv, summary.json and record.jsonl under `dir`.
inline void emit(const RunRecord& rec, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto open = [&](const std::string& name) {
    std::ofstream f(std::filesystem::path(dir) / name);
    if (!f) throw Error("record: cannot write '" + (std::filesystem::path(dir) / name).string() + "'");
    return f;
  };
  {
    auto f = open("steps.csv");
    write_steps_csv(f, rec.steps);
  }
  {
    auto f = open("sweep.csv");
    write_sweep_csv(f, rec.sweeps);
  }
  {
    auto f = open("record.jsonl");
    write_jsonl(f, rec);
  }
  {
    auto f = open("summary.json");
    f << rec.summary.dump(2) << '\n';
  }
}

}  // namespace ghost::harness
