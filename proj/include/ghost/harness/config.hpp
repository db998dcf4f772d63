#pragma once

// Flat key = value configuration. '#' starts a comment; blank lines are
// ignored; later assignments override earlier ones.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ghost/error.hpp"

namespace ghost::harness {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

}  // namespace detail

class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<text>") {
    Config c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw Error(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw Error(origin + ":" + std::to_string(lineno) + ": empty key");
      c.values_[key] = detail::trim(line.substr(eq + 1));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string str(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw Error("config: missing key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  double real(const std::string& key) const { return to_real(key, str(key)); }

  long integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

  long integer(const std::string& key) const {
    const std::string v = str(key);
    std::size_t used = 0;
    long out = 0;
    try {
      out = std::stol(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) throw Error("config: key '" + key + "' expects an integer, got '" + v + "'");
    return out;
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error("config: key '" + key + "' expects true/false, got '" + v + "'");
  }

  /// Comma-separated reals, or "log:lo:hi:n" for n log-spaced points.
  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    return parse_reals(key, str(key));
  }

  std::vector<std::string> list(const std::string& key, const std::vector<std::string>& fallback) const {
    if (!has(key)) return fallback;
    return detail::split(str(key), ',');
  }

  static std::vector<double> parse_reals(const std::string& key, const std::string& v) {
    std::vector<double> out;
    if (v.rfind("log:", 0) == 0) {
      const auto parts = detail::split(v.substr(4), ':');
      if (parts.size() != 3) throw Error("config: key '" + key + "' expects log:lo:hi:n");
      const double lo = to_real(key, parts[0]), hi = to_real(key, parts[1]);
      const double n = to_real(key, parts[2]);
      if (!(lo > 0.0 && hi > lo && n >= 2.0 && n == std::floor(n)))
        throw Error("config: key '" + key + "' has an invalid log grid '" + v + "'");
      out = log_grid(lo, hi, static_cast<std::size_t>(n));
    } else {
      for (const auto& p : detail::split(v, ',')) out.push_back(to_real(key, p));
    }
    if (out.empty()) throw Error("config: key '" + key + "' is an empty list");
    return out;
  }

  /// n points from lo to hi, equally spaced in log10.
  static std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    const double a = std::log10(lo), b = std::log10(hi);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
  }

 private:
  static double to_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) throw Error("config: key '" + key + "' expects a number, got '" + v + "'");
    return out;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace ghost::harness
