#pragma once

// Datasets: seeded Gaussian blobs or a CSV file, split by a seeded shuffle and
// standardized with training-set statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ghost/autonet.hpp"
#include "ghost/error.hpp"
#include "ghost/harness/config.hpp"

namespace ghost::harness {

struct DatasetSpec {
  enum class Source { blobs, csv } source = Source::blobs;
  // blobs
  std::size_t classes = 10;
  std::size_t dim = 16;
  std::size_t per_class = 50;
  double spread = 1.0;        ///< within-class standard deviation
  double center_scale = 1.0;  ///< class centres drawn from N(0, center_scale^2 I)
  // csv
  std::string csv_path;
  std::string label_column = "label";
  // both
  double train_fraction = 0.8;
  std::uint64_t seed = 7;

  void validate() const {
    require(train_fraction > 0.0 && train_fraction < 1.0, "dataset: train_fraction must lie in (0, 1)");
    if (source == Source::blobs) {
      require(classes >= 2, "dataset: need at least two classes");
      require(dim >= 1 && per_class >= 1, "dataset: dim and per_class must be positive");
      require(spread > 0.0 && center_scale > 0.0, "dataset: spread and center_scale must be positive");
    } else {
      require(!csv_path.empty(), "dataset: csv_path is required for csv datasets");
    }
  }

  static DatasetSpec from_config(const Config& c) {
    DatasetSpec s;
    const std::string src = c.str("dataset", "blobs");
    if (src == "blobs")
      s.source = Source::blobs;
    else if (src == "csv")
      s.source = Source::csv;
    else
      throw Error("dataset: unknown source '" + src + "'");
    s.classes = static_cast<std::size_t>(c.integer("classes", 10));
    s.dim = static_cast<std::size_t>(c.integer("dim", 16));
    s.per_class = static_cast<std::size_t>(c.integer("per_class", 50));
    s.spread = c.real("spread", 1.0);
    s.center_scale = c.real("center_scale", 1.0);
    s.csv_path = c.str("csv_path", "");
    s.label_column = c.str("label_column", "label");
    s.train_fraction = c.real("train_fraction", 0.8);
    s.seed = static_cast<std::uint64_t>(c.integer("data_seed", 7));
    s.validate();
    return s;
  }
};

struct Dataset {
  Batch train;
  Batch test;
  std::size_t classes = 0;
};

struct RawData {
  std::vector<double> x;
  std::size_t dim = 0;
  std::vector<std::size_t> y;
  std::size_t classes = 0;
};

inline RawData make_blobs(const DatasetSpec& s) {
  s.validate();
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> centres(s.classes * s.dim);
  for (double& c : centres) c = s.center_scale * n01(rng);
  RawData d;
  d.dim = s.dim;
  d.classes = s.classes;
  for (std::size_t k = 0; k < s.classes; ++k) {
    for (std::size_t i = 0; i < s.per_class; ++i) {
      for (std::size_t j = 0; j < s.dim; ++j) d.x.push_back(centres[k * s.dim + j] + s.spread * n01(rng));
      d.y.push_back(k);
    }
  }
  return d;
}

/// CSV with a header row; the label column holds integer class ids 0..K-1,
/// every other column is a numeric feature.
inline RawData parse_csv(std::istream& in, const std::string& label_column, const std::string& origin = "<csv>") {
  std::string line;
  if (!std::getline(in, line)) throw Error(origin + ": empty file");
  const auto header = detail::split(line, ',');
  const auto it = std::find(header.begin(), header.end(), label_column);
  if (it == header.end()) throw Error(origin + ":1: no column named '" + label_column + "'");
  const std::size_t label_idx = static_cast<std::size_t>(it - header.begin());
  RawData d;
  d.dim = header.size() - 1;
  if (d.dim == 0) throw Error(origin + ":1: no feature columns");
  std::size_t lineno = 1, max_label = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(detail::trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != header.size())
      throw Error(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                  " fields, found " + std::to_string(cells.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (cells[j].empty() || used != cells[j].size() || !std::isfinite(v))
        throw Error(origin + ":" + std::to_string(lineno) + ": bad number '" + cells[j] + "'");
      if (j == label_idx) {
        if (v < 0.0 || v != std::floor(v))
          throw Error(origin + ":" + std::to_string(lineno) + ": label must be a nonnegative integer");
        d.y.push_back(static_cast<std::size_t>(v));
        max_label = std::max(max_label, d.y.back());
      } else {
        d.x.push_back(v);
      }
    }
  }
  if (d.y.empty()) throw Error(origin + ": no data rows");
  d.classes = max_label + 1;
  if (d.classes < 2) throw Error(origin + ": need at least two classes");
  return d;
}

inline RawData load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw Error("dataset: cannot open '" + path + "'");
  return parse_csv(in, label_column, path);
}

/// Seeded shuffle, split, then standardize with train mean / std.
inline Dataset split_and_standardize(const RawData& raw, double train_fraction, std::uint64_t seed,
                                     std::size_t classes = 0) {
  const std::size_t n = raw.y.size();
  const std::size_t k = classes ? classes : raw.classes;
  for (auto y : raw.y)
    if (y >= k) throw Error("dataset: label " + std::to_string(y) + " out of range for " + std::to_string(k) + " classes");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  require(n_train >= 1 && n_train < n, "dataset: split leaves an empty side");

  Dataset d;
  d.classes = k;
  d.train.dim = d.test.dim = raw.dim;
  for (std::size_t i = 0; i < n; ++i) {
    Batch& b = i < n_train ? d.train : d.test;
    const std::size_t r = order[i];
    b.inputs.insert(b.inputs.end(), raw.x.begin() + r * raw.dim, raw.x.begin() + (r + 1) * raw.dim);
    b.labels.push_back(raw.y[r]);
  }
  std::vector<double> mean(raw.dim, 0.0), sd(raw.dim, 0.0);
  for (std::size_t i = 0; i < d.train.size(); ++i)
    for (std::size_t j = 0; j < raw.dim; ++j) mean[j] += d.train.inputs[i * raw.dim + j];
  for (double& m : mean) m /= static_cast<double>(d.train.size());
  for (std::size_t i = 0; i < d.train.size(); ++i)
    for (std::size_t j = 0; j < raw.dim; ++j) {
      const double c = d.train.inputs[i * raw.dim + j] - mean[j];
      sd[j] += c * c;
    }
  for (double& s : sd) {
    s = std::sqrt(s / static_cast<double>(d.train.size()));
    if (s == 0.0) s = 1.0;  // constant feature
  }
  for (Batch* b : {&d.train, &d.test})
    for (std::size_t i = 0; i < b->size(); ++i)
      for (std::size_t j = 0; j < raw.dim; ++j) {
        double& v = b->inputs[i * raw.dim + j];
        v = (v - mean[j]) / sd[j];
      }
  return d;
}

inline Dataset load_dataset(const DatasetSpec& s) {
  s.validate();
  if (s.source == DatasetSpec::Source::blobs) return split_and_standardize(make_blobs(s), s.train_fraction, s.seed);
  return split_and_standardize(load_csv(s.csv_path, s.label_column), s.train_fraction, s.seed);
}

/// Snapshot as CSV: split, label, x0..x{d-1}; full precision.
inline void write_snapshot(std::ostream& os, const Dataset& d) {
  os << "split,label";
  for (std::size_t j = 0; j < d.train.dim; ++j) os << ",x" << j;
  os << '\n';
  char buf[32];
  for (const auto& [name, b] : {std::pair<const char*, const Batch*>{"train", &d.train}, {"test", &d.test}}) {
    for (std::size_t i = 0; i < b->size(); ++i) {
      os << name << ',' << b->labels[i];
      for (double v : b->row(i)) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << ',' << buf;
      }
      os << '\n';
    }
  }
}

}  // namespace ghost::harness
