#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zadre/errors.hpp"
#include "zadre/rng.hpp"

namespace zadre {

inline constexpr std::size_t n_predictors = 9;

/// Canonical predictor order: four distance-weighted satellite features from
/// each of the two products, then elevation.
inline constexpr std::array<std::string_view, n_predictors> predictor_names = {
    "pr_p1", "pr_p2", "pr_p3", "pr_p4", "pr_i1",
    "pr_i2", "pr_i3", "pr_i4", "elevation"};

struct Sample {
  double target = 0.0;
  std::array<double, n_predictors> predictors{};
  std::string site_id;
  std::string time_id;
};

/// Column-oriented sample container. Immutable once filled; row order is
/// stable, so indices identify samples.
class Dataset {
 public:
  void add(const Sample& s) {
    if (!(s.target >= 0.0) || !std::isfinite(s.target)) {
      throw DataError("target must be finite and >= 0");
    }
    for (double p : s.predictors) {
      if (!std::isfinite(p)) throw DataError("predictors must be finite");
    }
    targets_.push_back(s.target);
    for (std::size_t j = 0; j < n_predictors; ++j) {
      columns_[j].push_back(s.predictors[j]);
    }
    site_ids_.push_back(s.site_id);
    time_ids_.push_back(s.time_id);
  }

  std::size_t size() const { return targets_.size(); }
  bool empty() const { return targets_.empty(); }

  double target(std::size_t i) const { return targets_[i]; }
  const std::vector<double>& targets() const { return targets_; }

  double predictor(std::size_t i, std::size_t j) const { return columns_[j][i]; }
  const std::vector<double>& predictor_column(std::size_t j) const {
    return columns_[j];
  }

  std::array<double, n_predictors> predictor_row(std::size_t i) const {
    std::array<double, n_predictors> row;
    for (std::size_t j = 0; j < n_predictors; ++j) row[j] = columns_[j][i];
    return row;
  }

  Sample sample(std::size_t i) const {
    return Sample{targets_[i], predictor_row(i), site_ids_[i], time_ids_[i]};
  }

  const std::string& site_id(std::size_t i) const { return site_ids_[i]; }
  const std::string& time_id(std::size_t i) const { return time_ids_[i]; }
  bool has_tags() const {
    for (std::size_t i = 0; i < size(); ++i) {
      if (!site_ids_[i].empty() || !time_ids_[i].empty()) return true;
    }
    return false;
  }

  /// Indices of these rows in the dataset they were split from. Empty unless
  /// this dataset was produced by split_three_way (or a similar subsetter).
  const std::vector<std::size_t>& origin_rows() const { return origin_rows_; }
  void set_origin_rows(std::vector<std::size_t> rows) {
    if (!rows.empty() && rows.size() != size()) {
      throw ShapeError("origin_rows must match the dataset size");
    }
    origin_rows_ = std::move(rows);
  }

 private:
  std::vector<double> targets_;
  std::array<std::vector<double>, n_predictors> columns_;
  std::vector<std::string> site_ids_;
  std::vector<std::string> time_ids_;
  std::vector<std::size_t> origin_rows_;
};

/// Four raw neighbor readings of one satellite product around a station.
struct NeighborObservation {
  std::array<double, 4> values;
  std::array<double, 4> distances;  // km, strictly positive
};

/// Inverse-distance-squared weighting of the four neighbor readings:
/// feature_i = (value_i / d_i^2) / sum_j d_j^-2. Weights sum to one, so a
/// constant field passes through unchanged.
inline std::array<double, 4> idw_features(const NeighborObservation& obs) {
  double denom = 0.0;
  for (double d : obs.distances) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw DomainError(
          "idw_features: distances must be positive (perturb exact "
          "co-location by 1e-6 km)");
    }
    denom += 1.0 / (d * d);
  }
  std::array<double, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(obs.values[i] >= 0.0) || !std::isfinite(obs.values[i])) {
      throw DomainError("idw_features: values must be finite and >= 0");
    }
    out[i] = obs.values[i] / (obs.distances[i] * obs.distances[i]) / denom;
  }
  return out;
}

struct ThreeWaySplit {
  Dataset set1, set2, set3;
  std::uint64_t seed = 0;
};

/// Random, seed-deterministic partition into three near-equal parts.
/// Sizes differ by at most one; together the parts cover every row once.
inline ThreeWaySplit split_three_way(const Dataset& d, std::uint64_t seed) {
  const std::size_t n = d.size();
  if (n < 3) throw SizeError("split_three_way: need at least 3 samples");

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(derive_seed(seed, "three-way-split"));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_index(i + 1);
    std::swap(perm[i], perm[j]);
  }

  const std::size_t s1 = (n + 2) / 3;
  const std::size_t s2 = (n - s1 + 1) / 2;

  ThreeWaySplit split;
  split.seed = seed;
  Dataset* parts[3] = {&split.set1, &split.set2, &split.set3};
  std::array<std::vector<std::size_t>, 3> origins;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t part = i < s1 ? 0 : (i < s1 + s2 ? 1 : 2);
    parts[part]->add(d.sample(perm[i]));
    origins[part].push_back(perm[i]);
  }
  for (std::size_t k = 0; k < 3; ++k) parts[k]->set_origin_rows(std::move(origins[k]));
  return split;
}

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_cell(const std::string& cell, std::size_t row,
                         std::string_view column) {
  if (cell.empty()) {
    throw DataError("row " + std::to_string(row) + ": empty value in column " +
                    std::string(column));
  }
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) {
    throw DataError("row " + std::to_string(row) + ": non-numeric value '" +
                    cell + "' in column " + std::string(column));
  }
  if (!std::isfinite(v)) {
    throw DataError("row " + std::to_string(row) + ": non-finite value in column " +
                    std::string(column));
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Load a dataset from CSV. Expected header is the canonical schema, with
/// site_id and time_id columns optional. Bad rows are rejected with their
/// 1-based row number (the header is row 1).
inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = detail::split_line(line);

  std::vector<std::string> expected = {"target"};
  for (auto name : predictor_names) expected.emplace_back(name);
  const bool has_tags = header.size() == expected.size() + 2;
  if (has_tags) {
    expected.emplace_back("site_id");
    expected.emplace_back("time_id");
  }
  if (header != expected) {
    throw DataError(path + ": malformed header; expected "
                    "target,pr_p1,...,pr_i4,elevation[,site_id,time_id]");
  }

  Dataset d;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() && in.eof()) break;
    const auto fields = detail::split_line(line);
    if (fields.size() != header.size()) {
      throw DataError(path + ": row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " columns, found " +
                      std::to_string(fields.size()));
    }
    Sample s;
    s.target = detail::parse_cell(fields[0], row, "target");
    if (s.target < 0.0) {
      throw DataError(path + ": row " + std::to_string(row) +
                      ": negative target");
    }
    for (std::size_t j = 0; j < n_predictors; ++j) {
      s.predictors[j] = detail::parse_cell(fields[j + 1], row, predictor_names[j]);
    }
    if (has_tags) {
      s.site_id = fields[n_predictors + 1];
      s.time_id = fields[n_predictors + 2];
    }
    d.add(s);
  }
  return d;
}

/// Write a dataset as CSV with 17 significant digits (lossless round trip).
/// Tag columns are emitted only when some row carries a tag.
inline void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);

  const bool tags = d.has_tags();
  out << "target";
  for (auto name : predictor_names) out << ',' << name;
  if (tags) out << ",site_id,time_id";
  out << '\n';

  for (std::size_t i = 0; i < d.size(); ++i) {
    out << detail::format_double(d.target(i));
    for (std::size_t j = 0; j < n_predictors; ++j) {
      out << ',' << detail::format_double(d.predictor(i, j));
    }
    if (tags) out << ',' << d.site_id(i) << ',' << d.time_id(i);
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace zadre
