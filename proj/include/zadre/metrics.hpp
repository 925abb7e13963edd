#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "zadre/errors.hpp"

namespace zadre {

/// Pinball loss of predicting the tau-quantile z against observation y.
inline double quantile_loss(double z, double y, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw DomainError("quantile_loss: tau must be in (0,1)");
  return (z - y) * ((z >= y ? 1.0 : 0.0) - tau);
}

namespace metrics_detail {

inline double median_of(std::vector<double>& values) {
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double m = values[mid];
  if (n % 2 == 0) {
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    m = 0.5 * (lower + m);
  }
  return m;
}

}  // namespace metrics_detail

/// Median over samples of the per-sample pinball losses.
inline double median_quantile_score(std::span<const double> z,
                                    std::span<const double> y, double tau) {
  if (z.size() != y.size())
    throw ShapeError("median_quantile_score: length mismatch");
  if (z.empty()) throw SizeError("median_quantile_score: empty input");
  std::vector<double> losses(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    losses[i] = quantile_loss(z[i], y[i], tau);
  return metrics_detail::median_of(losses);
}

/// Skill relative to a reference score: 1 - score/reference. A perfect
/// reference (score 0) has no defined skill and yields NaN, which rank
/// tables treat as excluded.
inline double skill(double score_alg, double score_ref) {
  if (score_ref < 0.0 || !std::isfinite(score_ref))
    throw DomainError("skill: reference score must be finite and >= 0");
  if (score_ref == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - score_alg / score_ref;
}

/// Inverse empirical CDF of the training targets at each grid level: the
/// smallest order statistic whose ECDF reaches tau. This constant per level
/// is the climatology reference prediction.
inline std::vector<double> reference_quantiles(std::span<const double> train_targets,
                                               std::span<const double> grid) {
  if (train_targets.empty())
    throw SizeError("reference_quantiles: empty training targets");
  std::vector<double> sorted(train_targets.begin(), train_targets.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<double> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double tau = grid[j];
    if (!(tau > 0.0 && tau < 1.0))
      throw DomainError("reference_quantiles: tau must be in (0,1)");
    const auto k = static_cast<std::size_t>(std::ceil(tau * n));
    out[j] = sorted[std::min(sorted.size() - 1, std::max<std::size_t>(k, 1) - 1)];
  }
  return out;
}

/// Quantile scoring rule for one sample: pinball losses summed over the grid.
inline double scoring_rule_per_sample(std::span<const double> row, double y,
                                      std::span<const double> grid) {
  if (row.size() != grid.size())
    throw ShapeError("scoring_rule_per_sample: row length must match grid");
  double sum = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j)
    sum += quantile_loss(row[j], y, grid[j]);
  return sum;
}

/// Mean over samples of the per-sample scoring-rule sums.
inline double mean_scoring_rule(std::span<const double> matrix, std::size_t n_rows,
                                std::span<const double> grid,
                                std::span<const double> y) {
  const std::size_t n_cols = grid.size();
  if (matrix.size() != n_rows * n_cols || y.size() != n_rows)
    throw ShapeError("mean_scoring_rule: shape mismatch");
  if (n_rows == 0) throw SizeError("mean_scoring_rule: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < n_rows; ++i)
    total += scoring_rule_per_sample(matrix.subspan(i * n_cols, n_cols), y[i], grid);
  return total / static_cast<double>(n_rows);
}

/// Skill of an algorithm's scoring-rule mean against the climatology
/// reference row applied to every sample.
inline double scoring_rule_skill(std::span<const double> matrix, std::size_t n_rows,
                                 std::span<const double> ref_row,
                                 std::span<const double> grid,
                                 std::span<const double> y) {
  if (ref_row.size() != grid.size())
    throw ShapeError("scoring_rule_skill: reference row length must match grid");
  const double alg = mean_scoring_rule(matrix, n_rows, grid, y);
  double ref_total = 0.0;
  for (std::size_t i = 0; i < n_rows; ++i)
    ref_total += scoring_rule_per_sample(ref_row, y[i], grid);
  return skill(alg, ref_total / static_cast<double>(n_rows));
}

/// Fraction of observations at or below their predicted quantile; the
/// nominal value at level tau is tau.
inline double coverage(std::span<const double> predictions,
                       std::span<const double> y) {
  if (predictions.size() != y.size()) throw ShapeError("coverage: length mismatch");
  if (y.empty()) throw SizeError("coverage: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] <= predictions[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

/// Ranks one column of skills: rank 1 is the highest skill, ties share the
/// average of the ranks they span, non-finite skills are excluded (NaN rank)
/// and the rest are ranked against 1..(n - excluded).
inline std::vector<double> rank_column(std::span<const double> skills) {
  const std::size_t n = skills.size();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(skills[i])) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (skills[a] != skills[b]) return skills[a] > skills[b];
    return a < b;
  });
  std::vector<double> ranks(n, std::numeric_limits<double>::quiet_NaN());
  std::size_t at = 0;
  while (at < order.size()) {
    std::size_t end = at + 1;
    while (end < order.size() && skills[order[end]] == skills[order[at]]) ++end;
    const double avg = 0.5 * static_cast<double>(at + 1 + end);  // mean of at+1..end
    for (std::size_t k = at; k < end; ++k) ranks[order[k]] = avg;
    at = end;
  }
  return ranks;
}

/// Per-level ranks for a full skill table (algorithms x levels, row-major).
inline std::vector<double> rank_table(std::span<const double> skills,
                                      std::size_t n_algorithms,
                                      std::size_t n_levels) {
  if (skills.size() != n_algorithms * n_levels)
    throw ShapeError("rank_table: shape mismatch");
  std::vector<double> ranks(skills.size());
  std::vector<double> column(n_algorithms);
  for (std::size_t j = 0; j < n_levels; ++j) {
    for (std::size_t i = 0; i < n_algorithms; ++i)
      column[i] = skills[i * n_levels + j];
    const auto r = rank_column(column);
    for (std::size_t i = 0; i < n_algorithms; ++i) ranks[i * n_levels + j] = r[i];
  }
  return ranks;
}

}  // namespace zadre
