#pragma once

#include <cmath>
#include <limits>
#include <span>

#include "zadre/distributions.hpp"
#include "zadre/errors.hpp"
#include "zadre/special_functions.hpp"

namespace zadre {

/// Weighted sufficient statistics of a zero-adjusted sample. Everything the
/// family MLEs need is additive here, so a right child's statistics can be
/// formed by subtracting a left child from its node.
struct WeightedStats {
  double w_total = 0.0;
  double w_zero = 0.0;
  double w_pos = 0.0;
  double sum_y = 0.0;
  double sum_logy = 0.0;
  double sum_invy = 0.0;
  double sum_y2 = 0.0;
  double min_pos = std::numeric_limits<double>::infinity();
  double max_pos = 0.0;

  void add(double y, double w) {
    w_total += w;
    if (y == 0.0) {
      w_zero += w;
      return;
    }
    w_pos += w;
    sum_y += w * y;
    sum_logy += w * std::log(y);
    sum_invy += w / y;
    sum_y2 += w * y * y;
    min_pos = std::min(min_pos, y);
    max_pos = std::max(max_pos, y);
  }

  /// Right-child statistics: node minus left child. min_pos/max_pos are not
  /// recoverable by subtraction and are left in their empty state; the split
  /// criterion never needs them for children.
  WeightedStats minus(const WeightedStats& left) const {
    WeightedStats r;
    r.w_total = w_total - left.w_total;
    r.w_zero = w_zero - left.w_zero;
    r.w_pos = w_pos - left.w_pos;
    r.sum_y = sum_y - left.sum_y;
    r.sum_logy = sum_logy - left.sum_logy;
    r.sum_invy = sum_invy - left.sum_invy;
    r.sum_y2 = sum_y2 - left.sum_y2;
    return r;
  }

  bool all_positives_equal() const { return w_pos > 0.0 && min_pos == max_pos; }
};

/// Solve log(a) - digamma(a) = c for the gamma shape a, c > 0.
/// Minka's closed-form start puts Newton within a few steps of the root.
inline double solve_gamma_shape(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw DomainError("solve_gamma_shape: need c > 0");
  }
  // For large a the left side behaves like 1/(2a); below this threshold the
  // root exceeds the representable sigma box, so return its boundary.
  if (c < 5e-17) return 1e16;
  // Small c: log(a) - digamma(a) loses all leading digits in double
  // precision, so invert the two-term expansion 1/(2a) + 1/(12a^2) = c
  // instead. The neglected term keeps the relative error below 1e-12 here.
  if (c < 1e-4) return (std::sqrt(1.0 + 4.0 * c / 3.0) + 1.0) / (4.0 * c);

  double a = (3.0 - c + std::sqrt((c - 3.0) * (c - 3.0) + 24.0 * c)) / (12.0 * c);
  if (!(a > 0.0) || !std::isfinite(a)) a = 1.0;
  // f is strictly decreasing, so a sign bracket plus bisection fallback
  // guarantees progress even where Newton steps are dominated by the
  // cancellation noise of log(a) - digamma(a).
  double lo = 1e-12;
  double hi = 1e18;
  a = std::clamp(a, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double f = std::log(a) - digamma(a) - c;
    if (std::abs(f) <= 1e-15 * std::max(1.0, std::abs(std::log(a)))) return a;
    if (f > 0.0)
      lo = a;
    else
      hi = a;
    const double fp = 1.0 / a - trigamma(a);  // strictly negative
    double next = a - f / fp;
    if (!(next > lo && next < hi)) next = std::sqrt(lo * hi);
    if (std::abs(next - a) < 1e-13 * a) return next;
    if (hi - lo <= 4.0 * hi * std::numeric_limits<double>::epsilon())
      return 0.5 * (lo + hi);
    a = next;
  }
  throw NumericError("solve_gamma_shape: Newton did not converge");
}

struct MleResult {
  ZeroAdjustedParams params;
  bool moment_fallback = false;
};

/// Weighted maximum-likelihood parameters from sufficient statistics,
/// clamped into the safeguard box. The atom estimate is the weighted zero
/// fraction; mu is the weighted mean of positives. The zaig dispersion has a
/// closed form; the zaga shape comes from a Newton solve with a
/// method-of-moments fallback (flagged in the result).
inline MleResult stats_mle(Family family, const WeightedStats& s) {
  if (!(s.w_total > 0.0)) throw SizeError("stats_mle: empty statistics");
  const double nu = std::clamp(s.w_zero / s.w_total, min_nu, max_nu);
  if (s.w_pos <= 0.0) {
    return {ZeroAdjustedParams(1.0, 1.0, nu), false};
  }
  const double mean = s.sum_y / s.w_pos;
  const double mu = std::clamp(mean, min_mu, max_mu);
  double sigma;
  bool fallback = false;
  if (family == Family::zaig) {
    const double s2 = std::max(s.sum_invy / s.w_pos - 1.0 / mu, 0.0);
    sigma = std::clamp(std::sqrt(s2), min_sigma, max_sigma);
  } else {
    const double c = std::log(mean) - s.sum_logy / s.w_pos;
    if (!(c > 1e-13)) {
      sigma = min_sigma;
    } else {
      try {
        sigma = std::clamp(1.0 / std::sqrt(solve_gamma_shape(c)), min_sigma,
                           max_sigma);
      } catch (const NumericError&) {
        const double var = std::max(s.sum_y2 / s.w_pos - mean * mean, 0.0);
        const double a = var > 0.0 ? mean * mean / var : 1e16;
        sigma = std::clamp(1.0 / std::sqrt(a), min_sigma, max_sigma);
        fallback = true;
      }
    }
  }
  return {ZeroAdjustedParams(mu, sigma, nu), fallback};
}

/// Weighted intercept-only fit over raw observations.
inline MleResult weighted_intercept_mle(Family family, std::span<const double> y,
                                        std::span<const double> w) {
  if (y.size() != w.size()) {
    throw ShapeError("weighted_intercept_mle: length mismatch");
  }
  WeightedStats s;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= 0.0)) throw DomainError("weighted_intercept_mle: negative target");
    if (!(w[i] >= 0.0)) throw DomainError("weighted_intercept_mle: negative weight");
    if (w[i] > 0.0) s.add(y[i], w[i]);
  }
  return stats_mle(family, s);
}

/// Dispersion floor used when evaluating split criteria. Milder than the
/// parameter safeguard so the criterion does not chase the unbounded
/// likelihood of exactly repeated positive values.
inline constexpr double split_sigma_floor = 1e-3;

/// Maximized weighted log-likelihood of the family on the given statistics,
/// used as the forest's split criterion. Dispersion estimates are floored at
/// split_sigma_floor; the returned value is the log-likelihood at the
/// (possibly floored) estimates, so it is always an attainable value.
inline double split_loglik(Family family, const WeightedStats& s) {
  double ll = 0.0;
  if (s.w_total > 0.0) {
    const double nu = std::clamp(s.w_zero / s.w_total, min_nu, max_nu);
    if (s.w_zero > 0.0) ll += s.w_zero * std::log(nu);
    if (s.w_pos > 0.0) ll += s.w_pos * std::log1p(-nu);
  }
  if (s.w_pos > 0.0) {
    const double mu = std::clamp(s.sum_y / s.w_pos, min_mu, max_mu);
    if (family == Family::zaig) {
      const double s2_raw = std::max(s.sum_invy / s.w_pos - 1.0 / mu, 0.0);
      const double s2 = std::max(s2_raw, split_sigma_floor * split_sigma_floor);
      ll += -0.5 * s.w_pos * (log_two_pi + std::log(s2)) - 1.5 * s.sum_logy -
            s.w_pos * s2_raw / (2.0 * s2);
    } else {
      const double c = std::log(mu) - s.sum_logy / s.w_pos;
      const double a_cap = 1.0 / (split_sigma_floor * split_sigma_floor);
      double a = a_cap;
      if (c > 0.5 / a_cap) {
        a = std::min(solve_gamma_shape(c), a_cap);
      }
      ll += s.w_pos * (a * std::log(a) - a * std::log(mu) - std::lgamma(a) - a) +
            (a - 1.0) * s.sum_logy;
    }
  }
  return ll;
}

}  // namespace zadre
