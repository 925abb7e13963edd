#pragma once

// Independent reference implementations used only by the test suite.
// These are deliberately written with different algorithms than the library
// (plain adaptive Simpson, brute-force subset enumeration) so agreement is
// meaningful.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace oracles {

namespace detail {

inline double simpson_rule(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double fa, double fm, double fb,
                               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson_rule(a, m, fa, flm, fm);
  const double right = simpson_rule(m, b, fm, frm, fb);
  const double refined = left + right;
  if (depth <= 0 || std::abs(refined - whole) <= 15.0 * tol) {
    return refined + (refined - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10, int max_depth = 48) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = detail::simpson_rule(a, b, fa, fm, fb);
  return detail::adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Integrate a density over (0, infinity) through the substitution y = e^v,
/// which handles both the spike near zero and the right tail.
inline double integrate_positive(const std::function<double(double)>& f,
                                 double y_lo, double y_hi, double tol = 1e-10) {
  const auto g = [&f](double v) {
    const double y = std::exp(v);
    return f(y) * y;
  };
  return integrate(g, std::log(y_lo), std::log(y_hi), tol);
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a possibly
/// discontinuous CDF. cdf_left gives the left limit F(x-); for the mixed
/// distributions here that is 0 at the atom and F(x) elsewhere. Tied sample
/// values are treated as one jump of the empirical CDF.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf,
                           const std::function<double(double)>& cdf_left = {}) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < sample.size()) {
    std::size_t j = i;
    while (j < sample.size() && sample[j] == sample[i]) ++j;
    const double x = sample[i];
    const double f = cdf(x);
    const double f_left = cdf_left ? cdf_left(x) : f;
    d = std::max(d, std::abs(f - static_cast<double>(j) / n));
    d = std::max(d, std::abs(f_left - static_cast<double>(i) / n));
    i = j;
  }
  return d;
}

/// KS critical value at significance 0.001 for sample size n.
inline double ks_critical_001(std::size_t n) {
  return 1.9495 / std::sqrt(static_cast<double>(n));
}

/// z statistic for an observed count against Binomial(n, p).
inline double binomial_z(std::size_t count, std::size_t n, double p) {
  const double mean = static_cast<double>(n) * p;
  const double sd = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
  return (static_cast<double>(count) - mean) / sd;
}

/// Mean pinball loss of predictions z against observations y at level tau.
inline double mean_pinball(std::span<const double> z, std::span<const double> y,
                           double tau) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double diff = z[i] - y[i];
    sum += diff * ((diff >= 0.0 ? 1.0 : 0.0) - tau);
  }
  return sum / static_cast<double>(y.size());
}

}  // namespace oracles
