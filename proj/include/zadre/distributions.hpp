#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zadre/errors.hpp"
#include "zadre/rng.hpp"
#include "zadre/special_functions.hpp"

namespace zadre {

/// Zero-adjusted families: a point mass at zero mixed with a continuous
/// distribution on the positive half-line. zaig uses an inverse Gaussian
/// component, zaga a gamma component.
enum class Family { zaig, zaga };

inline std::string to_string(Family f) {
  return f == Family::zaig ? "zaig" : "zaga";
}

inline Family family_from_string(std::string_view s) {
  if (s == "zaig") return Family::zaig;
  if (s == "zaga") return Family::zaga;
  throw ConfigError("unknown family: " + std::string(s));
}

// Safeguard box used whenever parameters come out of an optimizer or a
// moment estimate. The constructor below only enforces validity; clamping
// into this box is a separate, explicit step.
inline constexpr double min_nu = 1e-6;
inline constexpr double max_nu = 1.0 - 1e-6;
inline constexpr double min_mu = 1e-8;
inline constexpr double max_mu = 1e12;
inline constexpr double min_sigma = 1e-8;
inline constexpr double max_sigma = 1e6;

/// Floor applied to log-densities so likelihood sums stay finite.
inline const double log_density_floor = std::log(1e-300);

/// Parameters (mu, sigma, nu): mean and dispersion of the continuous
/// component plus the probability nu of an exact zero.
struct ZeroAdjustedParams {
  double mu;
  double sigma;
  double nu;

  ZeroAdjustedParams(double mu_, double sigma_, double nu_)
      : mu(mu_), sigma(sigma_), nu(nu_) {
    if (!(std::isfinite(mu) && mu > 0.0)) {
      throw ParameterError("mu must be finite and > 0");
    }
    if (!(std::isfinite(sigma) && sigma > 0.0)) {
      throw ParameterError("sigma must be finite and > 0");
    }
    if (!(std::isfinite(nu) && nu > 0.0 && nu < 1.0)) {
      throw ParameterError("nu must lie strictly in (0, 1)");
    }
  }
};

/// Clamp raw optimizer output into the safeguard box.
inline ZeroAdjustedParams safeguard_params(double mu, double sigma, double nu) {
  if (std::isnan(mu) || std::isnan(sigma) || std::isnan(nu)) {
    throw ParameterError("safeguard_params: NaN parameter");
  }
  return ZeroAdjustedParams(std::clamp(mu, min_mu, max_mu),
                            std::clamp(sigma, min_sigma, max_sigma),
                            std::clamp(nu, min_nu, max_nu));
}

/// A family tag plus parameters: one per-sample predictive distribution.
struct PredictiveDistribution {
  Family family;
  ZeroAdjustedParams params;
};

// Link functions. mu and sigma use log links, nu uses logit.
inline double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("logit: p must be in (0, 1)");
  return std::log(p / (1.0 - p));
}

inline double inv_logit(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

namespace detail {

/// log pdf of the inverse Gaussian with mean mu and shape lambda = 1/sigma^2.
inline double ig_log_pdf(double y, double mu, double sigma) {
  const double z = (y - mu) / (mu * sigma);
  return -0.5 * (log_two_pi + 2.0 * std::log(sigma) + 3.0 * std::log(y)) -
         z * z / (2.0 * y);
}

/// CDF of the inverse Gaussian, evaluated in log space.
///
/// The textbook form Phi(A) + exp(2*lambda/mu) * Phi(B) multiplies a huge
/// exponential by a tiny tail probability. We use the identity
/// 2*lambda/mu - B^2/2 = -A^2/2 to evaluate the second term's exponent
/// without cancellation whenever the tail expansion of log Phi(B) applies.
inline double ig_cdf(double y, double mu, double sigma) {
  const double lambda = 1.0 / (sigma * sigma);
  const double t = std::sqrt(lambda / y);
  const double ratio = y / mu;
  const double a = t * (ratio - 1.0);
  const double b = -t * (ratio + 1.0);
  const double term1 = norm_cdf(a);
  double exponent;
  if (b >= -30.0) {
    exponent = 2.0 * lambda / mu + std::log(norm_cdf(b));
  } else {
    const double b2 = b * b;
    double term = 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 10; ++k) {
      term *= -(2.0 * k - 1.0) / b2;
      sum += term;
    }
    exponent = -0.5 * a * a - 0.5 * log_two_pi - std::log(-b) + std::log1p(sum);
  }
  const double f = term1 + std::exp(std::min(exponent, 0.0));
  return std::clamp(f, 0.0, 1.0);
}

/// log pdf of the gamma parameterized by mean mu and dispersion sigma
/// (shape 1/sigma^2, scale sigma^2 * mu).
inline double gamma_log_pdf(double y, double mu, double sigma) {
  const double a = 1.0 / (sigma * sigma);
  const double log_scale = std::log(sigma * sigma * mu);
  return -a * log_scale + (a - 1.0) * std::log(y) - y / (sigma * sigma * mu) -
         std::lgamma(a);
}

inline double gamma_cdf(double y, double mu, double sigma) {
  const double a = 1.0 / (sigma * sigma);
  return regularized_gamma_p(a, y / (sigma * sigma * mu));
}

inline double cont_log_pdf(Family f, double y, const ZeroAdjustedParams& p) {
  return f == Family::zaig ? ig_log_pdf(y, p.mu, p.sigma)
                           : gamma_log_pdf(y, p.mu, p.sigma);
}

inline double cont_cdf(Family f, double y, const ZeroAdjustedParams& p) {
  return f == Family::zaig ? ig_cdf(y, p.mu, p.sigma)
                           : gamma_cdf(y, p.mu, p.sigma);
}

inline void check_observation(double y) {
  if (!(y >= 0.0) || !std::isfinite(y)) {
    throw DomainError("observation must be finite and >= 0");
  }
}

}  // namespace detail

/// Log-density, floored at log(1e-300) so sums stay finite.
inline double log_density(Family f, double y, const ZeroAdjustedParams& p) {
  detail::check_observation(y);
  if (y == 0.0) return std::max(std::log(p.nu), log_density_floor);
  const double raw = std::log1p(-p.nu) + detail::cont_log_pdf(f, y, p);
  return std::max(raw, log_density_floor);
}

/// Density with respect to the mixed counting-plus-Lebesgue dominating
/// measure: returns nu at zero, (1 - nu) times the continuous pdf elsewhere.
inline double density(Family f, double y, const ZeroAdjustedParams& p) {
  detail::check_observation(y);
  if (y == 0.0) return p.nu;
  return std::exp(std::log1p(-p.nu) + detail::cont_log_pdf(f, y, p));
}

/// CDF of the mixture; equals nu at y = 0 and tends to 1 as y grows.
inline double cdf(Family f, double y, const ZeroAdjustedParams& p) {
  detail::check_observation(y);
  if (y == 0.0) return p.nu;
  return std::clamp(p.nu + (1.0 - p.nu) * detail::cont_cdf(f, y, p), 0.0, 1.0);
}

/// Quantile of the mixture. The atom wins ties: tau <= nu returns exactly 0.
/// Otherwise the continuous CDF is inverted with a bracketed, safeguarded
/// Newton iteration to an absolute tolerance of 1e-10 in probability.
inline double quantile(Family f, double tau, const ZeroAdjustedParams& p) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw DomainError("quantile: tau must lie strictly in (0, 1)");
  }
  if (tau <= p.nu) return 0.0;
  const double prob = (tau - p.nu) / (1.0 - p.nu);

  double lo = 0.0;
  double hi = std::max(p.mu, 1e-300);
  int expand = 0;
  while (detail::cont_cdf(f, hi, p) < prob) {
    lo = hi;
    hi *= 2.0;
    if (++expand > 1200 || !std::isfinite(hi)) {
      throw NumericError("quantile: failed to bracket the target probability");
    }
  }

  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double fy = detail::cont_cdf(f, y, p);
    if (std::abs(fy - prob) <= 1e-10) return y;
    if (fy < prob) {
      lo = y;
    } else {
      hi = y;
    }
    // Bracket at machine resolution: accept the midpoint. This is the exit
    // taken by near-degenerate distributions whose CDF jumps through prob.
    if (hi - lo <= hi * 0x1.0p-50 || hi - lo < 1e-300) return 0.5 * (lo + hi);
    const double pdf = std::exp(detail::cont_log_pdf(f, y, p));
    double next = pdf > 0.0 ? y - (fy - prob) / pdf : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    y = next;
  }
  throw NumericError("quantile: no convergence after 200 iterations");
}

/// Draw one variate using an already-positioned random stream.
inline double sample_one(Family f, const ZeroAdjustedParams& p, Rng& rng) {
  const double u = rng.uniform();
  if (u < p.nu) return 0.0;
  if (f == Family::zaig) {
    return rng.inverse_gaussian(p.mu, 1.0 / (p.sigma * p.sigma));
  }
  const double shape = 1.0 / (p.sigma * p.sigma);
  return p.sigma * p.sigma * p.mu * rng.gamma(shape);
}

/// Draw n variates from the given seed. Same seed, same draws.
inline std::vector<double> sample(Family f, const ZeroAdjustedParams& p,
                                  std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(f, p, rng));
  return out;
}

inline std::vector<double> sample(const PredictiveDistribution& d, std::size_t n,
                                  std::uint64_t seed) {
  return sample(d.family, d.params, n, seed);
}

/// Sum of floored log-densities over paired observations and parameters.
inline double log_likelihood(Family f, std::span<const double> y,
                             std::span<const ZeroAdjustedParams> params) {
  if (y.size() != params.size()) {
    throw ShapeError("log_likelihood: observations and parameters differ in length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += log_density(f, y[i], params[i]);
  }
  return sum;
}

}  // namespace zadre
