#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "zadre/distributions.hpp"

using namespace zadre;

TEST_CASE("parameter validation", "[distributions]") {
  CHECK_THROWS_AS(ZeroAdjustedParams(0.0, 1.0, 0.5), ParameterError);
  CHECK_THROWS_AS(ZeroAdjustedParams(1.0, -1.0, 0.5), ParameterError);
  CHECK_THROWS_AS(ZeroAdjustedParams(1.0, 1.0, 0.0), ParameterError);
  CHECK_THROWS_AS(ZeroAdjustedParams(1.0, 1.0, 1.0), ParameterError);
  CHECK_THROWS_AS(ZeroAdjustedParams(std::nan(""), 1.0, 0.5), ParameterError);

  const auto p = safeguard_params(1e20, 0.0, 1.5);
  CHECK(p.mu == max_mu);
  CHECK(p.sigma == min_sigma);
  CHECK(p.nu == max_nu);
  CHECK_THROWS_AS(safeguard_params(std::nan(""), 1.0, 0.5), ParameterError);
}

TEST_CASE("pinned density values", "[distributions]") {
  // With nu nearly zero and mu = sigma = 1 the zaig density at its mode-free
  // point y = 1 collapses to (1 - nu) / sqrt(2*pi).
  const ZeroAdjustedParams p1(1.0, 1.0, 1e-6);
  CHECK(density(Family::zaig, 1.0, p1) ==
        Catch::Approx(0.39894188145915228).epsilon(1e-14));

  // zaga with mu = 2, sigma = 1 is Exponential(mean 2); at y = 2 the mixture
  // density is 0.8 * exp(-1) / 2.
  const ZeroAdjustedParams p2(2.0, 1.0, 0.2);
  CHECK(density(Family::zaga, 2.0, p2) ==
        Catch::Approx(0.14715177646857693).epsilon(1e-14));

  // At zero the density is the atom mass for both families.
  const ZeroAdjustedParams p3(5.0, 2.0, 0.3);
  CHECK(density(Family::zaig, 0.0, p3) == 0.3);
  CHECK(density(Family::zaga, 0.0, p3) == 0.3);
  CHECK(log_density(Family::zaga, 0.0, p3) ==
        Catch::Approx(-1.2039728043259360).epsilon(1e-15));
}

TEST_CASE("log density floor", "[distributions]") {
  const ZeroAdjustedParams p(1.0, 1e-8, 0.5);
  // Far from mu with a near-degenerate sigma the raw log density is
  // astronomically negative; the floor keeps it finite.
  const double ld = log_density(Family::zaig, 100.0, p);
  CHECK(ld == log_density_floor);
  CHECK(std::isfinite(log_density(Family::zaga, 100.0, p)));
}

TEST_CASE("observation domain errors", "[distributions]") {
  const ZeroAdjustedParams p(1.0, 1.0, 0.5);
  CHECK_THROWS_AS(density(Family::zaig, -0.1, p), DomainError);
  CHECK_THROWS_AS(log_density(Family::zaga, -1.0, p), DomainError);
  CHECK_THROWS_AS(cdf(Family::zaig, -2.0, p), DomainError);
  CHECK_THROWS_AS(quantile(Family::zaig, 0.0, p), DomainError);
  CHECK_THROWS_AS(quantile(Family::zaig, 1.0, p), DomainError);
}

TEST_CASE("inverse gaussian cdf pinned values", "[distributions]") {
  // Reference values computed with 50-digit arithmetic; arguments are
  // (y, mu, lambda) with sigma = 1/sqrt(lambda).
  struct Case {
    double y, mu, lambda, expected;
  };
  const Case cases[] = {
      {1.0, 1.0, 1.0, 0.66810200122317061},
      {2.0, 1.0, 4.0, 0.95427581820768473},
      {0.5, 2.0, 0.25, 0.53982568690205010},
      {5.0, 2.0, 1.0, 0.90856537948931922},
  };
  for (const auto& c : cases) {
    CHECK(detail::ig_cdf(c.y, c.mu, 1.0 / std::sqrt(c.lambda)) ==
          Catch::Approx(c.expected).epsilon(1e-12));
  }
}

TEST_CASE("cdf mixes the atom with the continuous part", "[distributions]") {
  const ZeroAdjustedParams p(2.0, 0.7, 0.25);
  CHECK(cdf(Family::zaig, 0.0, p) == 0.25);
  CHECK(cdf(Family::zaga, 0.0, p) == 0.25);
  for (Family f : {Family::zaig, Family::zaga}) {
    CHECK(cdf(f, 1e9, p) == Catch::Approx(1.0).epsilon(1e-12));
    double prev = 0.0;
    for (double y = 0.01; y < 20.0; y *= 1.7) {
      const double cur = cdf(f, y, p);
      CHECK(cur >= prev);
      CHECK(cur >= 0.25);
      prev = cur;
    }
  }
}

TEST_CASE("cdf matches quadrature of the density", "[distributions]") {
  const ZeroAdjustedParams p(3.0, 0.8, 0.15);
  for (Family f : {Family::zaig, Family::zaga}) {
    for (double y : {0.5, 2.0, 6.0}) {
      const double mass = oracles::integrate_positive(
          [&](double t) { return density(f, t, p); }, 1e-12, y, 1e-11);
      CHECK(cdf(f, y, p) == Catch::Approx(p.nu + mass).epsilon(1e-8));
    }
    // Total mass of the continuous part is 1 - nu.
    const double total = oracles::integrate_positive(
        [&](double t) { return density(f, t, p); }, 1e-12, 1e4, 1e-11);
    CHECK(total == Catch::Approx(1.0 - p.nu).epsilon(1e-8));
  }
}

TEST_CASE("quantile returns zero whenever the atom covers tau", "[distributions]") {
  const ZeroAdjustedParams p(2.0, 1.0, 0.3);
  for (Family f : {Family::zaig, Family::zaga}) {
    CHECK(quantile(f, 0.1, p) == 0.0);
    CHECK(quantile(f, 0.3, p) == 0.0);  // tie goes to the atom
    CHECK(quantile(f, 0.300001, p) > 0.0);
  }
}

TEST_CASE("cdf and quantile round-trip", "[distributions]") {
  const std::vector<ZeroAdjustedParams> grid = {
      {1.0, 1.0, 0.1},   {0.3, 0.4, 0.5},    {25.0, 1.8, 0.05},
      {1e3, 0.2, 0.9},   {0.01, 2.5, 0.02},  {7.0, 1e-3, 0.4},
  };
  for (Family f : {Family::zaig, Family::zaga}) {
    for (const auto& p : grid) {
      double prev = -1.0;
      for (double tau : {0.025, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.9875}) {
        const double q = quantile(f, tau, p);
        CHECK(q >= prev);
        prev = q;
        if (tau <= p.nu) {
          CHECK(q == 0.0);
        } else {
          CHECK(cdf(f, q, p) == Catch::Approx(tau).margin(2e-9));
        }
      }
    }
  }
}

TEST_CASE("quantile survives near-degenerate dispersion", "[distributions]") {
  const ZeroAdjustedParams p(5.0, 1e-8, 0.2);
  for (Family f : {Family::zaig, Family::zaga}) {
    const double q = quantile(f, 0.6, p);
    CHECK(q == Catch::Approx(5.0).epsilon(1e-5));
  }
}

TEST_CASE("pinned log likelihood", "[distributions]") {
  // Reference value computed with 50-digit arithmetic.
  const ZeroAdjustedParams p(2.0, 1.0, 0.1);
  const std::vector<double> y = {1.0, 2.0, 3.0};
  const std::vector<ZeroAdjustedParams> params(3, p);
  CHECK(log_likelihood(Family::zaga, y, params) ==
        Catch::Approx(-5.3955230886533148).epsilon(1e-14));

  const std::vector<double> bad_len = {1.0};
  CHECK_THROWS_AS(log_likelihood(Family::zaga, bad_len, params), ShapeError);
  const std::vector<double> negative = {1.0, -2.0, 3.0};
  CHECK_THROWS_AS(log_likelihood(Family::zaga, negative, params), DomainError);
}

TEST_CASE("sampling matches the analytic distribution", "[distributions]") {
  const std::size_t n = 20000;
  for (Family f : {Family::zaig, Family::zaga}) {
    const ZeroAdjustedParams p(4.0, 0.6, 0.35);
    const auto draws = sample(f, p, n, 20240517);
    REQUIRE(draws.size() == n);

    std::size_t zeros = 0;
    double sum = 0.0;
    for (double d : draws) {
      REQUIRE(d >= 0.0);
      if (d == 0.0) ++zeros;
      sum += d;
    }
    CHECK(std::abs(oracles::binomial_z(zeros, n, p.nu)) < 3.2905);
    CHECK(sum / n == Catch::Approx((1.0 - p.nu) * p.mu).epsilon(0.05));

    const double d_stat = oracles::ks_statistic(
        draws, [&](double y) { return cdf(f, y, p); },
        [&](double y) { return y == 0.0 ? 0.0 : cdf(f, y, p); });
    CHECK(d_stat < oracles::ks_critical_001(n));
  }
}

TEST_CASE("sampling is reproducible", "[distributions]") {
  const ZeroAdjustedParams p(2.0, 1.0, 0.2);
  const auto a = sample(Family::zaga, p, 100, 7);
  const auto b = sample(Family::zaga, p, 100, 7);
  const auto c = sample(Family::zaga, p, 100, 8);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("link helpers", "[distributions]") {
  CHECK(inv_logit(logit(0.3)) == Catch::Approx(0.3).epsilon(1e-14));
  CHECK(inv_logit(-800.0) >= 0.0);
  CHECK(inv_logit(800.0) <= 1.0);
  CHECK_THROWS_AS(logit(0.0), DomainError);
  CHECK_THROWS_AS(logit(1.0), DomainError);
}
