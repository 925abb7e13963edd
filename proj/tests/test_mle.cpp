#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "zadre/distributions.hpp"
#include "zadre/mle.hpp"

using namespace zadre;

TEST_CASE("gamma shape solve inverts its defining equation", "[mle]") {
  for (double a_true : {0.1, 0.7, 1.0, 4.2, 50.0, 5000.0}) {
    const double c = std::log(a_true) - digamma(a_true);
    const double a = solve_gamma_shape(c);
    CHECK(a == Catch::Approx(a_true).epsilon(1e-10));
  }
  // Large shapes: the reference c itself carries cancellation noise of order
  // eps*log(a)/c, so only a looser roundtrip is meaningful.
  for (double a_true : {2e4, 1e6}) {
    const double c = std::log(a_true) - digamma(a_true);
    CHECK(solve_gamma_shape(c) == Catch::Approx(a_true).epsilon(1e-6));
  }
  CHECK(solve_gamma_shape(1e-18) == 1e16);
  CHECK_THROWS_AS(solve_gamma_shape(-1.0), DomainError);

  // Dense sweep across the moderate range where Newton steps approach the
  // evaluation noise of log(a) - digamma(a): must never throw and must
  // satisfy the defining equation to near machine precision.
  for (int k = 0; k <= 200; ++k) {
    const double c = std::pow(10.0, -4.0 + 5.0 * k / 200.0);
    const double a = solve_gamma_shape(c);
    const double residual = std::abs(std::log(a) - digamma(a) - c);
    CHECK(residual <= 1e-11 * std::max(1.0, std::abs(std::log(a))));
  }
}

TEST_CASE("weighted stats accumulate and subtract", "[mle]") {
  WeightedStats node;
  WeightedStats left;
  const std::vector<double> ys = {0.0, 1.0, 2.0, 0.0, 5.0, 3.0};
  const std::vector<double> ws = {1.0, 2.0, 1.0, 3.0, 1.0, 2.0};
  for (std::size_t i = 0; i < ys.size(); ++i) {
    node.add(ys[i], ws[i]);
    if (i < 3) left.add(ys[i], ws[i]);
  }
  const auto right = node.minus(left);
  CHECK(right.w_total == 6.0);
  CHECK(right.w_zero == 3.0);
  CHECK(right.w_pos == 3.0);
  CHECK(right.sum_y == Catch::Approx(11.0).margin(1e-12));
  CHECK(node.min_pos == 1.0);
  CHECK(node.max_pos == 5.0);
  CHECK_FALSE(node.all_positives_equal());

  WeightedStats equal;
  equal.add(2.5, 1.0);
  equal.add(2.5, 3.0);
  CHECK(equal.all_positives_equal());
}

TEST_CASE("zaig closed-form dispersion maximizes the likelihood", "[mle]") {
  // MLE of the inverse Gaussian: mu = mean, sigma^2 = mean(1/y) - 1/mu.
  const std::vector<double> y = {0.5, 1.2, 3.0, 0.9, 2.2, 4.1, 1.7};
  WeightedStats s;
  for (double v : y) s.add(v, 1.0);
  const auto fit = stats_mle(Family::zaig, s);
  CHECK_FALSE(fit.moment_fallback);

  const double mu = fit.params.mu;
  const double sigma = fit.params.sigma;
  std::vector<ZeroAdjustedParams> base(y.size(), ZeroAdjustedParams(mu, sigma, 0.5));
  const double best = log_likelihood(Family::zaig, y, base);
  for (double dmu : {-0.05, 0.05}) {
    for (double dsig : {-0.05, 0.05}) {
      std::vector<ZeroAdjustedParams> alt(
          y.size(), ZeroAdjustedParams(mu + dmu, sigma + dsig, 0.5));
      CHECK(log_likelihood(Family::zaig, y, alt) < best);
    }
  }
}

TEST_CASE("zaga shape estimate maximizes the likelihood", "[mle]") {
  const std::vector<double> y = {0.4, 2.0, 1.1, 0.8, 3.5, 2.7, 6.0, 1.3};
  WeightedStats s;
  for (double v : y) s.add(v, 1.0);
  const auto fit = stats_mle(Family::zaga, s);
  CHECK_FALSE(fit.moment_fallback);

  const double mu = fit.params.mu;
  const double sigma = fit.params.sigma;
  std::vector<ZeroAdjustedParams> base(y.size(), ZeroAdjustedParams(mu, sigma, 0.5));
  const double best = log_likelihood(Family::zaga, y, base);
  for (double dmu : {-0.03, 0.03}) {
    for (double dsig : {-0.03, 0.03}) {
      std::vector<ZeroAdjustedParams> alt(
          y.size(), ZeroAdjustedParams(mu + dmu, sigma + dsig, 0.5));
      CHECK(log_likelihood(Family::zaga, y, alt) < best);
    }
  }
}

TEST_CASE("atom estimate is the weighted zero fraction", "[mle]") {
  const std::vector<double> y = {0.0, 0.0, 1.0, 2.0};
  const std::vector<double> w = {3.0, 1.0, 2.0, 2.0};
  const auto fit = weighted_intercept_mle(Family::zaga, y, w);
  CHECK(fit.params.nu == Catch::Approx(0.5).epsilon(1e-14));
  CHECK(fit.params.mu == Catch::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("degenerate statistics stay inside the parameter box", "[mle]") {
  WeightedStats zeros;
  zeros.add(0.0, 5.0);
  for (Family f : {Family::zaig, Family::zaga}) {
    const auto fit = stats_mle(f, zeros);
    CHECK(fit.params.mu == 1.0);
    CHECK(fit.params.sigma == 1.0);
    CHECK(fit.params.nu == max_nu);
  }

  WeightedStats equal;
  equal.add(3.0, 4.0);
  for (Family f : {Family::zaig, Family::zaga}) {
    const auto fit = stats_mle(f, equal);
    CHECK(fit.params.mu == Catch::Approx(3.0).epsilon(1e-12));
    CHECK(fit.params.sigma == min_sigma);
    CHECK(fit.params.nu == min_nu);
  }

  CHECK_THROWS_AS(stats_mle(Family::zaga, WeightedStats{}), SizeError);
}

TEST_CASE("split criterion never rewards splitting identical data", "[mle]") {
  // Likelihood decomposition: for all-equal positives the continuous parts
  // cancel exactly between a node and any split of it, so gains reduce to
  // the atom part, which is zero for pure nodes.
  WeightedStats node;
  WeightedStats left;
  for (int i = 0; i < 40; ++i) {
    node.add(7.5, 1.0);
    if (i < 17) left.add(7.5, 1.0);
  }
  const auto right = node.minus(left);
  for (Family f : {Family::zaig, Family::zaga}) {
    const double gain = split_loglik(f, left) + split_loglik(f, right) -
                        split_loglik(f, node);
    CHECK(std::abs(gain) < 1e-9 * std::abs(split_loglik(f, node)));
  }
}

TEST_CASE("split criterion rewards separating zeros from positives", "[mle]") {
  WeightedStats node, left;
  for (int i = 0; i < 30; ++i) node.add(0.0, 1.0);
  for (int i = 0; i < 30; ++i) node.add(5.0 + (i % 3), 1.0);
  for (int i = 0; i < 30; ++i) left.add(0.0, 1.0);
  const auto right = node.minus(left);
  for (Family f : {Family::zaig, Family::zaga}) {
    const double gain = split_loglik(f, left) + split_loglik(f, right) -
                        split_loglik(f, node);
    CHECK(gain > 1.0);
  }
}
