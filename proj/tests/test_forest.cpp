#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "zadre/forest.hpp"
#include "zadre/synthetic.hpp"

using namespace zadre;

namespace {

Dataset regime_dataset(std::size_t n, std::uint64_t seed) {
  // Predictor 0 is binary and flips the distribution between two regimes;
  // the remaining predictors are noise.
  Dataset d;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    const bool high = rng.uniform() < 0.5;
    s.predictors[0] = high ? 1.0 : 0.0;
    for (std::size_t j = 1; j < n_predictors; ++j) s.predictors[j] = rng.normal();
    const double nu = high ? 0.05 : 0.6;
    const double mu = high ? 50.0 : 5.0;
    if (rng.uniform() < nu) {
      s.target = 0.0;
    } else {
      s.target = mu * rng.gamma(4.0) / 4.0;
    }
    d.add(s);
  }
  return d;
}

struct OracleSplit {
  int predictor = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Independent recomputation of the best split over the given predictors:
// sorts (value, row) pairs, enumerates the capped candidate boundaries, and
// accumulates child statistics in the same ascending order as the builder.
OracleSplit oracle_best_split(const Dataset& d, Family family,
                              const std::vector<std::int32_t>& entries,
                              const std::vector<int>& predictors, int min_leaf,
                              int max_candidates) {
  WeightedStats node;
  for (const auto row : entries) node.add(d.targets()[row], 1.0);
  const double node_ll = split_loglik(family, node);
  OracleSplit best;
  for (const int p : predictors) {
    std::vector<std::pair<double, std::int32_t>> vals;
    for (const auto row : entries)
      vals.emplace_back(d.predictor_column(p)[row], row);
    std::sort(vals.begin(), vals.end());
    std::vector<std::size_t> boundaries;
    for (std::size_t i = 1; i < vals.size(); ++i)
      if (vals[i].first != vals[i - 1].first) boundaries.push_back(i);
    if (boundaries.empty()) continue;
    const std::size_t m = boundaries.size();
    const std::size_t c = std::min<std::size_t>(m, max_candidates);
    std::vector<std::size_t> selected;
    for (std::size_t q = 1; q <= c; ++q) selected.push_back(boundaries[q * m / (c + 1)]);
    selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

    WeightedStats left;
    std::size_t at = 0;
    for (const std::size_t b : selected) {
      while (at < b) {
        left.add(d.targets()[vals[at].second], 1.0);
        ++at;
      }
      if (at < static_cast<std::size_t>(min_leaf) ||
          vals.size() - at < static_cast<std::size_t>(min_leaf))
        continue;
      const WeightedStats right = node.minus(left);
      const double gain =
          split_loglik(family, left) + split_loglik(family, right) - node_ll;
      if (gain > best.gain) {
        best.gain = gain;
        best.predictor = p;
        best.threshold = 0.5 * (vals[b - 1].first + vals[b].first);
      }
    }
  }
  return best;
}

double forest_loglik(const DistForest& f, const Dataset& d) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto params = forest_predict_params(f, d.predictor_row(i));
    total += log_density(f.family, d.target(i), params);
  }
  return total;
}

}  // namespace

TEST_CASE("identical positive targets produce single-leaf trees", "[forest]") {
  Dataset d;
  Rng rng(3);
  for (int i = 0; i < 120; ++i) {
    Sample s;
    s.target = 7.5;
    for (std::size_t j = 0; j < n_predictors; ++j) s.predictors[j] = rng.normal();
    d.add(s);
  }
  ForestConfig cfg;
  cfg.n_trees = 10;
  cfg.threads = 1;
  const auto f = fit_forest(d, Family::zaig, cfg);
  for (const auto& tree : f.trees) {
    REQUIRE(tree.nodes.size() == 1);
    REQUIRE(tree.leaves.size() == 1);
    CHECK(tree.leaves[0].params.mu == Catch::Approx(7.5));
  }
}

TEST_CASE("single tree without bootstrap is the forest", "[forest]") {
  const auto d = regime_dataset(400, 11);
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.threads = 1;
  const auto f = fit_forest(d, Family::zaga, cfg);

  for (std::size_t i = 0; i < 20; ++i) {
    const auto row = d.predictor_row(i);
    const auto& leaf = f.trees[0].find_leaf(row);
    const auto fp = forest_predict_params(f, row);
    CHECK(fp.mu == Catch::Approx(leaf.params.mu).epsilon(1e-12));
    CHECK(fp.sigma == Catch::Approx(leaf.params.sigma).epsilon(1e-9));
    CHECK(fp.nu == Catch::Approx(leaf.params.nu).margin(1e-12));
  }

  // Without bootstrapping every row appears exactly once across the leaves.
  std::size_t members = 0;
  for (const auto& leaf : f.trees[0].leaves) {
    for (const auto c : leaf.counts) {
      REQUIRE(c == 1);
      ++members;
    }
  }
  CHECK(members == d.size());
}

TEST_CASE("separating predictor wins the root split", "[forest]") {
  const auto d = regime_dataset(2000, 5);
  ForestConfig cfg;
  cfg.n_trees = 100;
  cfg.mtry = 9;  // every predictor is a root candidate
  cfg.threads = 2;
  cfg.seed = 17;
  const auto f = fit_forest(d, Family::zaga, cfg);
  int hits = 0;
  for (const auto& tree : f.trees) {
    if (tree.nodes[0].split_predictor == 0) ++hits;
  }
  CHECK(hits >= 95);
}

TEST_CASE("selected splits attain the exhaustive maximum gain", "[forest]") {
  const auto d = regime_dataset(600, 23);
  ForestConfig cfg;
  cfg.n_trees = 6;
  cfg.bootstrap = false;
  cfg.mtry = 9;
  cfg.min_leaf = 10;
  cfg.threads = 1;
  cfg.seed = 99;
  const auto f = fit_forest(d, Family::zaga, cfg);

  std::vector<int> all_predictors(n_predictors);
  std::iota(all_predictors.begin(), all_predictors.end(), 0);

  // Recompute the root decision of every tree from scratch. With bootstrap
  // disabled the root multiset is the full dataset.
  std::vector<std::int32_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), 0);
  for (const auto& tree : f.trees) {
    const auto oracle = oracle_best_split(d, Family::zaga, rows, all_predictors,
                                          cfg.min_leaf, cfg.max_split_candidates);
    REQUIRE(oracle.predictor >= 0);
    REQUIRE(tree.nodes[0].split_predictor == oracle.predictor);
    REQUIRE(tree.nodes[0].threshold == oracle.threshold);
  }
}

TEST_CASE("forest fitting is deterministic across thread counts", "[forest]") {
  const auto synth = generate_synthetic({.n = 500, .seed = 31});
  ForestConfig cfg;
  cfg.n_trees = 12;
  cfg.seed = 7;
  std::vector<DistForest> fits;
  for (const int threads : {1, 2, 8}) {
    cfg.threads = threads;
    fits.push_back(fit_forest(synth.data, Family::zaga, cfg));
  }
  for (std::size_t v = 1; v < fits.size(); ++v) {
    REQUIRE(fits[v].trees.size() == fits[0].trees.size());
    for (std::size_t t = 0; t < fits[0].trees.size(); ++t) {
      const auto& a = fits[0].trees[t];
      const auto& b = fits[v].trees[t];
      REQUIRE(a.nodes.size() == b.nodes.size());
      for (std::size_t k = 0; k < a.nodes.size(); ++k) {
        REQUIRE(a.nodes[k].split_predictor == b.nodes[k].split_predictor);
        REQUIRE(a.nodes[k].threshold == b.nodes[k].threshold);
        REQUIRE(a.nodes[k].left == b.nodes[k].left);
        REQUIRE(a.nodes[k].leaf == b.nodes[k].leaf);
      }
      REQUIRE(a.leaves.size() == b.leaves.size());
      for (std::size_t k = 0; k < a.leaves.size(); ++k) {
        REQUIRE(a.leaves[k].rows == b.leaves[k].rows);
        REQUIRE(a.leaves[k].counts == b.leaves[k].counts);
      }
    }
  }
}

TEST_CASE("forest weights are a probability vector", "[forest]") {
  const auto synth = generate_synthetic({.n = 400, .seed = 13});
  ForestConfig cfg;
  cfg.n_trees = 20;
  cfg.threads = 2;
  const auto f = fit_forest(synth.data, Family::zaga, cfg);
  for (const std::size_t i : {std::size_t{0}, std::size_t{57}, std::size_t{399}}) {
    const auto w = forest_weights(f, synth.data.predictor_row(i));
    double sum = 0.0;
    for (const double v : w) {
      REQUIRE(v >= 0.0);
      sum += v;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("single-leaf single-tree weights are the bootstrap multiset", "[forest]") {
  Dataset d;
  Rng rng(41);
  for (int i = 0; i < 80; ++i) {
    Sample s;
    s.target = 3.0;
    for (std::size_t j = 0; j < n_predictors; ++j) s.predictors[j] = rng.normal();
    d.add(s);
  }
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.threads = 1;
  cfg.seed = 4;
  const auto f = fit_forest(d, Family::zaig, cfg);
  REQUIRE(f.trees[0].leaves.size() == 1);
  const auto& leaf = f.trees[0].leaves[0];
  const auto w = forest_weights(f, d.predictor_row(0));
  std::map<std::int32_t, std::int32_t> mult;
  for (std::size_t k = 0; k < leaf.rows.size(); ++k) mult[leaf.rows[k]] = leaf.counts[k];
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto it = mult.find(static_cast<std::int32_t>(i));
    const double expected = it == mult.end() ? 0.0 : it->second / 80.0;
    REQUIRE(w[i] == Catch::Approx(expected).margin(1e-15));
  }
}

TEST_CASE("weights concentrate within the matching regime", "[forest]") {
  const auto d = regime_dataset(2000, 5);
  ForestConfig cfg;
  cfg.n_trees = 50;
  cfg.mtry = 9;
  cfg.threads = 2;
  cfg.seed = 29;
  const auto f = fit_forest(d, Family::zaga, cfg);

  std::size_t probe = 0;
  while (d.predictor_column(0)[probe] != 1.0) ++probe;
  const auto w = forest_weights(f, d.predictor_row(probe));
  double same_regime = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.predictor_column(0)[i] == 1.0) same_regime += w[i];
  }
  CHECK(same_regime >= 0.9);

  // Regime truth: mu = 50 for the high regime. Individual probe points carry
  // the local wobble of adaptive partitions, so average a handful of them.
  double mu_sum = 0.0;
  int probes = 0;
  for (std::size_t i = 0; i < d.size() && probes < 10; ++i) {
    if (d.predictor_column(0)[i] != 1.0) continue;
    mu_sum += forest_predict_params(f, d.predictor_row(i)).mu;
    ++probes;
  }
  CHECK(mu_sum / probes == Catch::Approx(50.0).epsilon(0.10));
}

TEST_CASE("uniform weights reduce prediction to the pooled fit", "[forest]") {
  const auto synth = generate_synthetic({.n = 300, .seed = 47});
  const auto& y = synth.data.targets();
  WeightedStats s;
  for (const double v : y) s.add(v, 1.0);
  const auto pooled = stats_mle(Family::zaga, s);

  const std::vector<double> uniform(y.size(), 1.0 / y.size());
  const auto weighted = weighted_intercept_mle(Family::zaga, y, uniform);
  CHECK(weighted.params.mu == Catch::Approx(pooled.params.mu).epsilon(1e-10));
  CHECK(weighted.params.sigma == Catch::Approx(pooled.params.sigma).epsilon(1e-8));
  CHECK(weighted.params.nu == Catch::Approx(pooled.params.nu).margin(1e-12));
}

TEST_CASE("weights on zero targets drive the atom to its cap", "[forest]") {
  std::vector<double> y = {0.0, 0.0, 0.0, 5.0};
  std::vector<double> w = {0.4, 0.4, 0.2, 0.0};
  const auto r = weighted_intercept_mle(Family::zaga, y, w);
  CHECK(r.params.nu == Catch::Approx(1.0 - 1e-6));
}

TEST_CASE("forest beats the median single tree on held-out data", "[forest]") {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticSpec spec;
    spec.n = 1500;
    spec.seed = seed;
    const auto synth = generate_synthetic(spec);
    const auto split = split_three_way(synth.data, derive_seed(seed, "holdout"));

    Dataset train;
    for (std::size_t i = 0; i < split.set1.size(); ++i) train.add(split.set1.sample(i));
    for (std::size_t i = 0; i < split.set2.size(); ++i) train.add(split.set2.sample(i));

    ForestConfig cfg;
    cfg.n_trees = 25;
    cfg.threads = 2;
    cfg.seed = derive_seed(seed, "forest");
    const auto forest = fit_forest(train, Family::zaga, cfg);

    std::vector<double> tree_lls;
    for (int t = 0; t < cfg.n_trees; ++t) {
      DistForest single;
      single.family = forest.family;
      single.config = forest.config;
      single.targets = forest.targets;
      single.trees = {forest.trees[t]};
      tree_lls.push_back(forest_loglik(single, split.set3));
    }
    std::nth_element(tree_lls.begin(), tree_lls.begin() + tree_lls.size() / 2,
                     tree_lls.end());
    const double median_tree = tree_lls[tree_lls.size() / 2];
    if (forest_loglik(forest, split.set3) >= median_tree) ++wins;
  }
  CHECK(wins >= 8);
}

TEST_CASE("forest validation errors", "[forest]") {
  const auto synth = generate_synthetic({.n = 50, .seed = 3});
  ForestConfig cfg;
  cfg.min_leaf = 30;
  CHECK_THROWS_AS(fit_forest(synth.data, Family::zaga, cfg), SizeError);

  ForestConfig bad;
  bad.mtry = 10;
  CHECK_THROWS_AS(fit_forest(synth.data, Family::zaga, bad), ConfigError);
  bad = ForestConfig{};
  bad.n_trees = 0;
  CHECK_THROWS_AS(fit_forest(synth.data, Family::zaga, bad), ConfigError);

  ForestConfig small;
  small.n_trees = 2;
  small.threads = 1;
  const auto f = fit_forest(synth.data, Family::zaga, small);
  const std::vector<double> short_row = {1.0, 2.0};
  CHECK_THROWS_AS(forest_weights(f, short_row), ShapeError);
  std::array<double, n_predictors> bad_row{};
  bad_row[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forest_weights(f, bad_row), DomainError);
}
