#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "zadre/dataset.hpp"
#include "zadre/distributions.hpp"
#include "zadre/errors.hpp"
#include "zadre/mle.hpp"
#include "zadre/parallel.hpp"
#include "zadre/rng.hpp"

namespace zadre {

struct ForestConfig {
  int n_trees = 100;
  int mtry = 3;
  int min_leaf = 20;
  int max_depth = 30;
  // Test hook: with bootstrapping disabled every tree sees the full training
  // set once, so a single tree is exactly reproducible by hand.
  bool bootstrap = true;
  // 0 selects the hardware thread count. The fitted forest is identical for
  // every thread count.
  int threads = 0;
  std::uint64_t seed = 1;
  int max_split_candidates = 64;

  void validate() const {
    if (n_trees < 1) throw ConfigError("n_trees must be at least 1");
    if (mtry < 1 || mtry > static_cast<int>(n_predictors))
      throw ConfigError("mtry must be between 1 and 9");
    if (min_leaf < 1) throw ConfigError("min_leaf must be at least 1");
    if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
    if (max_split_candidates < 1)
      throw ConfigError("max_split_candidates must be at least 1");
  }
};

// Internal node when split_predictor >= 0, leaf otherwise. Children and leaf
// payloads are indices into the owning tree's arrays.
struct TreeNode {
  int split_predictor = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;
};

// Leaf membership is the bootstrap multiset restricted to the leaf: unique
// training-row indices in ascending order with their multiplicities.
struct TreeLeaf {
  std::vector<std::int32_t> rows;
  std::vector<std::int32_t> counts;
  ZeroAdjustedParams params{1.0, 1.0, 0.5};
};

struct DistTree {
  std::uint64_t seed = 0;
  std::vector<TreeNode> nodes;
  std::vector<TreeLeaf> leaves;

  const TreeLeaf& find_leaf(std::span<const double> x) const {
    int at = 0;
    while (nodes[at].split_predictor >= 0) {
      const TreeNode& nd = nodes[at];
      at = x[nd.split_predictor] <= nd.threshold ? nd.left : nd.right;
    }
    return leaves[nodes[at].leaf];
  }
};

struct DistForest {
  Family family = Family::zaga;
  ForestConfig config;
  std::vector<DistTree> trees;
  // Training targets are retained because prediction re-estimates parameters
  // from forest-weighted rows rather than averaging leaf parameters.
  std::vector<double> targets;
};

namespace forest_detail {

struct SplitChoice {
  int predictor = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

inline WeightedStats entries_stats(std::span<const double> y,
                                   std::span<const std::int32_t> entries) {
  WeightedStats s;
  for (const std::int32_t row : entries) s.add(y[row], 1.0);
  return s;
}

// A node can only be homogeneous in likelihood if every candidate partition
// leaves both children with the node's own parameter estimates.
inline bool node_is_pure(const WeightedStats& s) {
  if (s.w_pos == 0.0) return true;
  return s.w_zero == 0.0 && s.min_pos == s.max_pos;
}

// Evaluates every admissible threshold on one predictor. Entries must be the
// node's bootstrap multiset; order is irrelevant because the scan re-sorts.
inline void best_split_on_predictor(const Dataset& d, Family family,
                                    int predictor,
                                    std::span<const std::int32_t> entries,
                                    const WeightedStats& node_stats,
                                    double node_loglik, int min_leaf,
                                    int max_candidates, SplitChoice& best,
                                    std::vector<std::pair<double, std::int32_t>>& scratch) {
  const auto column = d.predictor_column(static_cast<std::size_t>(predictor));
  scratch.clear();
  scratch.reserve(entries.size());
  for (const std::int32_t row : entries) scratch.emplace_back(column[row], row);
  std::sort(scratch.begin(), scratch.end());

  // Boundary b sits between distinct values scratch[b-1] and scratch[b]; the
  // candidate threshold is their midpoint.
  std::vector<std::int32_t> boundaries;
  for (std::size_t i = 1; i < scratch.size(); ++i) {
    if (scratch[i].first != scratch[i - 1].first)
      boundaries.push_back(static_cast<std::int32_t>(i));
  }
  if (boundaries.empty()) return;

  // Cap the candidate count by taking evenly spaced ranks among the
  // boundaries; with few boundaries this keeps all of them.
  std::vector<std::int32_t> selected;
  const std::size_t m = boundaries.size();
  const std::size_t c = std::min<std::size_t>(m, static_cast<std::size_t>(max_candidates));
  selected.reserve(c);
  for (std::size_t q = 1; q <= c; ++q) selected.push_back(boundaries[q * m / (c + 1)]);
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

  const auto& y = d.targets();
  WeightedStats left;
  std::size_t at = 0;
  for (const std::int32_t b : selected) {
    while (at < static_cast<std::size_t>(b)) {
      left.add(y[scratch[at].second], 1.0);
      ++at;
    }
    const std::size_t n_left = at;
    const std::size_t n_right = scratch.size() - at;
    if (n_left < static_cast<std::size_t>(min_leaf) ||
        n_right < static_cast<std::size_t>(min_leaf))
      continue;
    const WeightedStats right = node_stats.minus(left);
    const double gain =
        split_loglik(family, left) + split_loglik(family, right) - node_loglik;
    if (gain > best.gain) {
      best.gain = gain;
      best.predictor = predictor;
      best.threshold =
          0.5 * (scratch[static_cast<std::size_t>(b) - 1].first + scratch[b].first);
    }
  }
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& d, Family family, const ForestConfig& config)
      : d_(d), family_(family), config_(config) {}

  DistTree build(std::uint64_t tree_seed) {
    DistTree tree;
    tree.seed = tree_seed;
    Rng rng(tree_seed);

    const std::size_t n = d_.size();
    std::vector<std::int32_t> entries;
    entries.reserve(n);
    if (config_.bootstrap) {
      std::vector<std::int32_t> counts(n, 0);
      for (std::size_t i = 0; i < n; ++i) ++counts[rng.uniform_index(n)];
      for (std::size_t row = 0; row < n; ++row)
        for (std::int32_t k = 0; k < counts[row]; ++k)
          entries.push_back(static_cast<std::int32_t>(row));
    } else {
      for (std::size_t row = 0; row < n; ++row)
        entries.push_back(static_cast<std::int32_t>(row));
    }

    tree_ = &tree;
    rng_ = &rng;
    grow(std::move(entries), 0);
    tree_ = nullptr;
    rng_ = nullptr;
    return tree;
  }

 private:
  int grow(std::vector<std::int32_t> entries, int depth) {
    const int node_index = static_cast<int>(tree_->nodes.size());
    tree_->nodes.emplace_back();

    const WeightedStats stats = entries_stats(d_.targets(), entries);
    SplitChoice best;
    if (depth < config_.max_depth &&
        entries.size() >= 2 * static_cast<std::size_t>(config_.min_leaf) &&
        !node_is_pure(stats)) {
      const double node_loglik = split_loglik(family_, stats);
      const auto predictors = sample_predictors();
      std::vector<std::pair<double, std::int32_t>> scratch;
      for (const int p : predictors) {
        best_split_on_predictor(d_, family_, p, entries, stats, node_loglik,
                                config_.min_leaf, config_.max_split_candidates,
                                best, scratch);
      }
    }

    if (best.predictor < 0) {
      make_leaf(node_index, entries, stats);
      return node_index;
    }

    const auto column = d_.predictor_column(static_cast<std::size_t>(best.predictor));
    std::vector<std::int32_t> left_entries;
    std::vector<std::int32_t> right_entries;
    for (const std::int32_t row : entries) {
      if (column[row] <= best.threshold)
        left_entries.push_back(row);
      else
        right_entries.push_back(row);
    }
    entries.clear();
    entries.shrink_to_fit();

    const int left = grow(std::move(left_entries), depth + 1);
    const int right = grow(std::move(right_entries), depth + 1);
    TreeNode& nd = tree_->nodes[node_index];
    nd.split_predictor = best.predictor;
    nd.threshold = best.threshold;
    nd.left = left;
    nd.right = right;
    return node_index;
  }

  void make_leaf(int node_index, const std::vector<std::int32_t>& entries,
                 const WeightedStats& stats) {
    TreeLeaf leaf;
    // Entries arrive sorted by row because splits preserve the bootstrap
    // enumeration order, so a linear pass compresses the multiset.
    for (const std::int32_t row : entries) {
      if (!leaf.rows.empty() && leaf.rows.back() == row) {
        ++leaf.counts.back();
      } else {
        leaf.rows.push_back(row);
        leaf.counts.push_back(1);
      }
    }
    leaf.params = stats_mle(family_, stats).params;
    tree_->nodes[node_index].leaf = static_cast<int>(tree_->leaves.size());
    tree_->leaves.push_back(std::move(leaf));
  }

  // mtry distinct predictor indices, reported in ascending order so that
  // equal-gain ties always resolve to the lowest predictor index.
  std::vector<int> sample_predictors() {
    std::array<int, n_predictors> pool;
    for (std::size_t j = 0; j < n_predictors; ++j) pool[j] = static_cast<int>(j);
    const std::size_t k = static_cast<std::size_t>(config_.mtry);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t pick = j + rng_->uniform_index(n_predictors - j);
      std::swap(pool[j], pool[pick]);
    }
    std::vector<int> chosen(pool.begin(), pool.begin() + k);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  const Dataset& d_;
  Family family_;
  const ForestConfig& config_;
  DistTree* tree_ = nullptr;
  Rng* rng_ = nullptr;
};

inline void check_predict_input(const DistForest& f, std::span<const double> x) {
  if (x.size() != n_predictors)
    throw ShapeError("predictor row must have 9 values");
  for (const double v : x) {
    if (!std::isfinite(v)) throw DomainError("predictor values must be finite");
  }
  if (f.trees.empty()) throw FitError("forest has no trees");
}

}  // namespace forest_detail

inline DistForest fit_forest(const Dataset& d, Family family,
                             const ForestConfig& config = {}) {
  config.validate();
  if (d.size() < 2 * static_cast<std::size_t>(config.min_leaf))
    throw SizeError("dataset must have at least 2*min_leaf rows");

  DistForest forest;
  forest.family = family;
  forest.config = config;
  forest.targets.assign(d.targets().begin(), d.targets().end());
  forest.trees.resize(static_cast<std::size_t>(config.n_trees));

  parallel_for(forest.trees.size(), config.threads, [&](std::size_t t) {
    forest_detail::TreeBuilder builder(d, family, config);
    forest.trees[t] = builder.build(derive_seed(config.seed, "tree", t));
  });
  return forest;
}

inline std::vector<double> forest_weights(const DistForest& f,
                                          std::span<const double> x) {
  forest_detail::check_predict_input(f, x);
  std::vector<double> w(f.targets.size(), 0.0);
  for (const DistTree& tree : f.trees) {
    const TreeLeaf& leaf = tree.find_leaf(x);
    double leaf_size = 0.0;
    for (const std::int32_t c : leaf.counts) leaf_size += c;
    const double scale = 1.0 / (leaf_size * f.trees.size());
    for (std::size_t k = 0; k < leaf.rows.size(); ++k)
      w[leaf.rows[k]] += leaf.counts[k] * scale;
  }
  return w;
}

inline MleResult forest_predict_mle(const DistForest& f,
                                    std::span<const double> x) {
  const std::vector<double> w = forest_weights(f, x);
  return weighted_intercept_mle(f.family, f.targets, w);
}

inline ZeroAdjustedParams forest_predict_params(const DistForest& f,
                                                std::span<const double> x) {
  return forest_predict_mle(f, x).params;
}

}  // namespace zadre
