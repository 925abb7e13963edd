#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "zadre/dataset.hpp"
#include "zadre/distributions.hpp"
#include "zadre/errors.hpp"
#include "zadre/forest.hpp"
#include "zadre/gamlss.hpp"
#include "zadre/quantile_regression.hpp"
#include "zadre/rng.hpp"

namespace zadre {

struct TauGrid {
  std::vector<double> levels = {0.0125, 0.025, 0.050, 0.075, 0.100, 0.200,
                                0.300,  0.400, 0.500, 0.600, 0.700, 0.800,
                                0.900,  0.925, 0.950, 0.975, 0.9875};

  std::size_t size() const { return levels.size(); }

  void validate() const {
    if (levels.empty()) throw ConfigError("tau grid must not be empty");
    double prev = 0.0;
    for (const double t : levels) {
      if (!(t > 0.0 && t < 1.0))
        throw ConfigError("tau grid levels must lie in (0,1)");
      if (!(t > prev)) throw ConfigError("tau grid must be strictly increasing");
      prev = t;
    }
  }
};

/// Row-major matrix of predicted quantiles: rows are samples, columns are
/// the grid levels in order.
struct QuantileMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> values;

  QuantileMatrix() = default;
  QuantileMatrix(std::size_t rows, std::size_t cols)
      : n_rows(rows), n_cols(cols), values(rows * cols, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return values[i * n_cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * n_cols + j]; }
  std::span<double> row(std::size_t i) {
    return std::span<double>(values).subspan(i * n_cols, n_cols);
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * n_cols, n_cols);
  }
};

enum class AlgorithmKind { individual, mean, median, stacking };

struct AlgorithmSpec {
  std::string id;
  AlgorithmKind kind = AlgorithmKind::individual;
  std::vector<std::string> bases;  // empty for individual algorithms
};

namespace stack_detail {

inline std::string combo_id(std::string_view prefix,
                            const std::vector<std::string>& bases) {
  std::string id{prefix};
  for (const auto& b : bases) {
    id += '_';
    id += b;
  }
  return id;
}

}  // namespace stack_detail

/// The 17 compared algorithms: six individual models, five mean combiners,
/// one median combiner, and five stacked generalizations, in roster order.
inline const std::vector<AlgorithmSpec>& full_roster() {
  static const std::vector<AlgorithmSpec> roster = [] {
    const std::string gzis = "GAMLSS-ZAIG-Splines";
    const std::string gzas = "GAMLSS-ZAGA-Splines";
    const std::string dzi = "DRF-ZAIG";
    const std::string dza = "DRF-ZAGA";
    const std::vector<std::vector<std::string>> pairs = {
        {gzis, gzas}, {dzi, dza}, {gzis, dzi}, {gzas, dza}, {gzis, gzas, dzi, dza}};
    std::vector<AlgorithmSpec> r;
    for (const char* id : {"GAMLSS-ZAIG", "GAMLSS-ZAGA", "GAMLSS-ZAIG-Splines",
                           "GAMLSS-ZAGA-Splines", "DRF-ZAIG", "DRF-ZAGA"})
      r.push_back({id, AlgorithmKind::individual, {}});
    for (const auto& bases : pairs)
      r.push_back({stack_detail::combo_id("Mean", bases), AlgorithmKind::mean, bases});
    r.push_back({stack_detail::combo_id("Median", pairs.back()),
                 AlgorithmKind::median, pairs.back()});
    for (const auto& bases : pairs)
      r.push_back(
          {stack_detail::combo_id("Stack", bases), AlgorithmKind::stacking, bases});
    return r;
  }();
  return roster;
}

inline const AlgorithmSpec& roster_entry(std::string_view id) {
  for (const auto& spec : full_roster()) {
    if (spec.id == id) return spec;
  }
  throw ConfigError("unknown algorithm id: " + std::string(id));
}

/// Monotone rearrangement: sorting restores a valid (non-crossing) quantile
/// function while preserving the multiset of values.
inline void rearrange_noncrossing(std::span<double> row) {
  std::sort(row.begin(), row.end());
}

inline QuantileMatrix extract_quantiles(std::span<const PredictiveDistribution> preds,
                                        const TauGrid& grid) {
  grid.validate();
  QuantileMatrix m(preds.size(), grid.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j)
      m.at(i, j) = quantile(preds[i].family, grid.levels[j], preds[i].params);
  }
  return m;
}

/// Entrywise mean or median of k aligned matrices, then per-row monotone
/// rearrangement. Median of an even count averages the middle pair.
inline QuantileMatrix combine_simple(AlgorithmKind kind,
                                     std::span<const QuantileMatrix> inputs) {
  if (kind != AlgorithmKind::mean && kind != AlgorithmKind::median)
    throw ConfigError("combine_simple: kind must be mean or median");
  if (inputs.size() < 2) throw SizeError("combine_simple: need at least 2 inputs");
  for (const auto& m : inputs) {
    if (m.n_rows != inputs[0].n_rows || m.n_cols != inputs[0].n_cols)
      throw ShapeError("combine_simple: input shapes differ");
  }
  const std::size_t k = inputs.size();
  QuantileMatrix out(inputs[0].n_rows, inputs[0].n_cols);
  std::vector<double> cell(k);
  for (std::size_t i = 0; i < out.n_rows; ++i) {
    for (std::size_t j = 0; j < out.n_cols; ++j) {
      for (std::size_t b = 0; b < k; ++b) cell[b] = inputs[b].at(i, j);
      if (kind == AlgorithmKind::mean) {
        double sum = 0.0;
        for (const double v : cell) sum += v;
        out.at(i, j) = sum / static_cast<double>(k);
      } else {
        std::sort(cell.begin(), cell.end());
        out.at(i, j) = k % 2 == 1 ? cell[k / 2]
                                  : 0.5 * (cell[k / 2 - 1] + cell[k / 2]);
      }
    }
    rearrange_noncrossing(out.row(i));
  }
  return out;
}

struct StackedModel {
  std::vector<std::string> base_ids;
  TauGrid grid;
  std::vector<QuantileRegModel> combiners;  // one per grid level, base order
};

/// Trains the per-level combiners against held-out targets, given each
/// base's quantile matrix on the held-out set.
inline StackedModel stack_fit_matrices(const std::vector<std::string>& base_ids,
                                       std::span<const QuantileMatrix> base_set2,
                                       std::span<const double> y2,
                                       const TauGrid& grid) {
  grid.validate();
  if (base_ids.empty() || base_set2.size() != base_ids.size())
    throw ShapeError("stack_fit: one quantile matrix per base required");
  const std::size_t n = y2.size();
  for (const auto& m : base_set2) {
    if (m.n_rows != n || m.n_cols != grid.size())
      throw ShapeError("stack_fit: base matrix shape mismatch");
  }
  StackedModel model;
  model.base_ids = base_ids;
  model.grid = grid;
  model.combiners.reserve(grid.size());
  const std::size_t k = base_ids.size();
  Eigen::MatrixXd x(n, k);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t b = 0; b < k; ++b) x(i, b) = base_set2[b].at(i, j);
    model.combiners.push_back(fit_qr(x, y2, grid.levels[j]));
  }
  return model;
}

/// Applies the trained combiners to each base's quantile matrix on new
/// samples; predictions are floored at zero by the combiner and each row is
/// rearranged to be non-decreasing.
inline QuantileMatrix stack_predict(const StackedModel& m,
                                    std::span<const QuantileMatrix> base_test) {
  if (base_test.size() != m.base_ids.size())
    throw ShapeError("stack_predict: base matrix count mismatch");
  if (m.combiners.size() != m.grid.size())
    throw ShapeError("stack_predict: combiner count must match grid");
  const std::size_t rows = base_test.empty() ? 0 : base_test[0].n_rows;
  for (const auto& b : base_test) {
    if (b.n_rows != rows || b.n_cols != m.grid.size())
      throw ShapeError("stack_predict: base matrix shape mismatch");
  }
  const std::size_t k = m.base_ids.size();
  QuantileMatrix out(rows, m.grid.size());
  std::vector<double> x(k);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < m.grid.size(); ++j) {
      for (std::size_t b = 0; b < k; ++b) x[b] = base_test[b].at(i, j);
      out.at(i, j) = qr_predict(m.combiners[j], x);
    }
    rearrange_noncrossing(out.row(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Protocol orchestration: base fits, combiner training, and the assembly of
// all 17 test-set matrices.

struct ProtocolConfig {
  TauGrid grid;
  SplineBasisSpec spline;
  FitControls controls;
  ForestConfig forest;
  // Algorithm ids to emit; empty selects the full roster.
  std::vector<std::string> algorithms;
  std::uint64_t seed = 1;
};

enum class BaseEngine { gamlss_linear, gamlss_splines, forest };

struct IndividualRecipe {
  BaseEngine engine;
  Family family;
};

inline IndividualRecipe individual_recipe(std::string_view id) {
  if (id == "GAMLSS-ZAIG") return {BaseEngine::gamlss_linear, Family::zaig};
  if (id == "GAMLSS-ZAGA") return {BaseEngine::gamlss_linear, Family::zaga};
  if (id == "GAMLSS-ZAIG-Splines") return {BaseEngine::gamlss_splines, Family::zaig};
  if (id == "GAMLSS-ZAGA-Splines") return {BaseEngine::gamlss_splines, Family::zaga};
  if (id == "DRF-ZAIG") return {BaseEngine::forest, Family::zaig};
  if (id == "DRF-ZAGA") return {BaseEngine::forest, Family::zaga};
  throw ConfigError("not an individual algorithm id: " + std::string(id));
}

struct FittedBase {
  std::string id;
  std::variant<GamlssModel, DistForest> model;
};

/// Fits one individual algorithm. The stage tag keeps forest seeds distinct
/// and deterministic across training stages.
inline FittedBase fit_base(std::string_view id, const Dataset& train,
                           const ProtocolConfig& config, std::string_view stage) {
  const IndividualRecipe recipe = individual_recipe(id);
  FittedBase fitted;
  fitted.id = std::string(id);
  switch (recipe.engine) {
    case BaseEngine::gamlss_linear:
      fitted.model = fit_gamlss(train, recipe.family, GamlssMode::linear, {},
                                config.controls);
      break;
    case BaseEngine::gamlss_splines:
      fitted.model = fit_gamlss(train, recipe.family, GamlssMode::splines,
                                config.spline, config.controls);
      break;
    case BaseEngine::forest: {
      ForestConfig fc = config.forest;
      fc.seed = derive_seed(config.seed,
                            "fit:" + fitted.id + ":" + std::string(stage));
      fitted.model = fit_forest(train, recipe.family, fc);
      break;
    }
  }
  return fitted;
}

inline QuantileMatrix base_predict_quantiles(const FittedBase& base,
                                             const Dataset& d, const TauGrid& grid) {
  std::vector<PredictiveDistribution> preds;
  preds.reserve(d.size());
  if (const auto* g = std::get_if<GamlssModel>(&base.model)) {
    for (std::size_t i = 0; i < d.size(); ++i)
      preds.push_back({g->family, predict_params(*g, d.predictor_row(i))});
  } else {
    const auto& f = std::get<DistForest>(base.model);
    for (std::size_t i = 0; i < d.size(); ++i)
      preds.push_back({f.family, forest_predict_params(f, d.predictor_row(i))});
  }
  return extract_quantiles(preds, grid);
}

namespace stack_detail {

inline void check_disjoint(const Dataset& a, const Dataset& b) {
  const auto& ra = a.origin_rows();
  const auto& rb = b.origin_rows();
  if (ra.empty() || rb.empty()) return;
  std::vector<std::size_t> sa(ra.begin(), ra.end());
  std::vector<std::size_t> sb(rb.begin(), rb.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<std::size_t> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                        std::back_inserter(common));
  if (!common.empty())
    throw DataError("stack_fit: training and combiner sets overlap");
}

}  // namespace stack_detail

/// The 7-step stacking procedure, steps 1-4: bases on the training set,
/// quantile extraction on the disjoint combiner set, one quantile-regression
/// combiner per level.
inline StackedModel stack_fit(const Dataset& set1, const Dataset& set2,
                              const std::vector<std::string>& base_ids,
                              const ProtocolConfig& config = {}) {
  stack_detail::check_disjoint(set1, set2);
  std::vector<QuantileMatrix> set2_matrices;
  set2_matrices.reserve(base_ids.size());
  for (const auto& id : base_ids) {
    try {
      const FittedBase base = fit_base(id, set1, config, "set1");
      set2_matrices.push_back(base_predict_quantiles(base, set2, config.grid));
    } catch (const Error& e) {
      throw FitError("stack_fit: base " + id + " failed: " + e.what());
    }
  }
  return stack_fit_matrices(base_ids, set2_matrices, set2.targets(), config.grid);
}

struct AlgorithmRun {
  std::string id;
  bool ok = false;
  std::string error;
  QuantileMatrix matrix;  // test-set (set3) predictions when ok
};

struct RunResult {
  std::vector<AlgorithmRun> algorithms;  // requested roster order
  std::vector<std::pair<std::string, double>> stage_seconds;
};

/// Executes the full comparison protocol: stacking bases are fit on set1 and
/// their set2 predictions train the combiners; every individual algorithm is
/// then (re)fit on set1 U set2 and predicts set3; mean/median/stacked
/// matrices are assembled from the refit bases' set3 predictions. Failures
/// are recorded per algorithm id and the run continues.
inline RunResult run_all_algorithms(const ThreeWaySplit& split,
                                    const ProtocolConfig& config) {
  config.grid.validate();
  config.spline.validate();
  config.forest.validate();
  config.controls.validate();

  std::vector<const AlgorithmSpec*> requested;
  if (config.algorithms.empty()) {
    for (const auto& spec : full_roster()) requested.push_back(&spec);
  } else {
    for (const auto& id : config.algorithms) requested.push_back(&roster_entry(id));
  }

  using clock = std::chrono::steady_clock;
  const auto elapsed = [](clock::time_point from) {
    return std::chrono::duration<double>(clock::now() - from).count();
  };

  RunResult result;

  // Which base learners feed requested stacks, and which individual models
  // must be (re)fit on set1 U set2 for test-set prediction.
  std::vector<std::string> stack_bases;
  std::vector<std::string> union_models;
  const auto want = [](std::vector<std::string>& list, const std::string& id) {
    if (std::find(list.begin(), list.end(), id) == list.end()) list.push_back(id);
  };
  for (const auto* spec : requested) {
    if (spec->kind == AlgorithmKind::individual) {
      want(union_models, spec->id);
    } else {
      for (const auto& b : spec->bases) {
        want(union_models, b);
        if (spec->kind == AlgorithmKind::stacking) want(stack_bases, b);
      }
    }
  }

  // Steps 1-4: set1 fits and set2 quantile matrices for stacking bases.
  std::map<std::string, QuantileMatrix> set2_matrices;
  std::map<std::string, std::string> set1_errors;
  {
    const auto t0 = clock::now();
    for (const auto& id : stack_bases) {
      try {
        const FittedBase base = fit_base(id, split.set1, config, "set1");
        set2_matrices.emplace(id,
                              base_predict_quantiles(base, split.set2, config.grid));
      } catch (const Error& e) {
        set1_errors.emplace(id, e.what());
      }
    }
    result.stage_seconds.emplace_back("set1_base_fits", elapsed(t0));
  }

  // Step 5: refit on set1 U set2 and predict set3.
  Dataset train_union;
  for (std::size_t i = 0; i < split.set1.size(); ++i)
    train_union.add(split.set1.sample(i));
  for (std::size_t i = 0; i < split.set2.size(); ++i)
    train_union.add(split.set2.sample(i));

  std::map<std::string, QuantileMatrix> set3_matrices;
  std::map<std::string, std::string> union_errors;
  {
    const auto t0 = clock::now();
    for (const auto& id : union_models) {
      try {
        const FittedBase base = fit_base(id, train_union, config, "set1set2");
        set3_matrices.emplace(id,
                              base_predict_quantiles(base, split.set3, config.grid));
      } catch (const Error& e) {
        union_errors.emplace(id, e.what());
      }
    }
    result.stage_seconds.emplace_back("union_refits", elapsed(t0));
  }

  // Assembly per requested algorithm.
  const auto t_assemble = clock::now();
  for (const auto* spec : requested) {
    AlgorithmRun run;
    run.id = spec->id;
    try {
      if (spec->kind == AlgorithmKind::individual) {
        const auto it = set3_matrices.find(spec->id);
        if (it == set3_matrices.end())
          throw FitError("fit failed: " + union_errors.at(spec->id));
        run.matrix = it->second;
        for (std::size_t i = 0; i < run.matrix.n_rows; ++i)
          rearrange_noncrossing(run.matrix.row(i));
      } else if (spec->kind == AlgorithmKind::mean ||
                 spec->kind == AlgorithmKind::median) {
        std::vector<QuantileMatrix> inputs;
        for (const auto& b : spec->bases) {
          const auto it = set3_matrices.find(b);
          if (it == set3_matrices.end())
            throw FitError("base " + b + " failed: " + union_errors.at(b));
          inputs.push_back(it->second);
        }
        run.matrix = combine_simple(spec->kind, inputs);
      } else {
        std::vector<QuantileMatrix> train_inputs;
        std::vector<QuantileMatrix> test_inputs;
        for (const auto& b : spec->bases) {
          const auto it2 = set2_matrices.find(b);
          if (it2 == set2_matrices.end())
            throw FitError("base " + b + " failed: " + set1_errors.at(b));
          train_inputs.push_back(it2->second);
          const auto it3 = set3_matrices.find(b);
          if (it3 == set3_matrices.end())
            throw FitError("base " + b + " failed: " + union_errors.at(b));
          test_inputs.push_back(it3->second);
        }
        const StackedModel stacked = stack_fit_matrices(
            spec->bases, train_inputs, split.set2.targets(), config.grid);
        run.matrix = stack_predict(stacked, test_inputs);
      }
      run.ok = true;
    } catch (const Error& e) {
      run.ok = false;
      run.error = e.what();
    }
    result.algorithms.push_back(std::move(run));
  }
  result.stage_seconds.emplace_back("assembly", elapsed(t_assemble));
  return result;
}

}  // namespace zadre
