#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "zadre/errors.hpp"
#include "zadre/forest.hpp"
#include "zadre/gamlss.hpp"
#include "zadre/stacking.hpp"

namespace zadre {

inline constexpr int model_format_version = 1;

inline std::string family_name(Family f) {
  return f == Family::zaig ? "zaig" : "zaga";
}

inline Family family_from_name(std::string_view name) {
  if (name == "zaig") return Family::zaig;
  if (name == "zaga") return Family::zaga;
  throw DataError("unknown family: " + std::string(name));
}

namespace serial_detail {

using nlohmann::json;

inline const json& field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("model file: missing field \"") + key + "\"");
  return *it;
}

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: field \"") + key + "\": " + e.what());
  }
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, const char* key) {
  const auto v = get_as<std::vector<double>>(j, key);
  if (v.size() != N)
    throw DataError(std::string("model file: field \"") + key + "\" must have " +
                    std::to_string(N) + " entries");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  return json(out);
}

inline Eigen::VectorXd vector_from_json(const json& j, const char* key,
                                        std::size_t expected) {
  const auto v = get_as<std::vector<double>>(j, key);
  if (v.size() != expected)
    throw DataError(std::string("model file: field \"") + key + "\" must have " +
                    std::to_string(expected) + " entries");
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

inline json gamlss_to_json(const GamlssModel& m) {
  json j;
  j["family"] = family_name(m.family);
  j["mode"] = m.mode == GamlssMode::linear ? "linear" : "splines";
  j["basis"] = {{"degree", m.basis_spec.degree},
                {"interior_knots", m.basis_spec.interior_knots},
                {"penalty_order", m.basis_spec.penalty_order},
                {"lambda", m.basis_spec.lambda}};
  j["standardization"] = {
      {"mean", std::vector<double>(m.standardization.mean.begin(),
                                   m.standardization.mean.end())},
      {"sd", std::vector<double>(m.standardization.sd.begin(),
                                 m.standardization.sd.end())}};
  j["range_lo"] = std::vector<double>(m.range_lo.begin(), m.range_lo.end());
  j["range_hi"] = std::vector<double>(m.range_hi.begin(), m.range_hi.end());
  j["beta_mu"] = vector_to_json(m.beta_mu);
  j["beta_sigma"] = vector_to_json(m.beta_sigma);
  j["beta_nu"] = vector_to_json(m.beta_nu);
  j["trace"] = {{"objective", m.trace.objective},
                {"converged", m.trace.converged},
                {"outer_iterations", m.trace.outer_iterations}};
  return j;
}

inline GamlssModel gamlss_from_json(const json& j) {
  GamlssModel m;
  m.family = family_from_name(get_as<std::string>(j, "family"));
  const auto mode = get_as<std::string>(j, "mode");
  if (mode == "linear") {
    m.mode = GamlssMode::linear;
  } else if (mode == "splines") {
    m.mode = GamlssMode::splines;
  } else {
    throw DataError("model file: unknown mode: " + mode);
  }
  const json& basis = field(j, "basis");
  m.basis_spec.degree = get_as<int>(basis, "degree");
  m.basis_spec.interior_knots = get_as<int>(basis, "interior_knots");
  m.basis_spec.penalty_order = get_as<int>(basis, "penalty_order");
  m.basis_spec.lambda = get_as<double>(basis, "lambda");
  m.basis_spec.validate();
  const json& st = field(j, "standardization");
  m.standardization.mean = fixed_array<n_predictors>(st, "mean");
  m.standardization.sd = fixed_array<n_predictors>(st, "sd");
  m.range_lo = fixed_array<n_predictors>(j, "range_lo");
  m.range_hi = fixed_array<n_predictors>(j, "range_hi");
  const std::size_t p = static_cast<std::size_t>(m.n_coefficients());
  m.beta_mu = vector_from_json(j, "beta_mu", p);
  m.beta_sigma = vector_from_json(j, "beta_sigma", p);
  m.beta_nu = vector_from_json(j, "beta_nu", p);
  const json& trace = field(j, "trace");
  m.trace.objective = get_as<std::vector<double>>(trace, "objective");
  m.trace.converged = get_as<bool>(trace, "converged");
  m.trace.outer_iterations = get_as<int>(trace, "outer_iterations");
  m.rebuild_bases();
  return m;
}

inline json forest_to_json(const DistForest& f) {
  json j;
  j["family"] = family_name(f.family);
  j["config"] = {{"n_trees", f.config.n_trees},
                 {"mtry", f.config.mtry},
                 {"min_leaf", f.config.min_leaf},
                 {"max_depth", f.config.max_depth},
                 {"bootstrap", f.config.bootstrap},
                 {"threads", f.config.threads},
                 {"seed", f.config.seed},
                 {"max_split_candidates", f.config.max_split_candidates}};
  j["targets"] = f.targets;
  json trees = json::array();
  for (const auto& t : f.trees) {
    json nodes = json::array();
    for (const auto& nd : t.nodes) {
      nodes.push_back(
          json::array({nd.split_predictor, nd.threshold, nd.left, nd.right, nd.leaf}));
    }
    json leaves = json::array();
    for (const auto& lf : t.leaves) {
      leaves.push_back({{"rows", lf.rows},
                        {"counts", lf.counts},
                        {"params", json::array({lf.params.mu, lf.params.sigma,
                                                lf.params.nu})}});
    }
    trees.push_back(
        {{"seed", t.seed}, {"nodes", nodes}, {"leaves", leaves}});
  }
  j["trees"] = std::move(trees);
  return j;
}

inline DistForest forest_from_json(const json& j) {
  DistForest f;
  f.family = family_from_name(get_as<std::string>(j, "family"));
  const json& c = field(j, "config");
  f.config.n_trees = get_as<int>(c, "n_trees");
  f.config.mtry = get_as<int>(c, "mtry");
  f.config.min_leaf = get_as<int>(c, "min_leaf");
  f.config.max_depth = get_as<int>(c, "max_depth");
  f.config.bootstrap = get_as<bool>(c, "bootstrap");
  f.config.threads = get_as<int>(c, "threads");
  f.config.seed = get_as<std::uint64_t>(c, "seed");
  f.config.max_split_candidates = get_as<int>(c, "max_split_candidates");
  f.config.validate();
  f.targets = get_as<std::vector<double>>(j, "targets");
  const std::int32_t n = static_cast<std::int32_t>(f.targets.size());
  for (const json& tj : field(j, "trees")) {
    DistTree t;
    t.seed = get_as<std::uint64_t>(tj, "seed");
    for (const json& nj : field(tj, "nodes")) {
      if (!nj.is_array() || nj.size() != 5)
        throw DataError("model file: tree node must have 5 entries");
      TreeNode nd;
      nd.split_predictor = nj[0].get<int>();
      nd.threshold = nj[1].get<double>();
      nd.left = nj[2].get<int>();
      nd.right = nj[3].get<int>();
      nd.leaf = nj[4].get<int>();
      t.nodes.push_back(nd);
    }
    for (const json& lj : field(tj, "leaves")) {
      TreeLeaf lf;
      lf.rows = get_as<std::vector<std::int32_t>>(lj, "rows");
      lf.counts = get_as<std::vector<std::int32_t>>(lj, "counts");
      const auto params = get_as<std::vector<double>>(lj, "params");
      if (params.size() != 3)
        throw DataError("model file: leaf params must have 3 entries");
      lf.params = ZeroAdjustedParams(params[0], params[1], params[2]);
      if (lf.rows.size() != lf.counts.size())
        throw DataError("model file: leaf rows/counts length mismatch");
      for (const auto r : lf.rows) {
        if (r < 0 || r >= n) throw DataError("model file: leaf row out of range");
      }
      t.leaves.push_back(std::move(lf));
    }
    const int n_nodes = static_cast<int>(t.nodes.size());
    const int n_leaves = static_cast<int>(t.leaves.size());
    if (n_nodes == 0) throw DataError("model file: tree has no nodes");
    for (const auto& nd : t.nodes) {
      const bool split = nd.split_predictor >= 0;
      if (split && (nd.split_predictor >= static_cast<int>(n_predictors) ||
                    nd.left < 0 || nd.left >= n_nodes || nd.right < 0 ||
                    nd.right >= n_nodes))
        throw DataError("model file: malformed split node");
      if (!split && (nd.leaf < 0 || nd.leaf >= n_leaves))
        throw DataError("model file: malformed leaf node");
    }
    f.trees.push_back(std::move(t));
  }
  return f;
}

}  // namespace serial_detail

/// Serializes a fitted model (either engine) to a versioned JSON document.
inline nlohmann::json model_to_json(const FittedBase& base) {
  nlohmann::json j;
  if (const auto* g = std::get_if<GamlssModel>(&base.model)) {
    j = serial_detail::gamlss_to_json(*g);
    j["kind"] = "gamlss";
  } else {
    j = serial_detail::forest_to_json(std::get<DistForest>(base.model));
    j["kind"] = "forest";
  }
  j["format_version"] = model_format_version;
  j["algorithm"] = base.id;
  return j;
}

inline FittedBase model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("model file: top level must be an object");
  const int version = serial_detail::get_as<int>(j, "format_version");
  if (version != model_format_version)
    throw DataError("model file: unsupported format_version " +
                    std::to_string(version));
  FittedBase base;
  base.id = serial_detail::get_as<std::string>(j, "algorithm");
  const auto kind = serial_detail::get_as<std::string>(j, "kind");
  if (kind == "gamlss") {
    base.model = serial_detail::gamlss_from_json(j);
  } else if (kind == "forest") {
    base.model = serial_detail::forest_from_json(j);
  } else {
    throw DataError("model file: unknown kind: " + kind);
  }
  return base;
}

inline void save_model(const std::filesystem::path& path, const FittedBase& base) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << model_to_json(base).dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

inline FittedBase load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file: invalid JSON in " + path.string() + ": " +
                    e.what());
  }
  return model_from_json(j);
}

}  // namespace zadre
