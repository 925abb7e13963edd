#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "zadre/bspline.hpp"
#include "zadre/dataset.hpp"
#include "zadre/errors.hpp"
#include "zadre/forest.hpp"
#include "zadre/metrics.hpp"
#include "zadre/rng.hpp"
#include "zadre/serialization.hpp"
#include "zadre/stacking.hpp"
#include "zadre/synthetic.hpp"
#include "zadre/version.hpp"

namespace zadre {

/// Everything one experiment run needs. Input is a CSV path when csv_path is
/// non-empty, otherwise the synthetic generator spec. The master seed drives
/// the generator, the split, and every forest through named substreams.
struct ExperimentConfig {
  std::string csv_path;
  SyntheticSpec synthetic;
  std::uint64_t seed = 1;
  TauGrid grid;
  ForestConfig forest;
  SplineBasisSpec spline;
  std::vector<std::string> algorithms;  // canonicalized: never empty
  std::string out_dir = "out";

  ExperimentConfig() {
    for (const auto& spec : full_roster()) algorithms.push_back(spec.id);
  }

  void validate() const {
    grid.validate();
    forest.validate();
    spline.validate();
    if (algorithms.empty()) throw ConfigError("config: algorithms must not be empty");
    for (const auto& id : algorithms) roster_entry(id);
    auto sorted = algorithms;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end())
      throw ConfigError("config: algorithms lists \"" + *dup + "\" more than once");
    if (out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
    if (csv_path.empty() && synthetic.n < 3)
      throw ConfigError("config: input.synthetic.n must be at least 3");
  }
};

namespace experiment_detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::string_view path,
                                std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) {
          return key == k;
        }) == known.end()) {
      throw ConfigError("config: unknown key \"" + std::string(path) + key + "\"");
    }
  }
}

inline const json* maybe(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

template <typename T>
T number_field(const json& j, std::string_view path) {
  if constexpr (std::is_same_v<T, double>) {
    if (!j.is_number())
      throw ConfigError("config: \"" + std::string(path) + "\" must be a number");
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!j.is_number_integer() ||
        (!j.is_number_unsigned() && j.get<std::int64_t>() < 0))
      throw ConfigError("config: \"" + std::string(path) +
                        "\" must be a non-negative integer");
  } else {
    if (!j.is_number_integer())
      throw ConfigError("config: \"" + std::string(path) + "\" must be an integer");
  }
  return j.get<T>();
}

inline std::string string_field(const json& j, std::string_view path) {
  if (!j.is_string())
    throw ConfigError("config: \"" + std::string(path) + "\" must be a string");
  return j.get<std::string>();
}

template <std::size_t N>
void coefficient_array(const json& j, std::string_view path,
                       std::array<double, N>& out) {
  if (!j.is_array() || j.size() != N)
    throw ConfigError("config: \"" + std::string(path) + "\" must be an array of " +
                      std::to_string(N) + " numbers");
  for (std::size_t i = 0; i < N; ++i)
    out[i] = number_field<double>(j[i],
                                  std::string(path) + "[" + std::to_string(i) + "]");
}

inline SyntheticSpec parse_synthetic(const json& j) {
  if (!j.is_object()) throw ConfigError("config: \"input.synthetic\" must be an object");
  reject_unknown_keys(j, "input.synthetic.",
                      {"n", "family", "beta_mu", "beta_sigma", "beta_nu"});
  SyntheticSpec spec;
  if (const auto* n = maybe(j, "n")) {
    const auto v = number_field<std::uint64_t>(*n, "input.synthetic.n");
    spec.n = static_cast<std::size_t>(v);
  }
  if (const auto* fam = maybe(j, "family")) {
    const auto name = string_field(*fam, "input.synthetic.family");
    try {
      spec.family = family_from_name(name);
    } catch (const DataError&) {
      throw ConfigError("config: \"input.synthetic.family\" must be zaig or zaga");
    }
  }
  if (const auto* b = maybe(j, "beta_mu"))
    coefficient_array(*b, "input.synthetic.beta_mu", spec.beta_mu);
  if (const auto* b = maybe(j, "beta_sigma"))
    coefficient_array(*b, "input.synthetic.beta_sigma", spec.beta_sigma);
  if (const auto* b = maybe(j, "beta_nu"))
    coefficient_array(*b, "input.synthetic.beta_nu", spec.beta_nu);
  return spec;
}

}  // namespace experiment_detail

/// Parses and fully validates a config document; missing fields take the
/// production defaults (17-level grid, 100 trees, lambda = 1000, the full
/// roster). Unknown keys are rejected with their field path.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using experiment_detail::maybe;
  using experiment_detail::number_field;
  using experiment_detail::reject_unknown_keys;
  using experiment_detail::string_field;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown_keys(j, "",
                      {"input", "seed", "tau_grid", "forest", "spline",
                       "algorithms", "out_dir"});

  ExperimentConfig cfg;
  if (const auto* input = maybe(j, "input")) {
    if (!input->is_object())
      throw ConfigError("config: \"input\" must be an object");
    reject_unknown_keys(*input, "input.", {"csv", "synthetic"});
    const auto* csv = maybe(*input, "csv");
    const auto* synth = maybe(*input, "synthetic");
    if (csv && synth)
      throw ConfigError("config: \"input\" must set only one of csv, synthetic");
    if (csv) cfg.csv_path = string_field(*csv, "input.csv");
    if (synth) cfg.synthetic = experiment_detail::parse_synthetic(*synth);
  }
  if (const auto* seed = maybe(j, "seed"))
    cfg.seed = number_field<std::uint64_t>(*seed, "seed");
  if (const auto* grid = maybe(j, "tau_grid")) {
    if (!grid->is_array() || grid->empty())
      throw ConfigError("config: \"tau_grid\" must be a non-empty array");
    cfg.grid.levels.clear();
    for (std::size_t i = 0; i < grid->size(); ++i) {
      const std::string path = "tau_grid[" + std::to_string(i) + "]";
      const double tau = number_field<double>((*grid)[i], path);
      if (!(tau > 0.0 && tau < 1.0))
        throw ConfigError("config: \"" + path + "\" = " + std::to_string(tau) +
                          " is outside (0, 1)");
      if (!cfg.grid.levels.empty() && tau <= cfg.grid.levels.back())
        throw ConfigError("config: \"" + path + "\" must exceed the previous level");
      cfg.grid.levels.push_back(tau);
    }
  }
  if (const auto* forest = maybe(j, "forest")) {
    if (!forest->is_object())
      throw ConfigError("config: \"forest\" must be an object");
    reject_unknown_keys(*forest, "forest.",
                        {"n_trees", "mtry", "min_leaf", "max_depth", "threads",
                         "max_split_candidates"});
    const auto field = [&](const char* key, int& out) {
      if (const auto* v = maybe(*forest, key))
        out = number_field<int>(*v, std::string("forest.") + key);
    };
    field("n_trees", cfg.forest.n_trees);
    field("mtry", cfg.forest.mtry);
    field("min_leaf", cfg.forest.min_leaf);
    field("max_depth", cfg.forest.max_depth);
    field("threads", cfg.forest.threads);
    field("max_split_candidates", cfg.forest.max_split_candidates);
  }
  if (const auto* spline = maybe(j, "spline")) {
    if (!spline->is_object())
      throw ConfigError("config: \"spline\" must be an object");
    reject_unknown_keys(*spline, "spline.",
                        {"degree", "interior_knots", "penalty_order", "lambda"});
    if (const auto* v = maybe(*spline, "degree"))
      cfg.spline.degree = number_field<int>(*v, "spline.degree");
    if (const auto* v = maybe(*spline, "interior_knots"))
      cfg.spline.interior_knots = number_field<int>(*v, "spline.interior_knots");
    if (const auto* v = maybe(*spline, "penalty_order"))
      cfg.spline.penalty_order = number_field<int>(*v, "spline.penalty_order");
    if (const auto* v = maybe(*spline, "lambda"))
      cfg.spline.lambda = number_field<double>(*v, "spline.lambda");
  }
  if (const auto* algorithms = maybe(j, "algorithms")) {
    if (!algorithms->is_array())
      throw ConfigError("config: \"algorithms\" must be an array of ids");
    if (!algorithms->empty()) {  // empty keeps the full-roster default
      cfg.algorithms.clear();
      for (std::size_t i = 0; i < algorithms->size(); ++i) {
        const std::string path = "algorithms[" + std::to_string(i) + "]";
        const auto id = string_field((*algorithms)[i], path);
        try {
          roster_entry(id);
        } catch (const ConfigError&) {
          throw ConfigError("config: \"" + path +
                            "\" names an unknown algorithm: " + id);
        }
        cfg.algorithms.push_back(id);
      }
    }
  }
  if (const auto* out = maybe(j, "out_dir"))
    cfg.out_dir = string_field(*out, "out_dir");
  cfg.validate();
  return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  if (!cfg.csv_path.empty()) {
    j["input"] = {{"csv", cfg.csv_path}};
  } else {
    j["input"] = {
        {"synthetic",
         {{"n", cfg.synthetic.n},
          {"family", family_name(cfg.synthetic.family)},
          {"beta_mu", std::vector<double>(cfg.synthetic.beta_mu.begin(),
                                          cfg.synthetic.beta_mu.end())},
          {"beta_sigma", std::vector<double>(cfg.synthetic.beta_sigma.begin(),
                                             cfg.synthetic.beta_sigma.end())},
          {"beta_nu", std::vector<double>(cfg.synthetic.beta_nu.begin(),
                                          cfg.synthetic.beta_nu.end())}}}};
  }
  j["seed"] = cfg.seed;
  j["tau_grid"] = cfg.grid.levels;
  j["forest"] = {{"n_trees", cfg.forest.n_trees},
                 {"mtry", cfg.forest.mtry},
                 {"min_leaf", cfg.forest.min_leaf},
                 {"max_depth", cfg.forest.max_depth},
                 {"threads", cfg.forest.threads},
                 {"max_split_candidates", cfg.forest.max_split_candidates}};
  j["spline"] = {{"degree", cfg.spline.degree},
                 {"interior_knots", cfg.spline.interior_knots},
                 {"penalty_order", cfg.spline.penalty_order},
                 {"lambda", cfg.spline.lambda}};
  j["algorithms"] = cfg.algorithms;
  j["out_dir"] = cfg.out_dir;
  return j;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path.string() + ": " + e.what());
  }
  return parse_experiment_config(j);
}

// ---------------------------------------------------------------------------
// Evaluation report: scoring rule skill, per-level skill and ranks, and
// coverage for every algorithm.

struct AlgorithmEvaluation {
  std::string id;
  bool ok = false;
  std::string error;
  double scoring_rule_skill = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> tau_skill;
  std::vector<double> tau_rank;
  std::vector<double> tau_coverage;
};

struct EvaluationReport {
  TauGrid grid;
  std::vector<double> reference;  // climatology quantiles per level
  std::vector<AlgorithmEvaluation> algorithms;
};

/// Scores every algorithm's test-set matrix: scoring-rule skill against the
/// climatology reference, per-level median-score skill, average ranks, and
/// coverage. Failed algorithms keep their error and get NaN everywhere,
/// which excludes them from the rank columns.
inline EvaluationReport evaluate_algorithms(const RunResult& run,
                                            const TauGrid& grid,
                                            std::span<const double> train_targets,
                                            std::span<const double> test_targets) {
  grid.validate();
  EvaluationReport report;
  report.grid = grid;
  report.reference = reference_quantiles(train_targets, grid.levels);

  const std::size_t n_levels = grid.size();
  const std::size_t n_test = test_targets.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<double> skill_table(run.algorithms.size() * n_levels, nan);
  std::vector<double> ref_scores(n_levels);
  for (std::size_t j = 0; j < n_levels; ++j) {
    const std::vector<double> ref_col(n_test, report.reference[j]);
    ref_scores[j] = median_quantile_score(ref_col, test_targets, grid.levels[j]);
  }

  for (std::size_t a = 0; a < run.algorithms.size(); ++a) {
    const auto& algo = run.algorithms[a];
    AlgorithmEvaluation eval;
    eval.id = algo.id;
    eval.ok = algo.ok;
    eval.error = algo.error;
    if (algo.ok) {
      if (algo.matrix.n_rows != n_test || algo.matrix.n_cols != n_levels)
        throw ShapeError("evaluate_algorithms: matrix shape mismatch for " +
                         algo.id);
      eval.scoring_rule_skill =
          scoring_rule_skill(algo.matrix.values, n_test, report.reference,
                             grid.levels, test_targets);
      eval.tau_skill.resize(n_levels);
      eval.tau_coverage.resize(n_levels);
      std::vector<double> col(n_test);
      for (std::size_t j = 0; j < n_levels; ++j) {
        for (std::size_t i = 0; i < n_test; ++i) col[i] = algo.matrix.at(i, j);
        const double score =
            median_quantile_score(col, test_targets, grid.levels[j]);
        eval.tau_skill[j] = skill(score, ref_scores[j]);
        eval.tau_coverage[j] = coverage(col, test_targets);
        skill_table[a * n_levels + j] = eval.tau_skill[j];
      }
    }
    report.algorithms.push_back(std::move(eval));
  }

  const auto ranks = rank_table(skill_table, run.algorithms.size(), n_levels);
  for (std::size_t a = 0; a < report.algorithms.size(); ++a) {
    auto& eval = report.algorithms[a];
    eval.tau_rank.assign(ranks.begin() + static_cast<std::ptrdiff_t>(a * n_levels),
                         ranks.begin() +
                             static_cast<std::ptrdiff_t>((a + 1) * n_levels));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Run manifest and file emission.

struct StageTime {
  std::string name;
  double seconds = 0.0;
};

struct AlgorithmStatus {
  std::string id;
  bool ok = false;
  std::string error;
};

struct FileEntry {
  std::string name;
  std::uint64_t bytes = 0;
};

struct RunManifest {
  nlohmann::json config_echo;
  std::string config_hash;
  std::string version;
  std::vector<StageTime> stages;
  std::vector<AlgorithmStatus> algorithms;
  std::vector<FileEntry> files;

  bool all_ok() const {
    return std::all_of(algorithms.begin(), algorithms.end(),
                       [](const AlgorithmStatus& s) { return s.ok; });
  }
};

namespace experiment_detail {

// Shortest round-trip decimal form; keeps every emitted file byte-stable.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string(buf);
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

inline void write_quantile_csv(const std::filesystem::path& path,
                               const QuantileMatrix& m, const TauGrid& grid) {
  auto out = open_out(path);
  for (std::size_t j = 0; j < grid.size(); ++j)
    out << (j ? "," : "") << "tau_" << format_double(grid.levels[j]);
  out << '\n';
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    for (std::size_t j = 0; j < m.n_cols; ++j)
      out << (j ? "," : "") << format_double(m.at(i, j));
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

inline void write_report_files(const std::filesystem::path& dir,
                               const EvaluationReport& report) {
  {
    auto out = open_out(dir / "scoring_rule_skill.csv");
    out << "algorithm,scoring_rule_skill\n";
    for (const auto& a : report.algorithms)
      out << a.id << ',' << format_double(a.scoring_rule_skill) << '\n';
  }
  {
    auto out = open_out(dir / "skill_and_ranks.csv");
    out << "algorithm,tau,skill,rank\n";
    for (const auto& a : report.algorithms) {
      for (std::size_t j = 0; j < report.grid.size(); ++j) {
        const double sk = a.ok ? a.tau_skill[j]
                               : std::numeric_limits<double>::quiet_NaN();
        out << a.id << ',' << format_double(report.grid.levels[j]) << ','
            << format_double(sk) << ',' << format_double(a.tau_rank[j]) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "coverage.csv");
    out << "algorithm,tau,coverage\n";
    for (const auto& a : report.algorithms) {
      if (!a.ok) continue;
      for (std::size_t j = 0; j < report.grid.size(); ++j)
        out << a.id << ',' << format_double(report.grid.levels[j]) << ','
            << format_double(a.tau_coverage[j]) << '\n';
    }
  }

  nlohmann::json j;
  j["tau_grid"] = report.grid.levels;
  j["reference_quantiles"] = report.reference;
  nlohmann::json algorithms = nlohmann::json::array();
  for (const auto& a : report.algorithms) {
    nlohmann::json ja;
    ja["id"] = a.id;
    ja["ok"] = a.ok;
    if (!a.error.empty()) ja["error"] = a.error;
    ja["scoring_rule_skill"] = a.scoring_rule_skill;
    ja["tau_skill"] = a.tau_skill;
    ja["tau_rank"] = a.tau_rank;
    ja["tau_coverage"] = a.tau_coverage;
    algorithms.push_back(std::move(ja));
  }
  j["algorithms"] = std::move(algorithms);
  auto out = open_out(dir / "report.json");
  out << j.dump(2) << '\n';
}

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["version"] = m.version;
  j["config"] = m.config_echo;
  j["config_hash"] = m.config_hash;
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : m.stages)
    stages.push_back({{"name", s.name}, {"seconds", s.seconds}});
  j["stages"] = std::move(stages);
  nlohmann::json algorithms = nlohmann::json::array();
  for (const auto& a : m.algorithms) {
    nlohmann::json ja = {{"id", a.id}, {"ok", a.ok}};
    if (!a.error.empty()) ja["error"] = a.error;
    algorithms.push_back(std::move(ja));
  }
  j["algorithms"] = std::move(algorithms);
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : m.files)
    files.push_back({{"name", f.name}, {"bytes", f.bytes}});
  j["files"] = std::move(files);
  return j;
}

}  // namespace experiment_detail

/// Executes the full experiment: data, split, the 17-algorithm protocol,
/// evaluation, and file emission. Everything lands in cfg.out_dir:
/// quantiles_<algorithm>.csv per successful algorithm, the three figure
/// CSVs, report.json, and manifest.json (written last, atomically). The
/// manifest's file inventory lists the directory contents besides itself.
inline RunManifest run_experiment(const ExperimentConfig& cfg) {
  using clock = std::chrono::steady_clock;
  cfg.validate();
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);

  RunManifest manifest;
  manifest.config_echo = config_to_json(cfg);
  manifest.config_hash =
      experiment_detail::hash_hex(manifest.config_echo.dump());
  manifest.version = version_string;

  auto t0 = clock::now();
  Dataset data;
  if (!cfg.csv_path.empty()) {
    data = load_csv(cfg.csv_path);
  } else {
    SyntheticSpec spec = cfg.synthetic;
    spec.seed = derive_seed(cfg.seed, "synthetic");
    data = generate_synthetic(spec).data;
  }
  manifest.stages.push_back(
      {"load", std::chrono::duration<double>(clock::now() - t0).count()});

  t0 = clock::now();
  const auto split = split_three_way(data, derive_seed(cfg.seed, "split"));
  manifest.stages.push_back(
      {"split", std::chrono::duration<double>(clock::now() - t0).count()});

  ProtocolConfig protocol;
  protocol.grid = cfg.grid;
  protocol.spline = cfg.spline;
  protocol.forest = cfg.forest;
  protocol.algorithms = cfg.algorithms;
  protocol.seed = cfg.seed;
  const auto run = run_all_algorithms(split, protocol);
  for (const auto& [name, seconds] : run.stage_seconds)
    manifest.stages.push_back({name, seconds});
  for (const auto& a : run.algorithms)
    manifest.algorithms.push_back({a.id, a.ok, a.error});

  t0 = clock::now();
  std::vector<double> train_targets;
  train_targets.reserve(split.set1.size() + split.set2.size());
  for (const double y : split.set1.targets()) train_targets.push_back(y);
  for (const double y : split.set2.targets()) train_targets.push_back(y);
  const auto report =
      evaluate_algorithms(run, cfg.grid, train_targets, split.set3.targets());
  manifest.stages.push_back(
      {"evaluate", std::chrono::duration<double>(clock::now() - t0).count()});

  t0 = clock::now();
  for (const auto& a : run.algorithms) {
    if (!a.ok) continue;
    experiment_detail::write_quantile_csv(dir / ("quantiles_" + a.id + ".csv"),
                                          a.matrix, cfg.grid);
  }
  experiment_detail::write_report_files(dir, report);

  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name == "manifest.json" || name == "manifest.json.tmp") continue;
    manifest.files.push_back(
        {name, static_cast<std::uint64_t>(entry.file_size())});
  }
  std::sort(manifest.files.begin(), manifest.files.end(),
            [](const FileEntry& a, const FileEntry& b) { return a.name < b.name; });
  manifest.stages.push_back(
      {"write", std::chrono::duration<double>(clock::now() - t0).count()});

  const auto tmp = dir / "manifest.json.tmp";
  {
    auto out = experiment_detail::open_out(tmp);
    out << experiment_detail::manifest_to_json(manifest).dump(2) << '\n';
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, dir / "manifest.json");
  return manifest;
}

}  // namespace zadre
