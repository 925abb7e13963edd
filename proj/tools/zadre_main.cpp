#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zadre/experiment.hpp"
#include "zadre/version.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_unexpected = 1;
constexpr int exit_config = 2;
constexpr int exit_data = 3;
constexpr int exit_fit = 4;

struct CommonFlags {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

zadre::ExperimentConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) return zadre::ExperimentConfig{};
  return zadre::load_config_file(config_path);
}

int run_synth(const CommonFlags& flags, std::size_t n, bool n_set,
              const std::string& family, bool family_set) {
  zadre::ExperimentConfig cfg = load_or_default(flags.config_path);
  zadre::SyntheticSpec spec = cfg.synthetic;
  spec.seed = flags.seed_set ? flags.seed : cfg.seed;
  if (n_set) spec.n = n;
  if (family_set) {
    try {
      spec.family = zadre::family_from_name(family);
    } catch (const zadre::DataError&) {
      throw zadre::ConfigError("synth: family must be zaig or zaga");
    }
  }
  if (spec.n < 1) throw zadre::ConfigError("synth: n must be at least 1");
  const auto synth = zadre::generate_synthetic(spec);
  zadre::write_csv(synth.data, flags.out);
  std::cout << "wrote " << spec.n << " samples to " << flags.out << "\n";
  return exit_ok;
}

zadre::ProtocolConfig protocol_from(const zadre::ExperimentConfig& cfg) {
  zadre::ProtocolConfig protocol;
  protocol.grid = cfg.grid;
  protocol.spline = cfg.spline;
  protocol.forest = cfg.forest;
  protocol.seed = cfg.seed;
  return protocol;
}

int run_fit(const CommonFlags& flags, const std::string& data_path,
            const std::string& algorithm) {
  const auto& spec = zadre::roster_entry(algorithm);
  if (spec.kind != zadre::AlgorithmKind::individual)
    throw zadre::ConfigError(
        "fit: only individual algorithms have standalone model files; "
        "ensembles are produced by the experiment subcommand");
  zadre::ExperimentConfig cfg = load_or_default(flags.config_path);
  if (flags.seed_set) cfg.seed = flags.seed;
  const zadre::Dataset data = zadre::load_csv(data_path);
  const auto base = zadre::fit_base(algorithm, data, protocol_from(cfg), "cli");
  zadre::save_model(flags.out, base);
  std::cout << "fit " << algorithm << " on " << data.size() << " samples; model in "
            << flags.out << "\n";
  return exit_ok;
}

int run_predict(const CommonFlags& flags, const std::string& model_path,
                const std::string& data_path) {
  zadre::ExperimentConfig cfg = load_or_default(flags.config_path);
  const auto base = zadre::load_model(model_path);
  const zadre::Dataset data = zadre::load_csv(data_path);
  const auto matrix = zadre::base_predict_quantiles(base, data, cfg.grid);
  zadre::experiment_detail::write_quantile_csv(flags.out, matrix, cfg.grid);
  std::cout << "wrote " << matrix.n_rows << "x" << matrix.n_cols
            << " quantile matrix to " << flags.out << "\n";
  return exit_ok;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
    throw zadre::DataError("predictions: cannot parse " + what + ": \"" + cell +
                           "\"");
  return v;
}

// Reads a quantiles_<algorithm>.csv style file: tau_<level> headers, one row
// of predicted quantiles per sample.
std::pair<zadre::TauGrid, zadre::QuantileMatrix> load_quantile_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw zadre::DataError("predictions: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw zadre::DataError("predictions: empty file " + path);
  zadre::TauGrid grid;
  grid.levels.clear();
  for (const auto& cell : split_csv_line(line)) {
    if (cell.rfind("tau_", 0) != 0)
      throw zadre::DataError("predictions: header cell \"" + cell +
                             "\" is not tau_<level>");
    grid.levels.push_back(parse_cell(cell.substr(4), "header level"));
  }
  grid.validate();
  zadre::QuantileMatrix m;
  m.n_cols = grid.size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != m.n_cols)
      throw zadre::DataError("predictions: row " + std::to_string(m.n_rows + 1) +
                             " has " + std::to_string(cells.size()) +
                             " cells, expected " + std::to_string(m.n_cols));
    for (const auto& cell : cells) m.values.push_back(parse_cell(cell, "value"));
    ++m.n_rows;
  }
  if (m.n_rows == 0) throw zadre::DataError("predictions: no rows in " + path);
  return {std::move(grid), std::move(m)};
}

int run_evaluate(const CommonFlags& flags, const std::string& predictions_path,
                 const std::string& data_path, const std::string& train_path) {
  const auto [grid, matrix] = load_quantile_csv(predictions_path);
  const zadre::Dataset test = zadre::load_csv(data_path);
  const zadre::Dataset train = zadre::load_csv(train_path);
  if (matrix.n_rows != test.size())
    throw zadre::ShapeError("evaluate: " + std::to_string(matrix.n_rows) +
                            " prediction rows for " + std::to_string(test.size()) +
                            " test samples");

  zadre::RunResult run;
  run.algorithms.push_back({"predictions", true, "", matrix});
  const auto report =
      zadre::evaluate_algorithms(run, grid, train.targets(), test.targets());
  const auto& e = report.algorithms.front();

  nlohmann::json j;
  j["tau_grid"] = grid.levels;
  j["reference_quantiles"] = report.reference;
  j["scoring_rule_skill"] = e.scoring_rule_skill;
  j["tau_skill"] = e.tau_skill;
  j["tau_coverage"] = e.tau_coverage;
  if (flags.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(flags.out);
    if (!out) throw zadre::DataError("cannot write " + flags.out);
    out << j.dump(2) << "\n";
    std::cout << "wrote evaluation to " << flags.out << "\n";
  }
  return exit_ok;
}

int run_experiment_cmd(const CommonFlags& flags,
                       const std::vector<std::string>& algorithms, bool quick) {
  zadre::ExperimentConfig cfg = load_or_default(flags.config_path);
  if (flags.seed_set) cfg.seed = flags.seed;
  if (!flags.out.empty()) cfg.out_dir = flags.out;
  if (!algorithms.empty()) cfg.algorithms = algorithms;
  if (quick) {
    cfg.forest.n_trees = 25;
    if (cfg.csv_path.empty()) cfg.synthetic.n = 600;
    // The smoke run must fit every algorithm; the full 24-function spline
    // basis needs more rows than a 600-sample split provides.
    cfg.spline.interior_knots = std::min(cfg.spline.interior_knots, 8);
  }
  cfg.validate();

  const auto started = std::chrono::steady_clock::now();
  const zadre::RunManifest manifest = zadre::run_experiment(cfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();

  for (const auto& a : manifest.algorithms) {
    if (a.ok)
      std::cout << "  [ok]     " << a.id << "\n";
    else
      std::cout << "  [failed] " << a.id << ": " << a.error << "\n";
  }
  std::printf("experiment finished in %.1fs; outputs in %s\n", seconds,
              cfg.out_dir.c_str());
  if (!manifest.all_ok()) {
    std::cerr << "some algorithms failed; partial results were kept\n";
    return exit_fit;
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributional regression and ensembles for zero-adjusted "
               "precipitation targets"};
  app.set_version_flag("--version", zadre::version_string);
  app.require_subcommand(1);

  CommonFlags flags;
  std::size_t synth_n = 0;
  std::string synth_family;
  std::string data_path;
  std::string algorithm;
  std::string model_path;
  std::string predictions_path;
  std::string train_path;
  std::vector<std::string> algorithms;
  bool quick = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset CSV");
  synth->add_option("--out", flags.out, "Output CSV path")->required();
  auto* n_opt = synth->add_option("--n", synth_n, "Number of samples");
  auto* family_opt =
      synth->add_option("--family", synth_family, "Target family: zaig or zaga");
  synth->add_option("--seed", flags.seed, "Generator seed");
  synth->add_option("--config", flags.config_path, "Experiment config JSON");

  auto* fit = app.add_subcommand("fit", "Fit one individual algorithm to a CSV");
  fit->add_option("--data", data_path, "Training CSV")->required();
  fit->add_option("--algorithm", algorithm, "Individual algorithm id")->required();
  fit->add_option("--out", flags.out, "Model JSON path")->required();
  fit->add_option("--seed", flags.seed, "Fit seed");
  fit->add_option("--config", flags.config_path, "Experiment config JSON");

  auto* predict =
      app.add_subcommand("predict", "Predict quantiles from a saved model");
  predict->add_option("--model", model_path, "Model JSON path")->required();
  predict->add_option("--data", data_path, "Input CSV")->required();
  predict->add_option("--out", flags.out, "Output quantile CSV path")->required();
  predict->add_option("--config", flags.config_path,
                      "Experiment config JSON (tau grid)");

  auto* evaluate =
      app.add_subcommand("evaluate", "Score a quantile CSV against observations");
  evaluate->add_option("--predictions", predictions_path, "Quantile CSV")
      ->required();
  evaluate->add_option("--data", data_path, "Test CSV with observed targets")
      ->required();
  evaluate
      ->add_option("--train", train_path,
                   "Training CSV for the climatology reference")
      ->required();
  evaluate->add_option("--out", flags.out, "Report JSON path (default stdout)");

  auto* experiment = app.add_subcommand(
      "experiment", "Run the full comparison protocol and emit report files");
  experiment->add_option("--config", flags.config_path, "Experiment config JSON");
  experiment->add_option("--seed", flags.seed, "Master seed override");
  experiment->add_option("--out", flags.out, "Output directory override");
  experiment
      ->add_option("--algorithms", algorithms,
                   "Comma-separated algorithm ids (default: all 17)")
      ->delimiter(',');
  experiment->add_flag("--quick", quick,
                       "Small run: 25 trees, 600 synthetic samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }
  flags.seed_set = app.get_subcommand()->count("--seed") > 0;

  try {
    if (synth->parsed())
      return run_synth(flags, synth_n, n_opt->count() > 0, synth_family,
                       family_opt->count() > 0);
    if (fit->parsed()) return run_fit(flags, data_path, algorithm);
    if (predict->parsed()) return run_predict(flags, model_path, data_path);
    if (evaluate->parsed())
      return run_evaluate(flags, predictions_path, data_path, train_path);
    if (experiment->parsed()) return run_experiment_cmd(flags, algorithms, quick);
  } catch (const zadre::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const zadre::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const zadre::ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const zadre::SizeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const zadre::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_fit;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return exit_unexpected;
  }
  return exit_unexpected;
}
