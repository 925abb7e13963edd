#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "zadre/serialization.hpp"
#include "zadre/synthetic.hpp"

using namespace zadre;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("zadre-serial-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

Dataset small_data(std::size_t n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.seed = seed;
  return generate_synthetic(spec).data;
}

}  // namespace

TEST_CASE("family names round-trip", "[serialization]") {
  CHECK(family_name(Family::zaig) == "zaig");
  CHECK(family_name(Family::zaga) == "zaga");
  CHECK(family_from_name("zaig") == Family::zaig);
  CHECK(family_from_name("zaga") == Family::zaga);
  CHECK_THROWS_AS(family_from_name("weibull"), DataError);
}

TEST_CASE("gamlss models reload bit-exactly", "[serialization]") {
  const auto d = small_data(400, 3);
  const auto probe = small_data(25, 99);

  for (const GamlssMode mode : {GamlssMode::linear, GamlssMode::splines}) {
    FittedBase base;
    base.id = mode == GamlssMode::linear ? "GAMLSS-ZAGA" : "GAMLSS-ZAGA-Splines";
    SplineBasisSpec spec;
    spec.interior_knots = 6;  // keep the spline fit small
    base.model = fit_gamlss(d, Family::zaga, mode, spec);

    const auto j = model_to_json(base);
    const auto back = model_from_json(j);
    CHECK(back.id == base.id);
    CHECK(model_to_json(back).dump() == j.dump());

    const auto& m0 = std::get<GamlssModel>(base.model);
    const auto& m1 = std::get<GamlssModel>(back.model);
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const auto p0 = predict_params(m0, probe.predictor_row(i));
      const auto p1 = predict_params(m1, probe.predictor_row(i));
      CHECK(p0.mu == p1.mu);
      CHECK(p0.sigma == p1.sigma);
      CHECK(p0.nu == p1.nu);
    }
  }
}

TEST_CASE("forests reload bit-exactly through files", "[serialization]") {
  const auto d = small_data(300, 11);
  const auto probe = small_data(25, 98);

  FittedBase base;
  base.id = "DRF-ZAIG";
  ForestConfig config;
  config.n_trees = 7;
  config.min_leaf = 12;
  config.seed = 5;
  config.threads = 1;
  base.model = fit_forest(d, Family::zaig, config);

  TempDir tmp;
  const auto path = tmp.path / "forest.json";
  save_model(path, base);
  const auto back = load_model(path);
  CHECK(back.id == "DRF-ZAIG");
  CHECK(model_to_json(back).dump() == model_to_json(base).dump());

  const auto& f0 = std::get<DistForest>(base.model);
  const auto& f1 = std::get<DistForest>(back.model);
  REQUIRE(f1.trees.size() == f0.trees.size());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const auto p0 = forest_predict_params(f0, probe.predictor_row(i));
    const auto p1 = forest_predict_params(f1, probe.predictor_row(i));
    CHECK(p0.mu == p1.mu);
    CHECK(p0.sigma == p1.sigma);
    CHECK(p0.nu == p1.nu);
  }
}

TEST_CASE("malformed model documents are rejected", "[serialization]") {
  const auto d = small_data(200, 7);
  FittedBase base;
  base.id = "DRF-ZAGA";
  ForestConfig config;
  config.n_trees = 2;
  config.min_leaf = 20;
  config.threads = 1;
  base.model = fit_forest(d, Family::zaga, config);
  const auto good = model_to_json(base);

  auto bad = good;
  bad["format_version"] = 2;
  CHECK_THROWS_AS(model_from_json(bad), DataError);

  bad = good;
  bad["kind"] = "boosting";
  CHECK_THROWS_AS(model_from_json(bad), DataError);

  bad = good;
  bad.erase("targets");
  CHECK_THROWS_AS(model_from_json(bad), DataError);

  bad = good;
  bad["trees"][0]["leaves"][0]["rows"][0] = 100000;
  CHECK_THROWS_AS(model_from_json(bad), DataError);

  bad = good;
  bad["trees"][0]["nodes"][0] = nlohmann::json::array({1, 2.0, 3});
  CHECK_THROWS_AS(model_from_json(bad), DataError);

  bad = good;
  bad["family"] = 7;
  CHECK_THROWS_AS(model_from_json(bad), DataError);

  TempDir tmp;
  CHECK_THROWS_AS(load_model(tmp.path / "missing.json"), DataError);
  const auto garbled = tmp.path / "garbled.json";
  std::ofstream(garbled) << "{ not json";
  CHECK_THROWS_AS(load_model(garbled), DataError);
}

TEST_CASE("gamlss document size checks catch truncation", "[serialization]") {
  const auto d = small_data(200, 5);
  FittedBase base;
  base.id = "GAMLSS-ZAIG";
  base.model = fit_gamlss(d, Family::zaig, GamlssMode::linear);
  const auto good = model_to_json(base);

  auto bad = good;
  bad["beta_mu"].erase(0);
  CHECK_THROWS_AS(model_from_json(bad), DataError);

  bad = good;
  bad["range_lo"].erase(0);
  CHECK_THROWS_AS(model_from_json(bad), DataError);

  bad = good;
  bad["mode"] = "quadratic";
  CHECK_THROWS_AS(model_from_json(bad), DataError);
}
