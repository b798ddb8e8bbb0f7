#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "mlkbf/config.hpp"
#include "mlkbf/errors.hpp"
#include "mlkbf/io.hpp"

using namespace mlkbf;

TEST_CASE("format_double survives a parse round trip") {
  for (double x : {0.1, 1.0 / 3.0, -2.718281828459045e-12, 1e300, 0.0, -0.25}) {
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
}

TEST_CASE("csv round trip") {
  const auto path = std::filesystem::temp_directory_path() / "mlkbf_io_test.csv";
  CsvTable table;
  table.header = {"step", "value", "label"};
  table.rows = {{"0", format_double(0.1), "a"}, {"1", format_double(-1.0 / 7.0), ""}};
  write_csv(path.string(), table);
  const CsvTable back = read_csv(path.string());
  CHECK(back.header == table.header);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0] == table.rows[0]);
  CHECK(back.rows[1] == table.rows[1]);
  CHECK(std::strtod(back.rows[1][1].c_str(), nullptr) == -1.0 / 7.0);
  std::filesystem::remove(path);
}

TEST_CASE("model json round trip is exact") {
  SUBCASE("linear with a random observation matrix") {
    const ModelSpec m = make_ou5_model(321);
    const ModelSpec back = model_from_json(model_to_json(m));
    CHECK(back.is_linear());
    CHECK(back.A() == m.A());
    CHECK(back.C == m.C);
    CHECK(back.Q_sqrt == m.Q_sqrt);
    CHECK(back.R_sqrt == m.R_sqrt);
    CHECK(back.M0 == m.M0);
    CHECK(back.P0 == m.P0);
  }
  SUBCASE("nonlinear drift is reconstructed from kind + theta") {
    Vector theta(3);
    theta << 10.0, 28.0, 8.0 / 3.0;
    const ModelSpec m = make_lorenz63_model(theta);
    const ModelSpec back = model_from_json(model_to_json(m));
    CHECK_FALSE(back.is_linear());
    Vector x(3);
    x << 0.4, -0.8, 1.1;
    CHECK(drift_eval(back, x) == drift_eval(m, x));
  }
}

TEST_CASE("model_from_config") {
  SUBCASE("presets") {
    CHECK(model_from_config(Json("ou5"), 9).dx == 5);
    CHECK(model_from_config(Json("ou1"), 9).dx == 1);
    CHECK(model_from_config(Json("l63"), 9).dx == 3);
    CHECK(model_from_config(Json("l96"), 9).dx == 40);
    CHECK_THROWS_AS(model_from_config(Json("nope"), 9), ConfigError);
  }
  SUBCASE("preset with theta override") {
    Json node;
    node["preset"] = "l96";
    node["theta"] = Json::array({6.5});
    const ModelSpec m = model_from_config(node, 9);
    const Vector x = Vector::Constant(40, 6.5);
    CHECK(drift_eval(m, x) == Vector::Zero(40));
  }
  SUBCASE("explicit literals") {
    Json node;
    node["kind"] = "linear";
    node["A"] = Json::array({Json::array({-0.5})});
    node["C"] = Json::array({Json::array({1.0})});
    node["Q_sqrt"] = Json::array({Json::array({1.0})});
    node["R_sqrt"] = Json::array({Json::array({2.0})});
    node["M0"] = Json::array({0.0});
    node["P0"] = Json::array({Json::array({1.0})});
    const ModelSpec m = model_from_config(node, 1);
    CHECK(m.A()(0, 0) == -0.5);
    CHECK(m.s()(0, 0) == doctest::Approx(0.25));
  }
}

TEST_CASE("experiment records survive a csv round trip") {
  const auto path = std::filesystem::temp_directory_path() / "mlkbf_records.csv";
  CsvTable t;
  t.header = {"estimator", "variant", "L", "repetitions", "mse", "cost"};
  const double mse = 3.0 / 7.0, cost = 81920.0;
  t.rows = {{"SL", "f1", "6", "64", format_double(mse), format_double(cost)}};
  write_csv(path.string(), t);
  const CsvTable back = read_csv(path.string());
  CHECK(std::strtod(back.rows[0][4].c_str(), nullptr) == mse);
  CHECK(std::strtod(back.rows[0][5].c_str(), nullptr) == cost);
  CHECK(back.rows[0][0] == "SL");
  std::filesystem::remove(path);
}

TEST_CASE("rates and estimate configs parse") {
  Json rates;
  rates["variant"] = "f2";
  rates["L_list"] = Json::array({5, 6});
  rates["l_star"] = 4;
  rates["c0"] = 0.5;
  rates["repetitions"] = 8;
  rates["l_ref"] = 8;
  rates["ref_repetitions"] = 4;
  rates["ref_particles"] = 32;
  rates["seed"] = 77;
  const RateExperimentConfig rc = rates_config_from_json(rates);
  CHECK(rc.variant == VariantId::Deterministic);
  CHECK(rc.data_level() == 10);

  Json est;
  est["family"] = "scalar-linear";
  est["theta_star"] = Json::array({-2.0});
  est["theta0"] = Json::array({-1.0});
  est["M"] = 10;
  est["L"] = 5;
  est["l_star"] = 4;
  est["c0"] = 1.0;
  est["seed"] = 3;
  const EstimateConfig ec = estimate_config_from_json(est);
  CHECK(ec.spsa.ml.L == 5);
  CHECK(ec.spsa.ml.N.size() == 2);
  CHECK(ec.data_level() == 7);
  CHECK(ec.spsa.schedule.b_at(10) == doctest::Approx(std::pow(10.0, -0.1)));

  est["alpha"] = Json::array({0.3});  // outside (0.5, 1]
  CHECK_THROWS_AS(estimate_config_from_json(est), ConfigError);
}
