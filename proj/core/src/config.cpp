#include "mlkbf/config.hpp"

#include <fstream>

#include "mlkbf/errors.hpp"

namespace mlkbf {

Json matrix_to_json(const Matrix& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("matrix literal must be a non-empty array");
  const size_t rows = j.size();
  const size_t cols = j[0].size();
  Matrix M(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw ConfigError("ragged matrix literal");
    for (size_t k = 0; k < cols; ++k) M(Eigen::Index(i), Eigen::Index(k)) = j[i][k].get<double>();
  }
  return M;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("vector literal must be an array");
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[Eigen::Index(i)] = j[i].get<double>();
  return v;
}

Json model_to_json(const ModelSpec& model) {
  Json j;
  j["dx"] = model.dx;
  j["dy"] = model.dy;
  if (model.is_linear()) {
    j["kind"] = "linear";
    j["A"] = matrix_to_json(model.A());
  } else {
    const auto& nl = std::get<NonlinearDrift>(model.drift);
    j["kind"] = nl.name;
    j["theta"] = vector_to_json(nl.theta.values);
  }
  j["C"] = matrix_to_json(model.C);
  j["Q_sqrt"] = matrix_to_json(model.Q_sqrt);
  j["R_sqrt"] = matrix_to_json(model.R_sqrt);
  j["M0"] = vector_to_json(model.M0);
  j["P0"] = matrix_to_json(model.P0);
  return j;
}

ModelSpec model_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const Matrix C = matrix_from_json(j.at("C"));
  const Matrix Q_sqrt = matrix_from_json(j.at("Q_sqrt"));
  const Matrix R_sqrt = matrix_from_json(j.at("R_sqrt"));
  const Vector M0 = vector_from_json(j.at("M0"));
  const Matrix P0 = matrix_from_json(j.at("P0"));
  if (kind == "linear") {
    return build_linear_model(matrix_from_json(j.at("A")), C, Q_sqrt, R_sqrt, M0, P0);
  }
  const Vector theta = vector_from_json(j.at("theta"));
  NonlinearDrift drift;
  drift.name = kind;
  if (kind == "lorenz63") {
    drift.theta = ThetaVector{theta, {"theta1", "theta2", "theta3"}};
    Vector th = theta;
    drift.f = [th](const Vector& x) { return lorenz63_drift(x, th); };
  } else if (kind == "lorenz96") {
    drift.theta = ThetaVector{theta, {"theta"}};
    const double force = theta[0];
    drift.f = [force](const Vector& x) { return lorenz96_drift(x, force); };
  } else {
    throw ConfigError("unknown model kind: " + kind);
  }
  return build_nonlinear_model(std::move(drift), C, Q_sqrt, R_sqrt, M0, P0);
}

ModelSpec model_from_config(const Json& node, std::uint64_t seed) {
  if (node.is_string()) {
    const std::string preset = node.get<std::string>();
    if (preset == "ou5") return make_ou5_model(seed);
    if (preset == "ou1") return make_scalar_ou_model();
    if (preset == "l63") {
      Vector theta(3);
      theta << 10.0, 28.0, 8.0 / 3.0;
      return make_lorenz63_model(theta);
    }
    if (preset == "l96") return make_lorenz96_model(8.0);
    if (preset == "l96-gaussian") return make_lorenz96_model(8.0, true);
    throw ConfigError("unknown model preset: " + preset);
  }
  if (node.contains("preset")) {
    Json inner = node.at("preset");
    if (node.contains("theta") || node.contains("dx")) {
      const std::string preset = inner.get<std::string>();
      const Vector theta = node.contains("theta") ? vector_from_json(node.at("theta"))
                                                  : Vector::Constant(1, 8.0);
      if (preset == "l63") return make_lorenz63_model(theta);
      const int dx = node.value("dx", 40);
      if (preset == "l96") return make_lorenz96_model(theta[0], false, dx);
      if (preset == "l96-gaussian") return make_lorenz96_model(theta[0], true, dx);
      throw ConfigError("theta/dx override unsupported for preset " + preset);
    }
    return model_from_config(inner, seed);
  }
  if (node.contains("kind") && node.at("kind") == "linear" && node.contains("C") &&
      node.at("C").is_string()) {
    // "C": "random-uniform" draws the observation matrix from the run seed.
    Json resolved = node;
    const int dy = node.contains("dy") ? node.at("dy").get<int>()
                                       : int(node.at("A").size());
    const int dx = int(node.at("A").size());
    resolved["C"] = matrix_to_json(random_uniform_matrix(dy, dx, seed));
    return model_from_json(resolved);
  }
  return model_from_json(node);
}

RateExperimentConfig rates_config_from_json(const Json& node) {
  RateExperimentConfig cfg;
  cfg.variant = variant_from_string(node.value("variant", "f1"));
  for (const auto& L : node.at("L_list")) cfg.L_list.push_back(L.get<int>());
  cfg.l_star = node.at("l_star").get<int>();
  cfg.c0 = node.at("c0").get<double>();
  cfg.repetitions = node.at("repetitions").get<int>();
  cfg.l_ref = node.at("l_ref").get<int>();
  cfg.ref_repetitions = node.at("ref_repetitions").get<int>();
  cfg.ref_particles = node.at("ref_particles").get<int>();
  cfg.horizon = node.value("horizon", 1);
  cfg.seed = node.at("seed").get<std::uint64_t>();
  cfg.l_data = node.value("l_data", -1);
  cfg.validate();
  return cfg;
}

EstimateConfig estimate_config_from_json(const Json& node) {
  EstimateConfig cfg;
  const std::uint64_t seed = node.at("seed").get<std::uint64_t>();
  const std::uint64_t c_seed = node.value("c_seed", seed);
  cfg.family = family_from_name(node.at("family").get<std::string>(), c_seed);
  cfg.theta_star = vector_from_json(node.at("theta_star"));
  if (cfg.theta_star.size() != cfg.family.d_theta) {
    throw ConfigError("theta_star length does not match the family");
  }

  SPSAConfig& s = cfg.spsa;
  s.theta0.values = vector_from_json(node.at("theta0"));
  s.theta0.names.assign(size_t(cfg.family.d_theta), "theta");
  s.seed = seed;
  s.iterations = node.at("M").get<int>();
  s.common_random_numbers = node.value("crn", true);

  const int L = node.at("L").get<int>();
  const int l_star = node.at("l_star").get<int>();
  std::vector<int> alloc;
  if (node.contains("N")) {
    for (const auto& n : node.at("N")) alloc.push_back(n.get<int>());
  } else {
    alloc = sample_allocation(node.at("c0").get<double>(), l_star, L);
  }
  s.ml = MLConfig{l_star, L, alloc, variant_from_string(node.value("variant", "f1"))};

  GainSchedule sched;
  const double beta = node.value("beta", 0.1);
  sched.b = PowerRule{1.0, 0, 1.0, beta};
  const double a0 = node.value("a0", 0.02);
  const int t0 = node.value("t0", 50);
  std::vector<double> alpha, a_scale;
  if (node.contains("alpha")) {
    for (const auto& a : node.at("alpha")) alpha.push_back(a.get<double>());
  } else {
    alpha.push_back(0.75);
  }
  if (node.contains("a_scale")) {
    for (const auto& a : node.at("a_scale")) a_scale.push_back(a.get<double>());
  } else {
    a_scale.assign(alpha.size(), 1.0);
  }
  if (a_scale.size() != alpha.size()) throw ConfigError("a_scale and alpha lengths differ");
  for (size_t k = 0; k < alpha.size(); ++k) {
    sched.a.push_back(PowerRule{a0, t0, a_scale[k], alpha[k]});
  }
  s.schedule = std::move(sched);

  cfg.l_data = node.value("l_data", -1);
  s.validate();
  if (s.theta0.size() != cfg.family.d_theta) {
    throw ConfigError("theta0 length does not match the family");
  }
  return cfg;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Json j;
  in >> j;
  return j;
}

}  // namespace mlkbf
