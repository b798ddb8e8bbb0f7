#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "mlkbf/harness.hpp"
#include "mlkbf/model.hpp"
#include "mlkbf/spsa.hpp"

namespace mlkbf {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

/// Full model serialization: kind, drift parameters and all matrices, so a
/// data directory is self-describing (random observation matrices included).
Json model_to_json(const ModelSpec& model);
ModelSpec model_from_json(const Json& j);

/// Builds a model from a config node: either {"preset": "ou5"|"l63"|"l96"}
/// (possibly with overrides such as "theta") or an explicit description
/// with "kind" and matrix literals. `seed` feeds the randomly drawn
/// observation matrices of the presets that have one.
ModelSpec model_from_config(const Json& node, std::uint64_t seed);

RateExperimentConfig rates_config_from_json(const Json& node);

struct EstimateConfig {
  ModelFamily family;
  Vector theta_star;
  SPSAConfig spsa;
  int l_data = -1;  // default ml.L + 2

  int data_level() const { return l_data >= 0 ? l_data : spsa.ml.L + 2; }
};

EstimateConfig estimate_config_from_json(const Json& node);

Json load_json_file(const std::string& path);

}  // namespace mlkbf
