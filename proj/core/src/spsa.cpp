#include "mlkbf/spsa.hpp"

#include <cmath>

#include "mlkbf/errors.hpp"

namespace mlkbf {

double PowerRule::at(int t) const {
  if (t < 1) throw DimensionMismatch("gain schedules start at t = 1");
  if (t <= threshold) return constant;
  return scale * std::pow(double(t), -exponent);
}

void GainSchedule::validate(int d_theta) const {
  if (a.empty()) throw ConfigError("gain schedule needs at least one a-rule");
  if (int(a.size()) != 1 && int(a.size()) != d_theta) {
    throw ConfigError("a-schedule must be shared or one rule per coordinate");
  }
  if (!(b.exponent > 0.0 && b.exponent < 0.5)) {
    throw ConfigError("b exponent must lie in (0, 0.5)");
  }
  if (!(b.scale > 0.0) || (b.threshold > 0 && !(b.constant > 0.0))) {
    throw ConfigError("b gains must be positive");
  }
  for (const auto& rule : a) {
    if (!(rule.exponent > 0.5 && rule.exponent <= 1.0)) {
      throw ConfigError("a exponents must lie in (0.5, 1]");
    }
    if (!(rule.scale > 0.0) || (rule.threshold > 0 && !(rule.constant > 0.0))) {
      throw ConfigError("a gains must be positive");
    }
    if (!(2.0 * (rule.exponent - b.exponent) > 1.0)) {
      throw ConfigError("need 2 (alpha - beta) > 1 for the gain pair");
    }
  }
}

double GainSchedule::a_at(int t, int coord) const {
  const auto& rule = a.size() == 1 ? a[0] : a.at(size_t(coord));
  return rule.at(t);
}

double GainSchedule::b_at(int t) const { return b.at(t); }

std::pair<double, double> gain_at(const GainSchedule& schedule, int t, int coord) {
  return {schedule.a_at(t, coord), schedule.b_at(t)};
}

GainSchedule default_schedule_linear(VariantId variant) {
  GainSchedule s;
  s.b = PowerRule{1.0, 0, 1.0, 0.1};
  if (variant == VariantId::DeterministicTransport) {
    s.a = {PowerRule{0.02, 500, 1.0, 0.88}, PowerRule{0.02, 500, 0.2, 0.95}};
  } else {
    s.a = {PowerRule{0.02, 50, 1.0, 0.75}, PowerRule{0.02, 50, 1.0, 0.82}};
  }
  return s;
}

GainSchedule default_schedule_lorenz63() {
  GainSchedule s;
  s.b = PowerRule{1.0, 0, 1.0, 0.1};
  s.a = {PowerRule{0.01, 100, 1.0, 0.75}};
  return s;
}

GainSchedule default_schedule_lorenz96() {
  GainSchedule s;
  s.b = PowerRule{1.0, 0, 1.0, 0.1};
  s.a = {PowerRule{0.03, 50, 1.0, 0.75}};
  return s;
}

Vector sample_perturbation(int d_theta, const RandomStream& stream, std::uint64_t first_index) {
  if (d_theta < 1) throw DimensionMismatch("sample_perturbation needs d_theta >= 1");
  Vector psi(d_theta);
  for (int k = 0; k < d_theta; ++k) {
    psi[k] = stream.sign(first_index + std::uint64_t(k));
  }
  return psi;
}

Vector spsa_update(const Vector& theta, const Vector& a, double b, const Vector& psi,
                   double u_plus, double u_minus) {
  if (theta.size() != a.size() || theta.size() != psi.size()) {
    throw DimensionMismatch("spsa_update: theta, a and psi must have equal length");
  }
  if (!(b > 0.0)) throw DimensionMismatch("spsa_update: b must be positive");
  Vector out = theta;
  const double diff = u_plus - u_minus;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    out[k] += a[k] / (2.0 * b * psi[k]) * diff;
  }
  return out;
}

ModelFamily scalar_linear_family() {
  ModelFamily fam;
  fam.d_theta = 1;
  fam.name = "scalar-linear";
  fam.build = [](const Vector& theta) {
    Matrix A(1, 1), C(1, 1), Q(1, 1), R(1, 1), P0(1, 1);
    A << theta[0];
    C << 1.0;
    Q << 1.0;
    R << 0.15;
    P0 << 1.0;
    Vector M0 = Vector::Zero(1);
    return build_linear_model(A, C, Q, R, M0, P0);
  };
  return fam;
}

ModelFamily linear2d_family(std::uint64_t c_seed) {
  ModelFamily fam;
  fam.d_theta = 2;
  fam.name = "linear2d";
  fam.build = [c_seed](const Vector& theta) { return make_linear2d_model(theta, c_seed); };
  return fam;
}

ModelFamily lorenz63_family() {
  ModelFamily fam;
  fam.d_theta = 3;
  fam.name = "lorenz63";
  fam.build = [](const Vector& theta) { return make_lorenz63_model(theta); };
  return fam;
}

ModelFamily lorenz96_family(bool gaussian_init) {
  ModelFamily fam;
  fam.d_theta = 1;
  fam.name = "lorenz96";
  fam.build = [gaussian_init](const Vector& theta) {
    return make_lorenz96_model(theta[0], gaussian_init);
  };
  return fam;
}

ModelFamily family_from_name(const std::string& name, std::uint64_t c_seed) {
  if (name == "scalar-linear") return scalar_linear_family();
  if (name == "linear2d") return linear2d_family(c_seed);
  if (name == "lorenz63") return lorenz63_family();
  if (name == "lorenz96") return lorenz96_family();
  if (name == "lorenz96-gaussian") return lorenz96_family(true);
  throw ConfigError("unknown model family: " + name);
}

void SPSAConfig::validate() const {
  if (iterations < 1) throw ConfigError("spsa needs at least one iteration");
  ml.validate();
  schedule.validate(theta0.size());
}

namespace {

std::vector<Matrix> partition_carrier(const Matrix& carrier, const std::vector<int>& counts) {
  std::vector<Matrix> blocks;
  blocks.reserve(counts.size());
  int offset = 0;
  for (int n : counts) {
    blocks.push_back(carrier.middleCols(offset, n));
    offset += n;
  }
  return blocks;
}

}  // namespace

SpsaRunResult rml_spsa_run(const ModelFamily& family, const IncrementPath& obs,
                           const SPSAConfig& config) {
  config.validate();
  if (family.d_theta != config.theta0.size()) {
    throw DimensionMismatch("theta0 length must match the model family");
  }
  const int M = config.iterations;
  if (obs.horizon < M) throw DimensionMismatch("observation record shorter than the iteration count");
  if (obs.level < config.ml.L) throw LevelAboveSource("observation record coarser than level L");
  const int d = family.d_theta;

  int n_total = 0;
  for (int n : config.ml.N) n_total += n;

  SpsaRunResult out;
  out.theta_path.resize(d, M + 1);
  out.a_used.resize(d, M);
  out.u_plus.reserve(size_t(M));
  out.u_minus.reserve(size_t(M));
  out.b_used.reserve(size_t(M));

  Vector theta = config.theta0.values;
  out.theta_path.col(0) = theta;

  // Carrier particles, partitioned into per-level blocks each iteration.
  const ModelSpec model0 = family.build(theta);
  Matrix carrier =
      sample_initial_ensemble(model0, n_total, config.ml.L, {config.seed, 0}, Purpose::CarrierInit);

  const std::uint64_t minus_seed =
      config.common_random_numbers ? config.seed : (config.seed ^ 0x5851F42D4C957F2Dull);

  int t = 0;
  for (; t < M; ++t) {
    const RandomStream psi_stream(config.seed, {Purpose::Perturbation, 0, 0, std::uint32_t(t)});
    const Vector psi = sample_perturbation(d, psi_stream);
    const double b = config.schedule.b_at(t + 1);
    Vector a(d);
    for (int k = 0; k < d; ++k) a[k] = config.schedule.a_at(t + 1, k);

    const IncrementPath window = obs.window(t);
    const std::vector<Matrix> inits = partition_carrier(carrier, config.ml.N);

    const Vector theta_plus = theta + b * psi;
    const Vector theta_minus = theta - b * psi;
    const double u_plus = ml_log_nc(family.build(theta_plus), window, config.ml,
                                    {config.seed, std::uint32_t(t)}, &inits)
                              .u_ml;
    const double u_minus = ml_log_nc(family.build(theta_minus), window, config.ml,
                                     {minus_seed, std::uint32_t(t)}, &inits)
                               .u_ml;

    theta = spsa_update(theta, a, b, psi, u_plus, u_minus);

    out.u_plus.push_back(u_plus);
    out.u_minus.push_back(u_minus);
    out.b_used.push_back(b);
    out.a_used.col(t) = a;

    if (!theta.allFinite()) {
      out.diverged = true;
      break;
    }

    // Advance the carrier one unit at level L under the updated parameter.
    StreamNoise carrier_noise(config.seed, config.ml.L, std::uint32_t(t), Purpose::CarrierW,
                              Purpose::CarrierV);
    EnkbfRunResult run = enkbf_run(family.build(theta), window, config.ml.L, n_total,
                                   config.carrier_variant, {config.seed, std::uint32_t(t)},
                                   &carrier, &carrier_noise);
    carrier = std::move(run.final_ensemble.particles);

    out.theta_path.col(t + 1) = theta;
  }

  out.completed = t;
  if (out.diverged) {
    // Trajectory up to the last finite iterate; the failed update's inputs
    // stay recorded in u_plus/u_minus/a_used/b_used.
    out.theta_path.conservativeResize(d, t + 1);
    out.a_used.conservativeResize(d, t + 1);
  }
  return out;
}

}  // namespace mlkbf
