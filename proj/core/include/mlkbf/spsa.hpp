#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlkbf/ml_nc.hpp"
#include "mlkbf/model.hpp"
#include "mlkbf/paths.hpp"

namespace mlkbf {

/// Piecewise power gain: `constant` while t <= threshold, then
/// scale * t^{-exponent}. Positive everywhere by construction.
struct PowerRule {
  double constant = 0.02;
  int threshold = 0;
  double scale = 1.0;
  double exponent = 0.75;

  double at(int t) const;
};

/// Step-size schedules: one a-rule per parameter coordinate (or a single
/// shared rule) and one scalar b-rule for the perturbation magnitude.
/// Construction enforces the gain family the convergence conditions hold
/// for: a-exponents in (0.5, 1], b-exponent in (0, 0.5), and
/// 2 (alpha - beta) > 1 for every coordinate.
struct GainSchedule {
  std::vector<PowerRule> a;
  PowerRule b;

  void validate(int d_theta) const;
  double a_at(int t, int coord) const;
  double b_at(int t) const;
};

/// (a_t, b_t) for iteration t >= 1 (coordinate `coord` of the a-schedule).
std::pair<double, double> gain_at(const GainSchedule& schedule, int t, int coord = 0);

// Figure-caption defaults per model family / variant.
GainSchedule default_schedule_linear(VariantId variant);
GainSchedule default_schedule_lorenz63();
GainSchedule default_schedule_lorenz96();

/// d_theta fair signs in {-1, +1}, drawn from `stream` starting at
/// `first_index`.
Vector sample_perturbation(int d_theta, const RandomStream& stream, std::uint64_t first_index = 0);

/// theta'(k) = theta(k) + a(k) / (2 b psi(k)) * (u_plus - u_minus).
Vector spsa_update(const Vector& theta, const Vector& a, double b, const Vector& psi,
                   double u_plus, double u_minus);

/// A parametric model: theta |-> ModelSpec with fixed observation geometry
/// and initial law.
struct ModelFamily {
  int d_theta = 0;
  std::string name;
  std::function<ModelSpec(const Vector&)> build;
};

/// d = 1, A = theta, C = 1, R^{1/2} = 0.15, Q^{1/2} = 1, X0 ~ N(0, 1).
ModelFamily scalar_linear_family();

/// d = 2, A = th1 Id, Q^{1/2} = th2 tridiag; C random from c_seed.
ModelFamily linear2d_family(std::uint64_t c_seed);

ModelFamily lorenz63_family();

/// `gaussian_init` spreads X0 as N(8, 0.05 Id) (required by the transport
/// variant).
ModelFamily lorenz96_family(bool gaussian_init = false);

ModelFamily family_from_name(const std::string& name, std::uint64_t c_seed);

struct SPSAConfig {
  ThetaVector theta0;
  GainSchedule schedule;
  int iterations = 0;  // M
  MLConfig ml;
  std::uint64_t seed = 0;
  bool common_random_numbers = true;  // same drivers for the theta+ and theta- runs
  VariantId carrier_variant = VariantId::Vanilla;

  void validate() const;
};

struct SpsaRunResult {
  Matrix theta_path;  // d_theta x (completed + 1), theta_0 first
  std::vector<double> u_plus;
  std::vector<double> u_minus;
  Matrix a_used;  // d_theta x completed
  std::vector<double> b_used;
  int completed = 0;
  bool diverged = false;
};

/// Online RML-SPSA over unit-time windows of `obs`: per iteration, two
/// multilevel NC evaluations at theta +- b psi from the same initial
/// ensembles (carried between windows by a level-L run under the updated
/// parameter). `obs` must live at a level >= ml.L with horizon >= iterations.
SpsaRunResult rml_spsa_run(const ModelFamily& family, const IncrementPath& obs,
                           const SPSAConfig& config);

}  // namespace mlkbf
