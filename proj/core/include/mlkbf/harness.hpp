#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mlkbf/enkbf.hpp"
#include "mlkbf/ml_nc.hpp"
#include "mlkbf/model.hpp"
#include "mlkbf/paths.hpp"

namespace mlkbf {

/// Worker count: MLKBF_THREADS when set, otherwise hardware concurrency.
int worker_count();

/// Runs fn(0..n-1) on a pool of worker_count() threads. Results must be
/// written to per-index slots; combined with fixed-order reductions this
/// keeps outputs bit-identical for any worker count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

/// Kahan-compensated left-to-right sum.
double kahan_sum(std::span<const double> xs);

double kahan_mean(std::span<const double> xs);

/// Mean of squared deviations from `center`, fixed-order compensated.
double mean_squared_deviation(std::span<const double> xs, double center);

/// Least-squares line through (log x, log y). Every coordinate must be
/// positive. Returned slope is base-independent; the intercept is in
/// natural logs.
std::pair<double, double> fit_loglog_slope(std::span<const std::pair<double, double>> points);

/// Rate-verification sweep configuration. The observation record is
/// simulated once at l_data (default l_ref + 2) and shared by the
/// reference, single-level and multilevel estimators.
struct RateExperimentConfig {
  VariantId variant = VariantId::Vanilla;
  std::vector<int> L_list;
  int l_star = 0;
  double c0 = 0.5;
  int repetitions = 0;      // R
  int l_ref = 0;
  int ref_repetitions = 0;  // R_ref
  int ref_particles = 0;    // N_ref
  int horizon = 1;
  std::uint64_t seed = 0;
  int l_data = -1;

  int data_level() const { return l_data >= 0 ? l_data : l_ref + 2; }
  void validate() const;
};

struct ExperimentRecord {
  std::string estimator;  // "SL" or "ML"
  VariantId variant = VariantId::Vanilla;
  int L = 0;
  double mse = 0.0;
  double cost = 0.0;
  int repetitions = 0;
};

/// Mean of R_ref independent single-level log-NC runs at l_ref on the
/// shared observation record.
double reference_value(const ModelSpec& model, const IncrementPath& obs, int l_ref,
                       int ref_repetitions, int ref_particles, VariantId variant,
                       std::uint64_t seed);

/// For each target level L: R repetitions of the single-level estimator
/// (N = N_L from sample_allocation) and of the multilevel estimator
/// (l_star..L allocation); MSE against reference_value. Costs follow the
/// fine-step convention: N_L 2^L and sum_l N_l 2^l (times the horizon).
std::vector<ExperimentRecord> run_rate_experiment(const RateExperimentConfig& config,
                                                  const ModelSpec& model);

/// Same sweep on a caller-provided observation record (shared across
/// variants when comparing them).
std::vector<ExperimentRecord> run_rate_experiment(const RateExperimentConfig& config,
                                                  const ModelSpec& model,
                                                  const IncrementPath& obs);

}  // namespace mlkbf
