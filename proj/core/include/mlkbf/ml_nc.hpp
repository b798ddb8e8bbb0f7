#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mlkbf/enkbf.hpp"
#include "mlkbf/model.hpp"
#include "mlkbf/paths.hpp"

namespace mlkbf {

/// Level range and per-level particle counts of a multilevel run.
/// l_star == L is allowed and collapses the estimator to the single level.
struct MLConfig {
  int l_star = 0;
  int L = 0;
  std::vector<int> N;  // N[l - l_star], each >= 2
  VariantId variant = VariantId::Vanilla;

  int levels() const { return L - l_star + 1; }
  void validate() const;
};

/// N_l = floor(C0 * 2^{2L-l} * (L - l_star + 1)) for l = l_star..L.
/// Throws AllocationTooSmall when any count drops below 2.
std::vector<int> sample_allocation(double C0, int l_star, int L);

/// Result of one coupled fine/coarse pair at level l: both legs share the
/// Brownian drivers (coarse increments are pairwise sums of fine) and the
/// observation record; each accumulates its own log-NC from its own sample
/// mean. cost counts fine and coarse steps: N (2^l + 2^{l-1}) per time unit.
struct CoupledRunOutput {
  double u_fine = 0.0;
  double u_coarse = 0.0;
  double cost = 0.0;
  Ensemble final_fine;
  Ensemble final_coarse;
};

CoupledRunOutput coupled_run(const ModelSpec& model, const IncrementPath& obs, int l, int N,
                             VariantId variant, const RunContext& ctx,
                             const Matrix* init = nullptr);

struct MlLevelRow {
  int level = 0;
  double u_fine = 0.0;
  double u_coarse = 0.0;  // NaN on the base level
  double contribution = 0.0;
  double cost = 0.0;  // fine + coarse particle-steps of this level
};

struct MlLogNcResult {
  double u_ml = 0.0;
  std::vector<MlLevelRow> per_level;
  double cost_fine_steps = 0.0;  // sum_l N_l 2^l T, the plotting convention
  double cost_total = 0.0;       // includes the coarse legs of coupled pairs
  std::vector<Ensemble> final_fine;  // final fine-leg ensemble per level
};

/// Multilevel log normalizing constant: a single-level run at l_star plus
/// independent coupled increments at l_star+1..L. `init_per_level`, when
/// given, supplies the initial ensemble of each level (levels() blocks);
/// otherwise each level draws fresh i.i.d. N(M0, P0) particles from its own
/// stream.
MlLogNcResult ml_log_nc(const ModelSpec& model, const IncrementPath& obs, const MLConfig& config,
                        const RunContext& ctx,
                        const std::vector<Matrix>* init_per_level = nullptr);

/// Multilevel estimate of the filter expectation of `phi` at the final time.
double ml_filter_estimate(const ModelSpec& model, const IncrementPath& obs, const MLConfig& config,
                          const RunContext& ctx, const std::function<double(const Vector&)>& phi);

}  // namespace mlkbf
