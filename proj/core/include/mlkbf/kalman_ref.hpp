#pragma once

#include <cstdint>
#include <vector>

#include "mlkbf/enkbf.hpp"
#include "mlkbf/model.hpp"
#include "mlkbf/paths.hpp"

namespace mlkbf {

/// Conditional mean and covariance of the exact discretized Kalman-Bucy
/// filter at step k of a level-l grid.
struct KBFState {
  Vector m;
  Matrix P;
  std::int64_t k = 0;
  int level = 0;
};

/// A P + P A' - P S P + Q.
Matrix riccati_drift(const Matrix& P, const ModelSpec& model);

/// One Euler step of the mean/covariance recursions:
///   m' = m + A m d + P C' R^{-1} (dY - C m d)
///   P' = P + Ricc(P) d + (A - P S) P (A' - S P) d^2, then symmetrized.
/// Any |P'_ij| above `blowup_bound` raises CovarianceBlowup.
KBFState kbf_step(const KBFState& state, const Vector& dY, const ModelSpec& model,
                  double blowup_bound = 1e6);

struct KbfRunResult {
  Matrix means;                // dx x (steps + 1), starting at M0
  std::vector<Matrix> covs;    // steps + 1 matrices, starting at P0
};

/// Exact filter along the observation record coarsened to level l.
KbfRunResult kbf_run(const ModelSpec& model, const IncrementPath& obs, int l,
                     double blowup_bound = 1e6);

/// Discretized log normalizing constant evaluated along exact means:
/// sum_k <C m_k, R^{-1} dY_k> - (delta/2) <m_k, S m_k>.
double exact_log_nc(const Matrix& means, const IncrementPath& obs, const ModelSpec& model, int l);

struct OracleRunResult {
  Matrix mean_path;       // sample mean of the oracle particles, dx x (steps+1)
  double log_nc = 0.0;    // accumulated from the oracle sample mean
  Ensemble final_particles;
  std::vector<Matrix> particle_path;  // filled only when requested
};

/// The conditionally-i.i.d. particle system: vanilla updates whose gain
/// uses the exact covariance recursion, so particles stay i.i.d.
/// N(m_k, P_k) given the observations. N = 1 is allowed (no sample
/// covariance is ever formed).
OracleRunResult iid_oracle_run(const ModelSpec& model, const IncrementPath& obs, int l, int N,
                               const RunContext& ctx, bool store_particle_path = false);

}  // namespace mlkbf
