#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "mlkbf/model.hpp"
#include "mlkbf/paths.hpp"

namespace mlkbf {

/// The three discretized ensemble Kalman-Bucy update rules.
enum class VariantId {
  Vanilla,                 // perturbed-observation innovation, W and V noise
  Deterministic,           // midpoint innovation, W noise only
  DeterministicTransport,  // midpoint innovation + covariance transport drift, no noise
};

VariantId variant_from_string(std::string_view s);
std::string to_string(VariantId v);

/// N particles of dimension dx at a discretization level; one column per
/// particle. N >= 2 so the 1/(N-1) covariance normalizer exists.
struct Ensemble {
  int level = 0;
  Matrix particles;  // dx x N

  int n() const { return int(particles.cols()); }
  int dim() const { return int(particles.rows()); }
};

Vector ensemble_mean(const Ensemble& ens);

/// Mean over particle columns, anchored at the first particle so that a
/// collapsed ensemble has an exact mean. Shared by every filter loop.
Vector particle_mean(const Matrix& particles);

/// Unbiased sample covariance (1/(N-1)) sum (xi - m)(xi - m)'.
Matrix ensemble_cov(const Ensemble& ens);

/// <C m, R^{-1} dY> - (delta/2) <m, S m>: one term of the discretized
/// log normalizing constant.
double log_nc_increment(const Vector& m, const Vector& dY, const ModelSpec& model, double delta);

/// Running log normalizing constant, additive over contiguous windows.
struct LogNCAccumulator {
  double u = 0.0;
  std::int64_t steps = 0;

  void add(double increment) {
    u += increment;
    ++steps;
  }
};

struct StepNoise {
  Matrix dW;  // dx x N
  Matrix dV;  // dy x N (ignored by the deterministic variants)
};

/// Per-step Brownian-increment supplier. Implementations are pure in
/// (construction arguments, step index) so steps can be produced in any
/// order and runs are reproducible regardless of scheduling. A null output
/// pointer means the variant does not consume that driver.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual void fill(std::int64_t step, Matrix* dW, Matrix* dV) = 0;
};

/// Fresh level-l drivers: particle i reads its own labelled streams and
/// step k consumes draw indices [k*dim, (k+1)*dim).
class StreamNoise final : public NoiseSource {
 public:
  StreamNoise(std::uint64_t seed, int level, std::uint32_t rep,
              Purpose w_purpose = Purpose::FilterW, Purpose v_purpose = Purpose::FilterV);
  void fill(std::int64_t step, Matrix* dW, Matrix* dV) override;

 private:
  std::uint64_t seed_;
  int level_;
  std::uint32_t rep_;
  Purpose w_purpose_, v_purpose_;
  double delta_;
};

/// Coarse view of level-l drivers: coarse step k emits the pairwise sum of
/// fine steps 2k and 2k+1, bit-exactly reproducing the coupled coarse leg.
class SummedNoise final : public NoiseSource {
 public:
  SummedNoise(std::uint64_t seed, int fine_level, std::uint32_t rep,
              Purpose w_purpose = Purpose::FilterW, Purpose v_purpose = Purpose::FilterV);
  void fill(std::int64_t step, Matrix* dW, Matrix* dV) override;

 private:
  StreamNoise fine_;
  Matrix w_buf_, v_buf_;
};

class ZeroNoise final : public NoiseSource {
 public:
  void fill(std::int64_t, Matrix* dW, Matrix* dV) override {
    if (dW) dW->setZero();
    if (dV) dV->setZero();
  }
};

/// True when the variant consumes the signal-noise (W) or the
/// perturbed-observation (V) driver.
bool variant_uses_w(VariantId v);
bool variant_uses_v(VariantId v);

/// One explicit Euler update. Sample mean/covariance are taken from the
/// input ensemble; `noise` must hold dW (dx x N) and dV (dy x N) increments
/// already scaled to the step size.
Ensemble enkbf_step(const Ensemble& ens, const Vector& dY, const ModelSpec& model,
                    VariantId variant, const StepNoise& noise);

/// Step with the mean precomputed by the caller (the run loop reuses it for
/// the log-NC increment). Updates `particles` in place.
void enkbf_step_inplace(Matrix& particles, const Vector& mean, const Vector& dY,
                        const ModelSpec& model, VariantId variant, const Matrix& dW,
                        const Matrix& dV, double delta);

/// Seed/repetition coordinates of one filter run; all randomness below a
/// run is a pure function of these plus the stream labels.
struct RunContext {
  std::uint64_t seed = 0;
  std::uint32_t rep = 0;
};

/// N i.i.d. draws from N(M0, P0), labelled per (level, particle, rep).
Matrix sample_initial_ensemble(const ModelSpec& model, int N, int level, const RunContext& ctx,
                               Purpose purpose = Purpose::InitEnsemble);

struct EnkbfRunResult {
  Matrix mean_path;  // dx x (steps + 1); column k is the pre-update mean at step k
  LogNCAccumulator log_nc;
  Ensemble final_ensemble;
  double cost = 0.0;  // particle-steps: N * horizon * 2^l
};

/// Runs the chosen variant over the whole observation record coarsened to
/// level l, accumulating the log-NC from each step's input-ensemble mean.
/// `init` overrides the N(M0, P0) initial draw; `noise` overrides the
/// default fresh level-l drivers.
EnkbfRunResult enkbf_run(const ModelSpec& model, const IncrementPath& obs, int l, int N,
                         VariantId variant, const RunContext& ctx, const Matrix* init = nullptr,
                         NoiseSource* noise = nullptr);

}  // namespace mlkbf
