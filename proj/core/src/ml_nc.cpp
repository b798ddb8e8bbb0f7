#include "mlkbf/ml_nc.hpp"

#include <cmath>
#include <limits>

#include "mlkbf/errors.hpp"

namespace mlkbf {

void MLConfig::validate() const {
  if (l_star < 0) throw DimensionMismatch("l_star must be nonnegative");
  if (L < l_star) throw DimensionMismatch("L must be >= l_star");
  if (int(N.size()) != levels()) throw DimensionMismatch("need one particle count per level");
  for (int n : N) {
    if (n < 2) throw TooFewParticles("every level needs N >= 2");
  }
}

std::vector<int> sample_allocation(double C0, int l_star, int L) {
  if (!(C0 > 0.0)) throw AllocationTooSmall("C0 must be positive");
  if (l_star > L) throw DimensionMismatch("l_star must not exceed L");
  std::vector<int> out;
  out.reserve(size_t(L - l_star + 1));
  for (int l = l_star; l <= L; ++l) {
    const double n = std::floor(C0 * std::ldexp(1.0, 2 * L - l) * double(L - l_star + 1));
    if (!(n >= 2.0)) {
      throw AllocationTooSmall("sample_allocation: N_" + std::to_string(l) + " below 2");
    }
    out.push_back(int(n));
  }
  return out;
}

CoupledRunOutput coupled_run(const ModelSpec& model, const IncrementPath& obs, int l, int N,
                             VariantId variant, const RunContext& ctx, const Matrix* init) {
  if (l < 1) throw DimensionMismatch("coupled_run needs l >= 1");
  if (N < 2) throw TooFewParticles("coupled_run needs N >= 2");
  const IncrementPath obs_fine = coarsen_increments(obs, l);
  const IncrementPath obs_coarse = coarsen_increments(obs, l - 1);
  const double delta_f = level_delta(l);
  const double delta_c = level_delta(l - 1);
  const std::int64_t coarse_steps = obs_coarse.steps();

  Matrix Xf = init ? *init : sample_initial_ensemble(model, N, l, ctx);
  if (Xf.rows() != model.dx || Xf.cols() != N) {
    throw DimensionMismatch("coupled_run: init ensemble has wrong shape");
  }
  Matrix Xc = Xf;  // identical initial ensembles

  StreamNoise fine_noise(ctx.seed, l, ctx.rep);
  SummedNoise coarse_noise(ctx.seed, l, ctx.rep);

  const bool use_w = variant_uses_w(variant);
  const bool use_v = variant_uses_v(variant);
  Matrix dW, dV;
  if (use_w) dW.resize(model.dx, N);
  if (use_v) dV.resize(model.dy, N);

  CoupledRunOutput out;
  for (std::int64_t kc = 0; kc < coarse_steps; ++kc) {
    for (int sub = 0; sub < 2; ++sub) {
      const std::int64_t kf = 2 * kc + sub;
      const Vector mean_f = particle_mean(Xf);
      out.u_fine += log_nc_increment(mean_f, obs_fine.data.col(kf), model, delta_f);
      fine_noise.fill(kf, use_w ? &dW : nullptr, use_v ? &dV : nullptr);
      enkbf_step_inplace(Xf, mean_f, obs_fine.data.col(kf), model, variant, dW, dV, delta_f);
    }
    const Vector mean_c = particle_mean(Xc);
    out.u_coarse += log_nc_increment(mean_c, obs_coarse.data.col(kc), model, delta_c);
    coarse_noise.fill(kc, use_w ? &dW : nullptr, use_v ? &dV : nullptr);
    enkbf_step_inplace(Xc, mean_c, obs_coarse.data.col(kc), model, variant, dW, dV, delta_c);
  }
  out.cost = double(N) * double(coarse_steps) * 3.0;  // 2^l + 2^{l-1} fine+coarse steps
  out.final_fine = Ensemble{l, std::move(Xf)};
  out.final_coarse = Ensemble{l - 1, std::move(Xc)};
  return out;
}

MlLogNcResult ml_log_nc(const ModelSpec& model, const IncrementPath& obs, const MLConfig& config,
                        const RunContext& ctx, const std::vector<Matrix>* init_per_level) {
  config.validate();
  if (init_per_level && int(init_per_level->size()) != config.levels()) {
    throw DimensionMismatch("ml_log_nc: need one initial ensemble per level");
  }

  MlLogNcResult out;
  const double horizon = double(obs.horizon);

  const Matrix* init0 = init_per_level ? &(*init_per_level)[0] : nullptr;
  EnkbfRunResult base =
      enkbf_run(model, obs, config.l_star, config.N[0], config.variant, ctx, init0);
  out.u_ml = base.log_nc.u;
  out.per_level.push_back(MlLevelRow{config.l_star, base.log_nc.u,
                                     std::numeric_limits<double>::quiet_NaN(), base.log_nc.u,
                                     base.cost});
  out.cost_fine_steps = base.cost;
  out.cost_total = base.cost;
  out.final_fine.push_back(std::move(base.final_ensemble));

  for (int l = config.l_star + 1; l <= config.L; ++l) {
    const int idx = l - config.l_star;
    const Matrix* init = init_per_level ? &(*init_per_level)[size_t(idx)] : nullptr;
    CoupledRunOutput c = coupled_run(model, obs, l, config.N[size_t(idx)], config.variant, ctx, init);
    const double contribution = c.u_fine - c.u_coarse;
    out.u_ml += contribution;
    out.per_level.push_back(MlLevelRow{l, c.u_fine, c.u_coarse, contribution, c.cost});
    out.cost_fine_steps += double(config.N[size_t(idx)]) * std::ldexp(1.0, l) * horizon;
    out.cost_total += c.cost;
    out.final_fine.push_back(std::move(c.final_fine));
  }
  return out;
}

double ml_filter_estimate(const ModelSpec& model, const IncrementPath& obs, const MLConfig& config,
                          const RunContext& ctx,
                          const std::function<double(const Vector&)>& phi) {
  config.validate();

  auto empirical = [&phi](const Ensemble& ens) {
    double acc = 0.0;
    for (int i = 0; i < ens.n(); ++i) {
      acc += phi(ens.particles.col(i));
    }
    return acc / double(ens.n());
  };

  EnkbfRunResult base = enkbf_run(model, obs, config.l_star, config.N[0], config.variant, ctx);
  double estimate = empirical(base.final_ensemble);
  for (int l = config.l_star + 1; l <= config.L; ++l) {
    const int idx = l - config.l_star;
    CoupledRunOutput c = coupled_run(model, obs, l, config.N[size_t(idx)], config.variant, ctx);
    estimate += empirical(c.final_fine) - empirical(c.final_coarse);
  }
  return estimate;
}

}  // namespace mlkbf
