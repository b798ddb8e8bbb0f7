#include "mlkbf/kalman_ref.hpp"

#include <cmath>

#include "mlkbf/errors.hpp"

namespace mlkbf {

Matrix riccati_drift(const Matrix& P, const ModelSpec& model) {
  if (P.rows() != model.dx || P.cols() != model.dx) {
    throw DimensionMismatch("riccati_drift: P must be dx x dx");
  }
  const Matrix& A = model.A();
  const Matrix Q = model.Q_sqrt * model.Q_sqrt;
  return A * P + P * A.transpose() - P * model.s() * P + Q;
}

KBFState kbf_step(const KBFState& state, const Vector& dY, const ModelSpec& model,
                  double blowup_bound) {
  if (dY.size() != model.dy) throw DimensionMismatch("kbf_step: dY must have length dy");
  const double delta = level_delta(state.level);
  const Matrix& A = model.A();
  const Matrix& S = model.s();

  KBFState next;
  next.level = state.level;
  next.k = state.k + 1;
  next.m = state.m + A * state.m * delta +
           state.P * model.C.transpose() * model.r_inv() * (dY - model.C * state.m * delta);

  const Matrix AmPS = A - state.P * S;
  Matrix P = state.P + riccati_drift(state.P, model) * delta +
             AmPS * state.P * AmPS.transpose() * (delta * delta);
  P = 0.5 * (P + P.transpose()).eval();
  next.P = std::move(P);

  if (next.P.cwiseAbs().maxCoeff() > blowup_bound) {
    throw CovarianceBlowup("kbf covariance exceeded the configured bound");
  }
  return next;
}

KbfRunResult kbf_run(const ModelSpec& model, const IncrementPath& obs, int l,
                     double blowup_bound) {
  const IncrementPath obs_l = coarsen_increments(obs, l);
  const std::int64_t steps = obs_l.steps();

  KbfRunResult out;
  out.means.resize(model.dx, steps + 1);
  out.covs.reserve(steps + 1);

  KBFState state{model.M0, model.P0, 0, l};
  out.means.col(0) = state.m;
  out.covs.push_back(state.P);
  for (std::int64_t k = 0; k < steps; ++k) {
    state = kbf_step(state, obs_l.data.col(k), model, blowup_bound);
    out.means.col(k + 1) = state.m;
    out.covs.push_back(state.P);
  }
  return out;
}

double exact_log_nc(const Matrix& means, const IncrementPath& obs, const ModelSpec& model, int l) {
  const IncrementPath obs_l = coarsen_increments(obs, l);
  const std::int64_t steps = obs_l.steps();
  if (means.cols() < steps) throw DimensionMismatch("exact_log_nc: mean path shorter than record");
  const double delta = level_delta(l);
  double u = 0.0;
  for (std::int64_t k = 0; k < steps; ++k) {
    u += log_nc_increment(means.col(k), obs_l.data.col(k), model, delta);
  }
  return u;
}

OracleRunResult iid_oracle_run(const ModelSpec& model, const IncrementPath& obs, int l, int N,
                               const RunContext& ctx, bool store_particle_path) {
  if (N < 1) throw TooFewParticles("iid_oracle_run needs N >= 1");
  const KbfRunResult ref = kbf_run(model, obs, l);
  const IncrementPath obs_l = coarsen_increments(obs, l);
  const std::int64_t steps = obs_l.steps();
  const double delta = level_delta(l);

  Matrix X = sample_initial_ensemble(model, N, l, ctx);
  OracleRunResult out;
  out.mean_path.resize(model.dx, steps + 1);
  if (store_particle_path) out.particle_path.push_back(X);

  StreamNoise noise(ctx.seed, l, ctx.rep, Purpose::OracleW, Purpose::OracleV);
  Matrix dW(model.dx, N), dV(model.dy, N);
  double u = 0.0;
  for (std::int64_t k = 0; k < steps; ++k) {
    const Vector mean = particle_mean(X);
    out.mean_path.col(k) = mean;
    u += log_nc_increment(mean, obs_l.data.col(k), model, delta);

    noise.fill(k, &dW, &dV);
    const Vector dY = obs_l.data.col(k);
    const Matrix gain = ref.covs[size_t(k)] * model.C.transpose() * model.r_inv();

    Matrix drift(model.dx, N);
    drift_eval_batch(model, X, drift);
    Matrix innovation = (-delta) * (model.C * X);
    innovation.noalias() -= model.R_sqrt * dV;
    innovation.colwise() += dY;
    X += drift * delta;
    X += model.Q_sqrt * dW;
    X += gain * innovation;
    if (!X.allFinite()) throw NonFiniteState("iid_oracle_run produced a non-finite state");
    if (store_particle_path) out.particle_path.push_back(X);
  }
  out.mean_path.col(steps) = particle_mean(X);
  out.log_nc = u;
  out.final_particles = Ensemble{l, std::move(X)};
  return out;
}

}  // namespace mlkbf
