#include "mlkbf/enkbf.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "mlkbf/errors.hpp"

namespace mlkbf {

VariantId variant_from_string(std::string_view s) {
  if (s == "f1" || s == "vanilla") return VariantId::Vanilla;
  if (s == "f2" || s == "deterministic") return VariantId::Deterministic;
  if (s == "f3" || s == "transport" || s == "deterministic-transport")
    return VariantId::DeterministicTransport;
  throw ConfigError("unknown variant: " + std::string(s));
}

std::string to_string(VariantId v) {
  switch (v) {
    case VariantId::Vanilla: return "f1";
    case VariantId::Deterministic: return "f2";
    case VariantId::DeterministicTransport: return "f3";
  }
  return "?";
}

Vector particle_mean(const Matrix& particles) {
  if (particles.cols() < 1) throw TooFewParticles("ensemble_mean needs N >= 1");
  // Anchored at the first particle so a collapsed ensemble has an exact
  // mean (and therefore an exactly zero sample covariance).
  const Vector anchor = particles.col(0);
  const Vector shifted = (particles.colwise() - anchor).rowwise().mean();
  return anchor + shifted;
}

Vector ensemble_mean(const Ensemble& ens) { return particle_mean(ens.particles); }

Matrix ensemble_cov(const Ensemble& ens) {
  if (ens.n() < 2) throw TooFewParticles("ensemble_cov needs N >= 2");
  const Vector m = particle_mean(ens.particles);
  const Matrix centered = ens.particles.colwise() - m;
  return (centered * centered.transpose()) / double(ens.n() - 1);
}

double log_nc_increment(const Vector& m, const Vector& dY, const ModelSpec& model, double delta) {
  if (m.size() != model.dx) throw DimensionMismatch("log_nc_increment: mean has wrong length");
  const Vector Cm = model.C * m;
  return Cm.dot(model.r_inv() * dY) - 0.5 * delta * m.dot(model.s() * m);
}

namespace {

// Transport drift D = (P + lambda I)^{-1} (xi - m) with Tikhonov
// regularization lambda = 1e-8 trace(P)/dx, escalated x10 up to 1e-2 of the
// same scale when the factorization or the solution degenerates.
Matrix regularized_transport_solve(const Matrix& P, const Matrix& centered) {
  const int d = int(P.rows());
  const double scale = P.trace() / double(d);
  if (!(scale > 0.0)) {
    // Zero covariance means a collapsed ensemble: xi - m = 0 and the
    // transport term vanishes identically.
    return Matrix::Zero(centered.rows(), centered.cols());
  }
  double lambda = 1e-8 * scale;
  const double lambda_max = 1e-2 * scale;
  while (true) {
    Matrix Preg = P;
    Preg.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(Preg);
    if (llt.info() == Eigen::Success) {
      Matrix D = llt.solve(centered);
      if (D.allFinite()) return D;
    }
    if (lambda >= lambda_max) {
      throw SingularCovariance("transport variant: P^N + lambda I not invertible");
    }
    lambda *= 10.0;
  }
}

}  // namespace

void enkbf_step_inplace(Matrix& X, const Vector& mean, const Vector& dY, const ModelSpec& model,
                        VariantId variant, const Matrix& dW, const Matrix& dV, double delta) {
  const Eigen::Index N = X.cols();
  if (N < 2) throw TooFewParticles("enkbf_step needs N >= 2");
  const Matrix centered = X.colwise() - mean;
  const Matrix P = (centered * centered.transpose()) / double(N - 1);
  const Matrix gain = P * model.C.transpose() * model.r_inv();

  Matrix drift(X.rows(), N);
  drift_eval_batch(model, X, drift);

  // Terms are accumulated one at a time so degenerate configurations
  // collapse bit-exactly (zero gain leaves a plain Euler step).
  Matrix innovation;  // dy x N
  switch (variant) {
    case VariantId::Vanilla: {
      if (dW.rows() != X.rows() || dW.cols() != N) throw DimensionMismatch("dW must be dx x N");
      if (dV.rows() != model.dy || dV.cols() != N) throw DimensionMismatch("dV must be dy x N");
      innovation = (-delta) * (model.C * X);
      innovation.noalias() -= model.R_sqrt * dV;
      innovation.colwise() += dY;
      X += drift * delta;
      X += model.Q_sqrt * dW;
      X += gain * innovation;
      break;
    }
    case VariantId::Deterministic: {
      if (dW.rows() != X.rows() || dW.cols() != N) throw DimensionMismatch("dW must be dx x N");
      Matrix midpoint = 0.5 * X;
      midpoint.colwise() += 0.5 * mean;
      innovation = (-delta) * (model.C * midpoint);
      innovation.colwise() += dY;
      X += drift * delta;
      X += model.Q_sqrt * dW;
      X += gain * innovation;
      break;
    }
    case VariantId::DeterministicTransport: {
      Matrix midpoint = 0.5 * X;
      midpoint.colwise() += 0.5 * mean;
      innovation = (-delta) * (model.C * midpoint);
      innovation.colwise() += dY;
      const Matrix D = regularized_transport_solve(P, centered);
      X += drift * delta;
      X += (model.Q_sqrt * model.Q_sqrt) * (D * delta);
      X += gain * innovation;
      break;
    }
  }
  if (!X.allFinite()) throw NonFiniteState("enkbf_step produced a non-finite state");
}

Ensemble enkbf_step(const Ensemble& ens, const Vector& dY, const ModelSpec& model,
                    VariantId variant, const StepNoise& noise) {
  if (dY.size() != model.dy) throw DimensionMismatch("dY must have length dy");
  Ensemble out = ens;
  const Vector mean = ensemble_mean(ens);
  enkbf_step_inplace(out.particles, mean, dY, model, variant, noise.dW, noise.dV,
                     level_delta(ens.level));
  return out;
}

bool variant_uses_w(VariantId v) { return v != VariantId::DeterministicTransport; }
bool variant_uses_v(VariantId v) { return v == VariantId::Vanilla; }

StreamNoise::StreamNoise(std::uint64_t seed, int level, std::uint32_t rep, Purpose w_purpose,
                         Purpose v_purpose)
    : seed_(seed),
      level_(level),
      rep_(rep),
      w_purpose_(w_purpose),
      v_purpose_(v_purpose),
      delta_(level_delta(level)) {}

void StreamNoise::fill(std::int64_t step, Matrix* dW, Matrix* dV) {
  if (dW) fill_brownian_step(*dW, seed_, w_purpose_, level_, rep_, step, delta_);
  if (dV) fill_brownian_step(*dV, seed_, v_purpose_, level_, rep_, step, delta_);
}

SummedNoise::SummedNoise(std::uint64_t seed, int fine_level, std::uint32_t rep, Purpose w_purpose,
                         Purpose v_purpose)
    : fine_(seed, fine_level, rep, w_purpose, v_purpose) {}

void SummedNoise::fill(std::int64_t step, Matrix* dW, Matrix* dV) {
  if (dW) w_buf_.resizeLike(*dW);
  if (dV) v_buf_.resizeLike(*dV);
  fine_.fill(2 * step, dW, dV);
  fine_.fill(2 * step + 1, dW ? &w_buf_ : nullptr, dV ? &v_buf_ : nullptr);
  if (dW) *dW += w_buf_;
  if (dV) *dV += v_buf_;
}

Matrix sample_initial_ensemble(const ModelSpec& model, int N, int level, const RunContext& ctx,
                               Purpose purpose) {
  Matrix X(model.dx, N);
  Vector z(model.dx);
  for (int i = 0; i < N; ++i) {
    RandomStream stream(ctx.seed, {purpose, std::uint32_t(level), std::uint32_t(i), ctx.rep});
    stream.fill_normals(0, {z.data(), size_t(model.dx)});
    X.col(i) = model.M0 + model.P0_sqrt * z;
  }
  return X;
}

EnkbfRunResult enkbf_run(const ModelSpec& model, const IncrementPath& obs, int l, int N,
                         VariantId variant, const RunContext& ctx, const Matrix* init,
                         NoiseSource* noise) {
  if (N < 2) throw TooFewParticles("enkbf_run needs N >= 2");
  if (obs.dim() != model.dy) throw DimensionMismatch("observation record does not match dy");
  const IncrementPath obs_l = coarsen_increments(obs, l);
  const std::int64_t steps = obs_l.steps();
  const double delta = level_delta(l);

  Matrix X = init ? *init : sample_initial_ensemble(model, N, l, ctx);
  if (X.rows() != model.dx || X.cols() != N) throw DimensionMismatch("init ensemble has wrong shape");

  StreamNoise default_noise(ctx.seed, l, ctx.rep);
  NoiseSource& src = noise ? *noise : default_noise;

  EnkbfRunResult result;
  result.mean_path.resize(model.dx, steps + 1);
  const bool use_w = variant_uses_w(variant);
  const bool use_v = variant_uses_v(variant);
  Matrix dW, dV;
  if (use_w) dW.resize(model.dx, N);
  if (use_v) dV.resize(model.dy, N);
  for (std::int64_t k = 0; k < steps; ++k) {
    const Vector mean = particle_mean(X);
    result.mean_path.col(k) = mean;
    result.log_nc.add(log_nc_increment(mean, obs_l.data.col(k), model, delta));
    src.fill(k, use_w ? &dW : nullptr, use_v ? &dV : nullptr);
    enkbf_step_inplace(X, mean, obs_l.data.col(k), model, variant, dW, dV, delta);
  }
  result.mean_path.col(steps) = particle_mean(X);
  result.final_ensemble = Ensemble{l, std::move(X)};
  result.cost = double(N) * double(steps);
  return result;
}

}  // namespace mlkbf
