#include "mlkbf/paths.hpp"

#include <cmath>

#include "mlkbf/errors.hpp"

namespace mlkbf {

double Level::level_delta(int l) { return mlkbf::level_delta(l); }

double level_delta(int l) {
  if (l < 0) throw DimensionMismatch("level must be nonnegative");
  return std::ldexp(1.0, -l);
}

IncrementPath IncrementPath::window(int t) const {
  if (t < 0 || t >= horizon) throw DimensionMismatch("window index outside horizon");
  const std::int64_t per_unit = std::int64_t(1) << level;
  IncrementPath out;
  out.level = level;
  out.horizon = 1;
  out.data = data.middleCols(t * per_unit, per_unit);
  return out;
}

Vector IncrementPath::path_sum() const {
  Matrix acc = data;
  while (acc.cols() > 1) {
    const std::int64_t half = acc.cols() / 2;
    Matrix next(acc.rows(), half + (acc.cols() & 1));
    for (std::int64_t k = 0; k < half; ++k) {
      next.col(k) = acc.col(2 * k) + acc.col(2 * k + 1);
    }
    if (acc.cols() & 1) next.col(half) = acc.col(acc.cols() - 1);
    acc = std::move(next);
  }
  return acc.cols() == 1 ? Vector(acc.col(0)) : Vector(Vector::Zero(acc.rows()));
}

IncrementPath coarsen_increments(const IncrementPath& path, int to_level) {
  if (to_level > path.level) throw LevelAboveSource("cannot coarsen to a finer level");
  if (to_level < 0) throw DimensionMismatch("level must be nonnegative");
  IncrementPath out = path;
  while (out.level > to_level) {
    const std::int64_t coarse_steps = out.steps() / 2;
    Matrix next(out.dim(), coarse_steps);
    for (std::int64_t k = 0; k < coarse_steps; ++k) {
      next.col(k) = out.data.col(2 * k) + out.data.col(2 * k + 1);
    }
    out.data = std::move(next);
    out.level -= 1;
  }
  return out;
}

std::pair<SignalPath, IncrementPath> simulate_truth_and_obs(const ModelSpec& model, int l_data,
                                                            int horizon, std::uint64_t seed) {
  if (l_data < 0) throw DimensionMismatch("l_data must be nonnegative");
  if (horizon < 1) throw DimensionMismatch("horizon must be at least one time unit");
  const std::int64_t steps = std::int64_t(horizon) << l_data;
  const double delta = level_delta(l_data);
  const double sqrt_delta = std::sqrt(delta);

  SignalPath sig;
  sig.level = l_data;
  sig.horizon = horizon;
  sig.states.resize(model.dx, steps + 1);

  IncrementPath obs;
  obs.level = l_data;
  obs.horizon = horizon;
  obs.data.resize(model.dy, steps);

  RandomStream init(seed, {Purpose::InitEnsemble, std::uint32_t(l_data), 0xFFFFFFFFu, 0});
  Vector z(model.dx);
  init.fill_normals(0, {z.data(), size_t(model.dx)});
  sig.states.col(0) = model.M0 + model.P0_sqrt * z;

  RandomStream ws(seed, {Purpose::TruthSignal, std::uint32_t(l_data), 0, 0});
  RandomStream vs(seed, {Purpose::TruthObs, std::uint32_t(l_data), 0, 0});
  Vector dw(model.dx), dv(model.dy);
  for (std::int64_t k = 0; k < steps; ++k) {
    ws.fill_normals(std::uint64_t(k) * model.dx, {dw.data(), size_t(model.dx)});
    vs.fill_normals(std::uint64_t(k) * model.dy, {dv.data(), size_t(model.dy)});
    const Vector x = sig.states.col(k);
    sig.states.col(k + 1) = x + drift_eval(model, x) * delta + model.Q_sqrt * (sqrt_delta * dw);
    obs.data.col(k) = model.C * x * delta + model.R_sqrt * (sqrt_delta * dv);
  }
  return {std::move(sig), std::move(obs)};
}

void fill_brownian_step(Matrix& out, std::uint64_t seed, Purpose purpose, int level,
                        std::uint32_t rep, std::int64_t step, double delta) {
  const double sqrt_delta = std::sqrt(delta);
  const int dim = int(out.rows());
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    RandomStream stream(seed, {purpose, std::uint32_t(level), std::uint32_t(i), rep});
    stream.fill_normals(std::uint64_t(step) * dim, {out.col(i).data(), size_t(dim)});
  }
  out *= sqrt_delta;
}

std::pair<std::vector<IncrementPath>, std::vector<IncrementPath>> coupled_brownian(
    int l, int horizon, int dim, int n_streams, std::uint64_t seed, Purpose purpose,
    std::uint32_t rep) {
  if (l < 1) throw DimensionMismatch("coupled_brownian needs l >= 1");
  const std::int64_t fine_steps = std::int64_t(horizon) << l;
  const double delta = level_delta(l);
  const double sqrt_delta = std::sqrt(delta);

  std::vector<IncrementPath> fine(n_streams), coarse(n_streams);
  for (int i = 0; i < n_streams; ++i) {
    RandomStream stream(seed, {purpose, std::uint32_t(l), std::uint32_t(i), rep});
    IncrementPath f;
    f.level = l;
    f.horizon = horizon;
    f.data.resize(dim, fine_steps);
    for (std::int64_t k = 0; k < fine_steps; ++k) {
      stream.fill_normals(std::uint64_t(k) * dim, {f.data.col(k).data(), size_t(dim)});
    }
    f.data *= sqrt_delta;
    coarse[i] = coarsen_increments(f, l - 1);
    fine[i] = std::move(f);
  }
  return {std::move(fine), std::move(coarse)};
}

}  // namespace mlkbf
