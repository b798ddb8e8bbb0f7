#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mlkbf/model.hpp"
#include "mlkbf/rng.hpp"

namespace mlkbf {

/// Dyadic discretization level: step size 2^{-l}, exact in binary floating
/// point, with 2^l steps per unit of time.
struct Level {
  int l = 0;

  double delta() const { return level_delta(l); }
  std::int64_t steps_per_unit() const { return std::int64_t(1) << l; }

  static double level_delta(int l);
};

double level_delta(int l);

/// Increments of a process on the dyadic grid of `level`, over an integer
/// horizon. Column k holds the increment over [k*delta, (k+1)*delta).
struct IncrementPath {
  int level = 0;
  int horizon = 0;
  Matrix data;  // dim x (horizon * 2^level)

  std::int64_t steps() const { return data.cols(); }
  int dim() const { return int(data.rows()); }

  /// Horizon-1 slice starting at time unit t (no copy-free view; data is
  /// small relative to the filter work).
  IncrementPath window(int t) const;

  /// Pairwise left-to-right tree sum over steps; the definition under which
  /// coarsening preserves the path sum bit-exactly.
  Vector path_sum() const;
};

/// Sums 2^{l-l'} consecutive fine increments into each coarse one, applied
/// one level at a time (adjacent pairs), so chained coarsenings are
/// bit-identical to direct ones.
IncrementPath coarsen_increments(const IncrementPath& path, int to_level);

/// States of the latent signal on the simulation grid (column k = X_{k delta}).
struct SignalPath {
  int level = 0;
  int horizon = 0;
  Matrix states;  // dx x (horizon * 2^level + 1)
};

/// Euler-Maruyama twin-experiment data: the latent signal from
/// X0 ~ N(M0, P0) and observation increments dY_k = C X_k delta + R^{1/2} dV_k.
std::pair<SignalPath, IncrementPath> simulate_truth_and_obs(const ModelSpec& model, int l_data,
                                                            int horizon, std::uint64_t seed);

/// Level-coupled Brownian drivers for n_streams particles: fine increments
/// N(0, 2^{-l}) i.i.d., coarse[k] = fine[2k] + fine[2k+1] bit-exactly.
std::pair<std::vector<IncrementPath>, std::vector<IncrementPath>> coupled_brownian(
    int l, int horizon, int dim, int n_streams, std::uint64_t seed,
    Purpose purpose = Purpose::FilterW, std::uint32_t rep = 0);

/// Brownian increment block for one step: out(:, i) ~ N(0, delta I) for
/// particle i from its labelled stream. Step k consumes draw indices
/// [k*dim, (k+1)*dim) of each stream, so callers may evaluate steps in any
/// order.
void fill_brownian_step(Matrix& out, std::uint64_t seed, Purpose purpose, int level,
                        std::uint32_t rep, std::int64_t step, double delta);

}  // namespace mlkbf
