#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace mlkbf {

/// Philox 4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Stateless: a 128-bit counter and a 64-bit key map to four 32-bit words.
/// Every random quantity in this library is a pure function of
/// (master seed, stream label, draw index), so streams can be evaluated in
/// any order, on any number of workers, with bit-identical results.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Key key, Counter ctr) noexcept;
};

/// Identifies what a random stream is for. Part of the stream label, so
/// draws for different uses never collide even at equal (level, particle,
/// rep) coordinates.
enum class Purpose : std::uint32_t {
  TruthSignal = 1,   // W driving the latent signal
  TruthObs = 2,      // V driving the observation record
  InitEnsemble = 3,  // initial particle draws, per level
  FilterW = 4,       // per-particle signal-noise increments inside a filter
  FilterV = 5,       // per-particle perturbed-observation increments
  OracleW = 6,
  OracleV = 7,
  Perturbation = 8,  // SPSA sign vectors
  CarrierW = 9,      // ensemble carried between estimation windows
  CarrierV = 10,
  CarrierInit = 11,
  MatrixC = 12,      // random observation matrices
  Generic = 13,
};

/// Stream coordinates. Distinct labels give statistically independent
/// streams; equal labels give bit-identical streams.
struct StreamLabel {
  Purpose purpose = Purpose::Generic;
  std::uint32_t level = 0;     // < 64
  std::uint32_t particle = 0;  // full 32-bit range
  std::uint32_t rep = 0;       // < 2^20 (repetition or iteration index)
};

/// One labelled stream of i.i.d. draws, random-access by index.
///
/// normal(i) is the i-th N(0,1) variate of the stream; uniform(i) the i-th
/// U(0,1) variate. Both are pure functions of (seed, label, i).
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, StreamLabel label);

  double normal(std::uint64_t i) const noexcept;
  double uniform(std::uint64_t i) const noexcept;

  /// Fills out[0..n) with normals at indices first..first+n.
  void fill_normals(std::uint64_t first, std::span<double> out) const noexcept;

  /// Fair sign in {-1.0, +1.0}.
  double sign(std::uint64_t i) const noexcept;

 private:
  Philox4x32::Key key_;
  std::uint32_t ctr2_;
  std::uint32_t ctr3_;
};

}  // namespace mlkbf
