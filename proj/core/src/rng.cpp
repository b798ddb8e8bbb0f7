#include "mlkbf/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mlkbf {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;  // golden ratio
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3)-1

inline void round_once(Philox4x32::Counter& x, const Philox4x32::Key& k) noexcept {
  const std::uint64_t p0 = std::uint64_t(kPhiloxM0) * x[0];
  const std::uint64_t p1 = std::uint64_t(kPhiloxM1) * x[2];
  const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
  const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
  x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
}

// 64 random bits -> double in (0,1]; never 0 so it is safe under log().
inline double bits_to_open_unit(std::uint64_t u) noexcept {
  return (double((u >> 11)) + 1.0) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Key key, Counter ctr) noexcept {
  for (int r = 0; r < 10; ++r) {
    round_once(ctr, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

RandomStream::RandomStream(std::uint64_t master_seed, StreamLabel label) {
  if (label.level >= 64u) throw std::invalid_argument("RandomStream: level label out of range");
  if (label.rep >= (1u << 20)) throw std::invalid_argument("RandomStream: rep label out of range");
  key_ = {std::uint32_t(master_seed), std::uint32_t(master_seed >> 32)};
  ctr2_ = label.particle;
  ctr3_ = (std::uint32_t(label.purpose) << 26) | (label.level << 20) | label.rep;
}

double RandomStream::uniform(std::uint64_t i) const noexcept {
  // Two uniforms per block; lane selected by the low bit.
  const std::uint64_t blk = i >> 1;
  const auto w = Philox4x32::block(key_, {std::uint32_t(blk), std::uint32_t(blk >> 32), ctr2_, ctr3_});
  const int lane = int(i & 1);
  const std::uint64_t u = (std::uint64_t(w[2 * lane]) << 32) | w[2 * lane + 1];
  return bits_to_open_unit(u);
}

double RandomStream::normal(std::uint64_t i) const noexcept {
  // Box-Muller on the two uniforms of block i>>1; lane picks cos/sin.
  const std::uint64_t blk = i >> 1;
  const auto w = Philox4x32::block(key_, {std::uint32_t(blk), std::uint32_t(blk >> 32), ctr2_, ctr3_});
  const std::uint64_t u0 = (std::uint64_t(w[0]) << 32) | w[1];
  const std::uint64_t u1 = (std::uint64_t(w[2]) << 32) | w[3];
  const double r = std::sqrt(-2.0 * std::log(bits_to_open_unit(u0)));
  const double phi = 2.0 * std::numbers::pi * bits_to_open_unit(u1);
  return (i & 1) ? r * std::sin(phi) : r * std::cos(phi);
}

void RandomStream::fill_normals(std::uint64_t first, std::span<double> out) const noexcept {
  std::uint64_t i = first;
  std::size_t k = 0;
  // Peel a leading odd index, then take full blocks two at a time.
  if (!out.empty() && (i & 1)) {
    out[k++] = normal(i++);
  }
  while (k + 2 <= out.size()) {
    const std::uint64_t blk = i >> 1;
    const auto w = Philox4x32::block(key_, {std::uint32_t(blk), std::uint32_t(blk >> 32), ctr2_, ctr3_});
    const std::uint64_t u0 = (std::uint64_t(w[0]) << 32) | w[1];
    const std::uint64_t u1 = (std::uint64_t(w[2]) << 32) | w[3];
    const double r = std::sqrt(-2.0 * std::log(bits_to_open_unit(u0)));
    const double phi = 2.0 * std::numbers::pi * bits_to_open_unit(u1);
    out[k] = r * std::cos(phi);
    out[k + 1] = r * std::sin(phi);
    k += 2;
    i += 2;
  }
  while (k < out.size()) {
    out[k++] = normal(i++);
  }
}

double RandomStream::sign(std::uint64_t i) const noexcept {
  return uniform(i) < 0.5 ? -1.0 : 1.0;
}

}  // namespace mlkbf
