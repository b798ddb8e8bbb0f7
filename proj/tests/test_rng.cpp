#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlkbf/rng.hpp"

using namespace mlkbf;

TEST_CASE("philox 4x32-10 known-answer vectors") {
  // Reference outputs from the Random123 test vectors.
  auto r0 = Philox4x32::block({0u, 0u}, {0u, 0u, 0u, 0u});
  CHECK(r0 == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});

  auto r1 = Philox4x32::block({0xffffffffu, 0xffffffffu},
                              {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
  CHECK(r1 == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});

  auto r2 = Philox4x32::block({0xa4093822u, 0x299f31d0u},
                              {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u});
  CHECK(r2 == Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("identical labels give bit-identical streams") {
  RandomStream a(42, {Purpose::FilterW, 3, 17, 5});
  RandomStream b(42, {Purpose::FilterW, 3, 17, 5});
  for (std::uint64_t i = 0; i < 64; ++i) {
    CHECK(a.normal(i) == b.normal(i));
    CHECK(a.uniform(i) == b.uniform(i));
  }
}

TEST_CASE("distinct labels differ in every coordinate") {
  const RandomStream base(42, {Purpose::FilterW, 3, 17, 5});
  const RandomStream diff_purpose(42, {Purpose::FilterV, 3, 17, 5});
  const RandomStream diff_level(42, {Purpose::FilterW, 4, 17, 5});
  const RandomStream diff_particle(42, {Purpose::FilterW, 3, 18, 5});
  const RandomStream diff_rep(42, {Purpose::FilterW, 3, 17, 6});
  const RandomStream diff_seed(43, {Purpose::FilterW, 3, 17, 5});
  for (const auto* other : {&diff_purpose, &diff_level, &diff_particle, &diff_rep, &diff_seed}) {
    int equal = 0;
    for (std::uint64_t i = 0; i < 32; ++i) {
      if (base.normal(i) == other->normal(i)) ++equal;
    }
    CHECK(equal == 0);
  }
}

TEST_CASE("fill_normals matches per-index access at any offset") {
  RandomStream s(7, {Purpose::TruthSignal, 0, 0, 0});
  std::vector<double> buf(13);
  for (std::uint64_t first : {0ull, 1ull, 5ull, 1000ull}) {
    s.fill_normals(first, buf);
    for (size_t k = 0; k < buf.size(); ++k) {
      CHECK(buf[k] == s.normal(first + k));
    }
  }
}

TEST_CASE("normal stream calibration") {
  RandomStream s(20240809, {Purpose::Generic, 0, 0, 0});
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal(std::uint64_t(i));
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  // 4-sigma bands for the empirical mean and variance of N(0,1) samples.
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("streams with distinct particles are uncorrelated") {
  RandomStream a(99, {Purpose::FilterW, 2, 0, 0});
  RandomStream b(99, {Purpose::FilterW, 2, 1, 0});
  const int n = 10000;
  double saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < n; ++i) {
    const double xa = a.normal(std::uint64_t(i));
    const double xb = b.normal(std::uint64_t(i));
    saa += xa * xa;
    sbb += xb * xb;
    sab += xa * xb;
  }
  const double corr = sab / std::sqrt(saa * sbb);
  CHECK(std::abs(corr) < 0.05);
}

TEST_CASE("uniforms live in (0,1] and signs are fair") {
  RandomStream s(5, {Purpose::Perturbation, 0, 0, 0});
  const int n = 10000;
  double mean_sign = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform(std::uint64_t(i));
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
    mean_sign += s.sign(std::uint64_t(i));
  }
  CHECK(std::abs(mean_sign / n) < 0.04);
}

TEST_CASE("label range validation") {
  CHECK_THROWS(RandomStream(1, {Purpose::FilterW, 64, 0, 0}));
  CHECK_THROWS(RandomStream(1, {Purpose::FilterW, 0, 0, 1u << 20}));
}
