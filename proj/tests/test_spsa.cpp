#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mlkbf/errors.hpp"
#include "mlkbf/spsa.hpp"

using namespace mlkbf;

TEST_CASE("sample_perturbation") {
  RandomStream stream(3, {Purpose::Perturbation, 0, 0, 0});
  SUBCASE("support") {
    const Vector psi = sample_perturbation(1, stream);
    CHECK((psi[0] == 1.0 || psi[0] == -1.0));
  }
  SUBCASE("fairness") {
    double acc = 0.0;
    for (int t = 0; t < 10000; ++t) {
      acc += sample_perturbation(1, RandomStream(3, {Purpose::Perturbation, 0, 0,
                                                     std::uint32_t(t)}))[0];
    }
    CHECK(std::abs(acc / 10000.0) < 0.04);
  }
  SUBCASE("coordinates are pairwise uncorrelated") {
    double s01 = 0, s02 = 0, s12 = 0;
    const int n = 10000;
    for (int t = 0; t < n; ++t) {
      const Vector psi =
          sample_perturbation(3, RandomStream(3, {Purpose::Perturbation, 0, 0, std::uint32_t(t)}));
      s01 += psi[0] * psi[1];
      s02 += psi[0] * psi[2];
      s12 += psi[1] * psi[2];
    }
    CHECK(std::abs(s01 / n) < 0.05);
    CHECK(std::abs(s02 / n) < 0.05);
    CHECK(std::abs(s12 / n) < 0.05);
  }
}

TEST_CASE("spsa_update") {
  Vector theta(1), a(1), psi(1);
  SUBCASE("no gradient signal leaves theta unchanged") {
    theta << 1.4;
    a << 0.3;
    psi << 1.0;
    CHECK(spsa_update(theta, a, 0.2, psi, 0.77, 0.77) == theta);
  }
  SUBCASE("hand value") {
    theta << 1.0;
    a << 0.1;
    psi << -1.0;
    const Vector out = spsa_update(theta, a, 0.5, psi, 1.2, 0.8);
    CHECK(out[0] == doctest::Approx(0.96).epsilon(1e-15));
  }
  SUBCASE("sign-flip symmetry of the central difference") {
    Vector theta2(2), a2(2), psi2(2);
    theta2 << 0.4, -1.1;
    a2 << 0.05, 0.07;
    psi2 << 1.0, -1.0;
    const Vector base = spsa_update(theta2, a2, 0.3, psi2, 0.9, 0.2);
    const Vector flipped = spsa_update(theta2, a2, 0.3, Vector(-psi2), 0.2, 0.9);
    CHECK(base == flipped);
  }
}

TEST_CASE("gain_at") {
  const GainSchedule lin = default_schedule_linear(VariantId::Vanilla);
  SUBCASE("b follows t^{-0.1}") {
    CHECK(gain_at(lin, 10).second == doctest::Approx(std::pow(10.0, -0.1)).epsilon(1e-15));
    CHECK(gain_at(lin, 10).second == doctest::Approx(0.79433).epsilon(1e-4));
  }
  SUBCASE("a is flat before the threshold") { CHECK(gain_at(lin, 10).first == 0.02); }
  SUBCASE("a follows the power law after the threshold") {
    CHECK(gain_at(lin, 100).first == doctest::Approx(std::pow(100.0, -0.75)).epsilon(1e-15));
    CHECK(gain_at(lin, 100).first == doctest::Approx(0.031623).epsilon(1e-4));
    CHECK(gain_at(lin, 100, 1).first == doctest::Approx(std::pow(100.0, -0.82)).epsilon(1e-15));
  }
  SUBCASE("transport defaults switch at t = 500 with scaled second coordinate") {
    const GainSchedule f3 = default_schedule_linear(VariantId::DeterministicTransport);
    CHECK(gain_at(f3, 400).first == 0.02);
    CHECK(gain_at(f3, 600, 1).first ==
          doctest::Approx(0.2 * std::pow(600.0, -0.95)).epsilon(1e-15));
  }
  SUBCASE("schedule validation rejects bad exponents") {
    GainSchedule bad = lin;
    bad.a[0].exponent = 0.4;
    CHECK_THROWS_AS(bad.validate(2), ConfigError);
    GainSchedule bad_b = lin;
    bad_b.b.exponent = 0.7;
    CHECK_THROWS_AS(bad_b.validate(2), ConfigError);
  }
}

namespace {

SPSAConfig small_config(std::uint64_t seed, int iterations) {
  SPSAConfig cfg;
  cfg.theta0.values = Vector::Constant(1, -1.0);
  cfg.theta0.names = {"a"};
  cfg.schedule = default_schedule_linear(VariantId::Vanilla);
  cfg.schedule.a = {cfg.schedule.a[0]};
  cfg.iterations = iterations;
  cfg.ml = MLConfig{5, 6, {64, 32}, VariantId::Deterministic};
  cfg.seed = seed;
  return cfg;
}

IncrementPath synthetic_record(const ModelFamily& family, double theta_star, int l_data,
                               int horizon, std::uint64_t seed) {
  const ModelSpec truth = family.build(Vector::Constant(1, theta_star));
  auto [sig, obs] = simulate_truth_and_obs(truth, l_data, horizon, seed);
  (void)sig;
  return obs;
}

}  // namespace

TEST_CASE("rml_spsa_run") {
  const ModelFamily family = scalar_linear_family();

  SUBCASE("zero gain freezes the trajectory") {
    SPSAConfig cfg = small_config(21, 5);
    // The smallest admissible gains: scale the power rule down to make the
    // update numerically negligible, then check exact freezing with a == 0
    // via the no-signal property instead. Here: common random numbers make
    // U+ == U- when b perturbs nothing, i.e. psi-independent families.
    cfg.schedule.a[0] = PowerRule{1e-300, 5, 1e-300, 0.75};
    const IncrementPath obs = synthetic_record(family, -2.0, 8, 5, 21);
    const SpsaRunResult r = rml_spsa_run(family, obs, cfg);
    for (int t = 1; t <= r.completed; ++t) {
      CHECK(std::abs(r.theta_path(0, t) - r.theta_path(0, 0)) < 1e-290);
    }
  }

  SUBCASE("common random numbers cancel identical evaluations exactly") {
    // With theta+ == theta- (psi scaled by b -> theta identical) the two
    // filter runs share every stream, so U+ - U- is exactly zero. We check
    // the stronger consequence: re-running with the same seed is
    // bit-identical, and U+ == U- whenever b == 0 is approached by making
    // the family ignore theta.
    ModelFamily constant_family = family;
    constant_family.build = [base = family.build](const Vector&) {
      return base(Vector::Constant(1, -1.5));
    };
    SPSAConfig cfg = small_config(33, 4);
    const IncrementPath obs = synthetic_record(family, -2.0, 8, 4, 33);
    const SpsaRunResult r = rml_spsa_run(constant_family, obs, cfg);
    for (int t = 0; t < r.completed; ++t) {
      CHECK(r.u_plus[size_t(t)] == r.u_minus[size_t(t)]);
      CHECK(r.theta_path(0, t + 1) == r.theta_path(0, t));
    }
  }

  SUBCASE("trajectories are bit-reproducible") {
    SPSAConfig cfg = small_config(55, 6);
    const IncrementPath obs = synthetic_record(family, -2.0, 8, 6, 55);
    const SpsaRunResult a = rml_spsa_run(family, obs, cfg);
    const SpsaRunResult b = rml_spsa_run(family, obs, cfg);
    CHECK(a.theta_path == b.theta_path);
    CHECK(a.u_plus == b.u_plus);
    CHECK(a.u_minus == b.u_minus);
  }

  SUBCASE("drift coefficient moves toward the truth") {
    // Desk-scale smoke run; the acceptance suite runs the full protocol.
    SPSAConfig cfg = small_config(7, 60);
    const IncrementPath obs = synthetic_record(family, -2.0, 8, 60, 7);
    const SpsaRunResult r = rml_spsa_run(family, obs, cfg);
    REQUIRE(r.completed == 60);
    const double start_gap = std::abs(r.theta_path(0, 0) + 2.0);
    double tail = 0.0;
    for (int t = 50; t < 60; ++t) tail += std::abs(r.theta_path(0, t) + 2.0);
    tail /= 10.0;
    CHECK(tail < start_gap);
  }

  SUBCASE("input validation") {
    SPSAConfig cfg = small_config(5, 10);
    const IncrementPath obs = synthetic_record(family, -2.0, 8, 5, 5);
    CHECK_THROWS(rml_spsa_run(family, obs, cfg));  // record shorter than M
    SPSAConfig bad = small_config(5, 2);
    bad.theta0.values = Vector::Zero(2);
    const IncrementPath obs2 = synthetic_record(family, -2.0, 8, 2, 5);
    CHECK_THROWS(rml_spsa_run(family, obs2, bad));
  }
}
