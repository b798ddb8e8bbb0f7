#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlkbf/errors.hpp"
#include "mlkbf/harness.hpp"
#include "mlkbf/kalman_ref.hpp"

using namespace mlkbf;

namespace {

Matrix scalar(double x) {
  Matrix m(1, 1);
  m << x;
  return m;
}

Vector vec1(double x) {
  Vector v(1);
  v << x;
  return v;
}

// a = -0.8, c = 1, r^{1/2} = 2, q = 1: s = 1/4.
ModelSpec scalar_benchmark() { return make_scalar_ou_model(); }

}  // namespace

TEST_CASE("riccati_drift") {
  SUBCASE("P = 0 leaves only Q") {
    auto m = scalar_benchmark();
    CHECK(riccati_drift(Matrix::Zero(1, 1), m)(0, 0) == 1.0);

    auto m5 = make_ou5_model(3);
    const Matrix Q = m5.Q_sqrt * m5.Q_sqrt;
    CHECK((riccati_drift(Matrix::Zero(5, 5), m5) - Q).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("scalar drift value by hand") {
    auto m = scalar_benchmark();
    // 2 a P - s P^2 + q at P = 1: -1.6 - 0.25 + 1 = -0.85.
    CHECK(riccati_drift(scalar(1.0), m)(0, 0) == doctest::Approx(-0.85).epsilon(1e-14));
  }
  SUBCASE("independently computed steady state is a root") {
    auto m = scalar_benchmark();
    const double a = -0.8, s = 0.25, q = 1.0;
    const double p_star = (a + std::sqrt(a * a + s * q)) / s;
    CHECK(std::abs(riccati_drift(scalar(p_star), m)(0, 0)) < 1e-12);
  }
  SUBCASE("drift of a symmetric matrix stays symmetric") {
    auto m5 = make_ou5_model(3);
    Matrix P = Matrix::Zero(5, 5);
    P.diagonal().setConstant(0.3);
    P(0, 1) = P(1, 0) = 0.1;
    const Matrix R = riccati_drift(P, m5);
    CHECK((R - R.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("kbf_step hand case") {
  // a = 0, C = 1, R = 1, Q = 1, delta = 0.5, (m, P) = (0, 1), dY = 0.2:
  // m' = 0.2 and P' = 1 + 0 + 0.25 = 1.25.
  auto m = build_linear_model(scalar(0.0), scalar(1.0), scalar(1.0), scalar(1.0), vec1(0.0),
                              scalar(1.0));
  KBFState st{vec1(0.0), scalar(1.0), 0, 1};
  const KBFState next = kbf_step(st, vec1(0.2), m);
  CHECK(next.m[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(next.P(0, 0) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(next.k == 1);
}

TEST_CASE("kbf_step limiting regimes") {
  SUBCASE("zero gain: mean follows (1 + A delta)") {
    auto m = make_model_unchecked(LinearDrift{scalar(-0.5)}, scalar(0.0), scalar(1.0), scalar(1.0),
                                  vec1(2.0), scalar(0.3));
    KBFState st{vec1(2.0), scalar(0.3), 0, 2};
    const KBFState next = kbf_step(st, vec1(0.7), m);
    const double delta = 0.25;
    CHECK(next.m[0] == doctest::Approx(2.0 * (1.0 - 0.5 * delta)).epsilon(1e-15));
  }
  SUBCASE("zero innovation: gain contributes nothing") {
    auto m = scalar_benchmark();
    const double delta = level_delta(3);
    const Vector dY = vec1(1.0 * 1.5 * delta);  // C m delta
    KBFState st{vec1(1.5), scalar(0.4), 0, 3};
    const KBFState next = kbf_step(st, dY, m);
    CHECK(next.m[0] == doctest::Approx(1.5 * (1.0 - 0.8 * delta)).epsilon(1e-13));
  }
  SUBCASE("covariance blowup is loud") {
    auto m = build_linear_model(scalar(5.0), scalar(1.0), scalar(1.0), scalar(1.0), vec1(0.0),
                                scalar(1.0));
    KBFState st{vec1(0.0), scalar(0.5), 0, 0};
    CHECK_THROWS_AS(
        [&] {
          for (int i = 0; i < 100; ++i) st = kbf_step(st, vec1(0.0), m);
        }(),
        CovarianceBlowup);
  }
}

TEST_CASE("kbf_run") {
  auto model = scalar_benchmark();
  SUBCASE("empty record returns only the prior") {
    IncrementPath empty;
    empty.level = 4;
    empty.horizon = 0;
    empty.data.resize(1, 0);
    const KbfRunResult r = kbf_run(model, empty, 4);
    CHECK(r.means.cols() == 1);
    CHECK(r.means(0, 0) == model.M0[0]);
    CHECK(r.covs.size() == 1);
    CHECK(r.covs[0](0, 0) == model.P0(0, 0));
  }
  SUBCASE("Q = 0, P0 = 0 keeps P at zero; C = 0 gives the gainless recursion") {
    auto m = make_model_unchecked(LinearDrift{scalar(-0.4)}, scalar(0.0), scalar(0.0), scalar(1.0),
                                  vec1(1.0), scalar(0.0));
    auto [sig, obs] = simulate_truth_and_obs(scalar_benchmark(), 4, 1, 7);
    (void)sig;
    const KbfRunResult r = kbf_run(m, obs, 4);
    const double delta = level_delta(4);
    double expect = 1.0;
    for (std::int64_t k = 0; k < 16; ++k) {
      CHECK(r.covs[size_t(k)](0, 0) == 0.0);
      CHECK(r.means(0, k) == doctest::Approx(expect).epsilon(1e-14));
      expect *= 1.0 - 0.4 * delta;
    }
  }
  SUBCASE("PSD along the benchmark horizon") {
    auto m5 = make_ou5_model(12);
    auto [sig, obs] = simulate_truth_and_obs(m5, 8, 1, 12);
    (void)sig;
    const KbfRunResult r = kbf_run(m5, obs, 6);
    RandomStream probe(1, {Purpose::Generic, 0, 0, 0});
    for (size_t k = 0; k < r.covs.size(); k += 8) {
      for (int t = 0; t < 5; ++t) {
        Vector v(5);
        for (int i = 0; i < 5; ++i) v[i] = probe.normal(std::uint64_t(k * 25 + t * 5 + i));
        CHECK(v.dot(r.covs[k] * v) >= -1e-10);
      }
    }
  }
  SUBCASE("mean paths self-converge as the level grows") {
    // max_k |m^l - m^{11}| at the shared time grid should decay ~ Delta_l.
    auto m5 = make_ou5_model(12);
    auto [sig, obs] = simulate_truth_and_obs(m5, 13, 1, 5);
    (void)sig;
    const KbfRunResult ref = kbf_run(m5, obs, 11);
    std::vector<std::pair<double, double>> pts;
    for (int l = 5; l <= 8; ++l) {
      const KbfRunResult r = kbf_run(m5, obs, l);
      double err = 0.0;
      const std::int64_t stride = std::int64_t(1) << (11 - l);
      for (std::int64_t k = 0; k < r.means.cols(); ++k) {
        err = std::max(err, (r.means.col(k) - ref.means.col(k * stride)).cwiseAbs().maxCoeff());
      }
      pts.emplace_back(std::ldexp(1.0, l), err);
    }
    const auto [slope, intercept] = fit_loglog_slope(pts);
    (void)intercept;
    CHECK(slope > -1.3);
    CHECK(slope < -0.7);
  }
}

TEST_CASE("exact_log_nc") {
  auto model = scalar_benchmark();
  SUBCASE("zero means give zero") {
    auto [sig, obs] = simulate_truth_and_obs(model, 6, 1, 5);
    (void)sig;
    const Matrix zeros = Matrix::Zero(1, 65);
    CHECK(exact_log_nc(zeros, obs, model, 6) == 0.0);
  }
  SUBCASE("single-step hand value") {
    auto m = build_linear_model(scalar(0.0), scalar(1.0), scalar(1.0), scalar(1.0), vec1(0.0),
                                scalar(1.0));
    // d = 1, C = R = S = 1, m = 2, dY = 0.1, delta = 0.01: 0.2 - 0.02 = 0.18.
    CHECK(log_nc_increment(vec1(2.0), vec1(0.1), m, 0.01) ==
          doctest::Approx(0.18).epsilon(1e-14));
  }
  SUBCASE("C = 0 gives zero for any means") {
    auto m = make_model_unchecked(LinearDrift{scalar(-0.8)}, scalar(0.0), scalar(1.0), scalar(1.0),
                                  vec1(0.0), scalar(1.0));
    auto [sig, obs] = simulate_truth_and_obs(m, 5, 2, 3);
    (void)sig;
    Matrix means = Matrix::Constant(1, 65, 1.7);
    CHECK(exact_log_nc(means, obs, m, 5) == 0.0);
  }
  SUBCASE("level self-convergence in mean square over records") {
    // Conditional on one record the level error of the log-NC carries a
    // Delta^{1/2}-scale martingale component, so the clean rate shows in
    // the mean square over independent records: MSE ~ Delta_l.
    auto model = make_scalar_ou_model();
    const int records = 64;
    std::vector<std::pair<double, double>> pts;
    double prev = 1e300;
    int inversions = 0;
    for (int l = 3; l <= 8; ++l) {
      std::vector<double> sq(static_cast<size_t>(records));
      parallel_for(records, [&](std::int64_t r) {
        auto [sig, obs] = simulate_truth_and_obs(model, 13, 1, 300 + std::uint64_t(r));
        (void)sig;
        const KbfRunResult ref = kbf_run(model, obs, 11);
        const double u_ref = exact_log_nc(ref.means, obs, model, 11);
        const KbfRunResult rl = kbf_run(model, obs, l);
        const double diff = exact_log_nc(rl.means, obs, model, l) - u_ref;
        sq[size_t(r)] = diff * diff;
      });
      const double mse = kahan_mean(sq);
      if (mse > prev) ++inversions;
      prev = mse;
      pts.emplace_back(std::ldexp(1.0, l), mse);
    }
    CHECK(inversions <= 1);
    const auto [slope, intercept] = fit_loglog_slope(pts);
    (void)intercept;
    CHECK(slope > -1.4);
    CHECK(slope < -0.6);
  }
}

TEST_CASE("iid_oracle_run") {
  SUBCASE("noiseless collapse to the exact mean path, bit-exact") {
    auto m = make_model_unchecked(LinearDrift{scalar(-0.8)}, scalar(1.0), scalar(0.0), scalar(1.0),
                                  vec1(0.1), scalar(0.0));
    auto [sig, obs] = simulate_truth_and_obs(scalar_benchmark(), 6, 1, 21);
    (void)sig;
    const KbfRunResult ref = kbf_run(m, obs, 6);
    const OracleRunResult oracle = iid_oracle_run(m, obs, 6, 1, {21, 0});
    CHECK(oracle.mean_path == ref.means);
  }
  SUBCASE("sample moments at t = 1 track the exact filter") {
    auto model = scalar_benchmark();
    auto [sig, obs] = simulate_truth_and_obs(model, 10, 1, 4242);
    (void)sig;
    const int l = 7, N = 10000;
    const KbfRunResult ref = kbf_run(model, obs, l);
    const OracleRunResult oracle = iid_oracle_run(model, obs, l, N, {4242, 0});
    const Vector m_exact = ref.means.col(ref.means.cols() - 1);
    const Matrix p_exact = ref.covs.back();
    const Vector m_hat = particle_mean(oracle.final_particles.particles);
    const Matrix centered =
        oracle.final_particles.particles.colwise() - m_hat;
    const Matrix p_hat = centered * centered.transpose() / double(N - 1);
    CHECK(std::abs(m_hat[0] - m_exact[0]) < 0.05 * std::abs(m_exact[0]));
    CHECK(std::abs(p_hat(0, 0) - p_exact(0, 0)) < 0.05 * p_exact(0, 0));
  }
  SUBCASE("sample mean converges at the Monte Carlo rate") {
    auto model = scalar_benchmark();
    auto [sig, obs] = simulate_truth_and_obs(model, 8, 1, 99);
    (void)sig;
    const int l = 5;
    const KbfRunResult ref = kbf_run(model, obs, l);
    const double m_exact = ref.means(0, ref.means.cols() - 1);
    const int reps = 200;
    auto rmse = [&](int N) {
      std::vector<double> sq(static_cast<size_t>(reps));
      parallel_for(reps, [&](std::int64_t r) {
        const OracleRunResult o = iid_oracle_run(model, obs, l, N, {99, std::uint32_t(r)});
        const double err = o.mean_path(0, o.mean_path.cols() - 1) - m_exact;
        sq[size_t(r)] = err * err;
      });
      return std::sqrt(kahan_mean(sq));
    };
    const double ratio = rmse(64) / rmse(256);
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.5);
  }
  SUBCASE("bit-reproducible under one seed") {
    auto model = scalar_benchmark();
    auto [sig, obs] = simulate_truth_and_obs(model, 6, 1, 5);
    (void)sig;
    const OracleRunResult a = iid_oracle_run(model, obs, 5, 32, {77, 3});
    const OracleRunResult b = iid_oracle_run(model, obs, 5, 32, {77, 3});
    CHECK(a.log_nc == b.log_nc);
    CHECK(a.final_particles.particles == b.final_particles.particles);
  }
}
