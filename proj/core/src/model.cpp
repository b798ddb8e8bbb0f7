#include "mlkbf/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "mlkbf/errors.hpp"
#include "mlkbf/rng.hpp"

namespace mlkbf {

namespace {

bool is_symmetric(const Matrix& M, double tol) {
  if (M.rows() != M.cols()) return false;
  const double scale = 1.0 + M.cwiseAbs().maxCoeff();
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

// Symmetric PSD square root via eigendecomposition; negative eigenvalues
// within rounding of zero are clamped.
Matrix psd_sqrt(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  Vector ev = es.eigenvalues();
  const double floor_val = -1e-10 * (1.0 + std::abs(ev.cwiseAbs().maxCoeff()));
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < floor_val) throw DimensionMismatch("P0 is not positive semidefinite");
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void finalize_derived(ModelSpec& m, bool validate) {
  const int dx = m.dx, dy = m.dy;
  if (m.C.rows() != dy || m.C.cols() != dx) throw DimensionMismatch("C must be dy x dx");
  if (m.Q_sqrt.rows() != dx || m.Q_sqrt.cols() != dx) throw DimensionMismatch("Q_sqrt must be dx x dx");
  if (m.R_sqrt.rows() != dy || m.R_sqrt.cols() != dy) throw DimensionMismatch("R_sqrt must be dy x dy");
  if (m.M0.size() != dx) throw DimensionMismatch("M0 must have length dx");
  if (m.P0.rows() != dx || m.P0.cols() != dx) throw DimensionMismatch("P0 must be dx x dx");

  if (validate) {
    if (!is_symmetric(m.R_sqrt, 1e-12)) throw SingularRsqrt("R_sqrt must be symmetric");
    if (!is_symmetric(m.P0, 1e-10)) throw DimensionMismatch("P0 must be symmetric");
  }

  Eigen::FullPivLU<Matrix> lu(m.R_sqrt);
  const bool invertible = lu.isInvertible();
  if (validate) {
    if (!invertible) throw SingularRsqrt("R_sqrt is singular");
    // Condition estimate from the pivots of the LU factorization.
    const Vector diag = lu.matrixLU().diagonal().cwiseAbs();
    const double cond = diag.maxCoeff() / diag.minCoeff();
    if (!(cond < 1e12)) throw SingularRsqrt("R_sqrt condition estimate exceeds 1e12");
  }
  if (invertible) {
    const Matrix R = m.R_sqrt * m.R_sqrt;
    m.R_inv = R.fullPivLu().inverse();
    m.S = m.C.transpose() * m.R_inv * m.C;
    // Rounding in C' R^{-1} C breaks symmetry at machine level.
    m.S = 0.5 * (m.S + m.S.transpose()).eval();
  }
  m.P0_sqrt = psd_sqrt(m.P0);
}

}  // namespace

const Matrix& ModelSpec::A() const {
  if (!is_linear()) throw DimensionMismatch("model drift is nonlinear, no A matrix");
  return std::get<LinearDrift>(drift).A;
}

const Matrix& ModelSpec::r_inv() const {
  if (R_inv.size() == 0) throw SingularRsqrt("R_sqrt singular: R^{-1} unavailable");
  return R_inv;
}

const Matrix& ModelSpec::s() const {
  if (S.size() == 0) throw SingularRsqrt("R_sqrt singular: S unavailable");
  return S;
}

ModelSpec build_linear_model(const Matrix& A, const Matrix& C, const Matrix& Q_sqrt,
                             const Matrix& R_sqrt, const Vector& M0, const Matrix& P0) {
  if (A.rows() != A.cols()) throw DimensionMismatch("A must be square");
  ModelSpec m;
  m.dx = int(A.rows());
  m.dy = int(C.rows());
  m.drift = LinearDrift{A};
  m.C = C;
  m.Q_sqrt = Q_sqrt;
  m.R_sqrt = R_sqrt;
  m.M0 = M0;
  m.P0 = P0;
  finalize_derived(m, /*validate=*/true);
  return m;
}

ModelSpec build_nonlinear_model(NonlinearDrift drift, const Matrix& C, const Matrix& Q_sqrt,
                                const Matrix& R_sqrt, const Vector& M0, const Matrix& P0) {
  ModelSpec m;
  m.dx = int(Q_sqrt.rows());
  m.dy = int(C.rows());
  m.drift = std::move(drift);
  m.C = C;
  m.Q_sqrt = Q_sqrt;
  m.R_sqrt = R_sqrt;
  m.M0 = M0;
  m.P0 = P0;
  finalize_derived(m, /*validate=*/true);
  return m;
}

ModelSpec make_model_unchecked(std::variant<LinearDrift, NonlinearDrift> drift, const Matrix& C,
                               const Matrix& Q_sqrt, const Matrix& R_sqrt, const Vector& M0,
                               const Matrix& P0) {
  ModelSpec m;
  m.dx = int(Q_sqrt.rows());
  m.dy = int(C.rows());
  m.drift = std::move(drift);
  m.C = C;
  m.Q_sqrt = Q_sqrt;
  m.R_sqrt = R_sqrt;
  m.M0 = M0;
  m.P0 = P0;
  finalize_derived(m, /*validate=*/false);
  return m;
}

Vector drift_eval(const ModelSpec& model, const Vector& x) {
  if (x.size() != model.dx) throw DimensionMismatch("drift_eval: state has wrong length");
  if (model.is_linear()) return std::get<LinearDrift>(model.drift).A * x;
  return std::get<NonlinearDrift>(model.drift).f(x);
}

void drift_eval_batch(const ModelSpec& model, const Matrix& states, Matrix& out) {
  if (states.rows() != model.dx) throw DimensionMismatch("drift_eval_batch: wrong state dimension");
  if (model.is_linear()) {
    out.noalias() = std::get<LinearDrift>(model.drift).A * states;
    return;
  }
  const auto& f = std::get<NonlinearDrift>(model.drift).f;
  out.resize(states.rows(), states.cols());
  for (Eigen::Index i = 0; i < states.cols(); ++i) {
    out.col(i) = f(states.col(i));
  }
}

Vector lorenz63_drift(const Vector& x, const Vector& theta) {
  if (x.size() != 3) throw DimensionMismatch("lorenz63_drift: state must be 3-dimensional");
  if (theta.size() != 3) throw DimensionMismatch("lorenz63_drift: theta must have 3 entries");
  Vector f(3);
  f[0] = theta[0] * (x[1] - x[0]);
  f[1] = theta[1] * x[0] - x[1] - x[0] * x[2];
  f[2] = x[0] * x[1] - theta[2] * x[2];
  return f;
}

Vector lorenz96_drift(const Vector& x, double theta) {
  const int d = int(x.size());
  if (d < 4) throw DimensionTooSmall("lorenz96_drift: needs dx >= 4");
  Vector f(d);
  for (int i = 0; i < d; ++i) {
    const int ip1 = (i + 1) % d;
    const int im1 = (i - 1 + d) % d;
    const int im2 = (i - 2 + d) % d;
    f[i] = (x[ip1] - x[im2]) * x[im1] - x[i] + theta;
  }
  return f;
}

std::pair<Matrix, Matrix> lorenz63_observation_operators(int r2) {
  auto q = [](double x) {
    if (x < 0.0 || x > 1.0) return 0.0;
    return 1.0 - 1.5 * x + 0.5 * x * x * x;
  };
  Matrix C = Matrix::Zero(3, 3);
  for (int i = 0; i < 3; ++i) {
    C(i, i) = 0.5;
    if (i + 1 < 3) C(i, i + 1) = 0.5;
  }
  Matrix R_sqrt(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int dist = std::min(std::abs(i - j), r2 - std::abs(i - j));
      R_sqrt(i, j) = 2.0 * q(0.4 * dist);
    }
  }
  return {C, R_sqrt};
}

Matrix random_uniform_matrix(int rows, int cols, std::uint64_t seed) {
  RandomStream stream(seed, {Purpose::MatrixC, 0, 0, 0});
  Matrix M(rows, cols);
  std::uint64_t k = 0;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      M(i, j) = stream.uniform(k++);
    }
  }
  return M;
}

ModelSpec make_ou5_model(std::uint64_t seed) {
  const int d = 5;
  Matrix A = -0.8 * Matrix::Identity(d, d);
  Matrix Q_sqrt = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    Q_sqrt(i, i) = 2.0 / 3.0;
    if (i + 1 < d) {
      Q_sqrt(i, i + 1) = 1.0 / 3.0;
      Q_sqrt(i + 1, i) = 1.0 / 3.0;
    }
  }
  const Matrix C = random_uniform_matrix(d, d, seed);
  const Matrix R_sqrt = 2.0 * Matrix::Identity(d, d);
  const Vector M0 = Vector::Constant(d, 0.1);
  const Matrix P0 = 0.05 * Matrix::Identity(d, d);
  return build_linear_model(A, C, Q_sqrt, R_sqrt, M0, P0);
}

ModelSpec make_scalar_ou_model() {
  Matrix A(1, 1), C(1, 1), Q(1, 1), R(1, 1), P0(1, 1);
  A << -0.8;
  C << 1.0;
  Q << 1.0;
  R << 2.0;
  P0 << 0.05;
  Vector M0(1);
  M0 << 0.1;
  return build_linear_model(A, C, Q, R, M0, P0);
}

ModelSpec make_lorenz63_model(const Vector& theta) {
  auto [C, R_sqrt] = lorenz63_observation_operators();
  NonlinearDrift drift;
  drift.theta = ThetaVector{theta, {"theta1", "theta2", "theta3"}};
  Vector th = theta;
  drift.f = [th](const Vector& x) { return lorenz63_drift(x, th); };
  drift.name = "lorenz63";
  const Matrix Q_sqrt = Matrix::Identity(3, 3);
  const Vector M0 = Vector::Ones(3);
  const Matrix P0 = 0.5 * Matrix::Identity(3, 3);
  return build_nonlinear_model(std::move(drift), C, Q_sqrt, R_sqrt, M0, P0);
}

ModelSpec make_lorenz96_model(double theta, bool gaussian_init, int dx) {
  NonlinearDrift drift;
  Vector th(1);
  th << theta;
  drift.theta = ThetaVector{th, {"theta"}};
  drift.f = [theta](const Vector& x) { return lorenz96_drift(x, theta); };
  drift.name = "lorenz96";
  const Matrix C = Matrix::Identity(dx, dx);
  const Matrix Q_sqrt = std::sqrt(2.0) * Matrix::Identity(dx, dx);
  const Matrix R_sqrt = 0.5 * Matrix::Identity(dx, dx);
  Vector M0 = Vector::Constant(dx, 8.0);
  Matrix P0;
  if (gaussian_init) {
    P0 = 0.05 * Matrix::Identity(dx, dx);
  } else {
    M0[0] = 8.01;
    P0 = Matrix::Zero(dx, dx);
  }
  return build_nonlinear_model(std::move(drift), C, Q_sqrt, R_sqrt, M0, P0);
}

ModelSpec make_linear2d_model(const Vector& theta, std::uint64_t seed) {
  if (theta.size() != 2) throw DimensionMismatch("linear2d family has two parameters");
  const int d = 2;
  const Matrix A = theta[0] * Matrix::Identity(d, d);
  Matrix Qbase = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    Qbase(i, i) = 1.0;
    if (i + 1 < d) {
      Qbase(i, i + 1) = 0.5;
      Qbase(i + 1, i) = 0.5;
    }
  }
  const Matrix C = random_uniform_matrix(d, d, seed);
  const Matrix R_sqrt = 0.556 * Matrix::Identity(d, d);
  const Vector M0 = Vector::Constant(d, 4.0);
  const Matrix P0 = Matrix::Identity(d, d);
  return build_linear_model(A, C, theta[1] * Qbase, R_sqrt, M0, P0);
}

}  // namespace mlkbf
