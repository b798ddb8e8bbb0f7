#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace mlkbf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Static model parameters with human-readable labels.
struct ThetaVector {
  Vector values;
  std::vector<std::string> names;

  int size() const { return int(values.size()); }
};

struct LinearDrift {
  Matrix A;
};

struct NonlinearDrift {
  std::function<Vector(const Vector&)> f;
  ThetaVector theta;
  std::string name;  // "lorenz63", "lorenz96", ...
};

/// Continuous-time state-space model
///
///   dX_t = drift(X_t) dt + Q^{1/2} dW_t
///   dY_t = C X_t dt + R^{1/2} dV_t,   Y_0 = 0
///
/// Noise square roots are stored directly; R^{-1}, S = C' R^{-1} C and a
/// symmetric square root of P0 are cached at construction. Immutable after
/// construction and safe to share across workers.
struct ModelSpec {
  int dx = 0;
  int dy = 0;
  std::variant<LinearDrift, NonlinearDrift> drift;
  Matrix C;
  Matrix Q_sqrt;
  Matrix R_sqrt;
  Vector M0;
  Matrix P0;

  // Derived at construction. R_inv/S are empty when R_sqrt is singular
  // (unchecked construction only); any use then throws SingularRsqrt.
  Matrix R_inv;
  Matrix S;
  Matrix P0_sqrt;

  bool is_linear() const { return std::holds_alternative<LinearDrift>(drift); }
  const Matrix& A() const;
  const Matrix& r_inv() const;
  const Matrix& s() const;
};

/// Validating constructor: checks dimensions, symmetry of R_sqrt and
/// invertibility (rejects condition estimates above 1e12), precomputes
/// R^{-1} and S.
ModelSpec build_linear_model(const Matrix& A, const Matrix& C, const Matrix& Q_sqrt,
                             const Matrix& R_sqrt, const Vector& M0, const Matrix& P0);

ModelSpec build_nonlinear_model(NonlinearDrift drift, const Matrix& C, const Matrix& Q_sqrt,
                                const Matrix& R_sqrt, const Vector& M0, const Matrix& P0);

/// Non-validating assembly for degenerate test setups (e.g. R_sqrt = 0).
/// Derived inverses are left empty when R_sqrt is singular.
ModelSpec make_model_unchecked(std::variant<LinearDrift, NonlinearDrift> drift, const Matrix& C,
                               const Matrix& Q_sqrt, const Matrix& R_sqrt, const Vector& M0,
                               const Matrix& P0);

/// A x for linear drift, f(x) otherwise.
Vector drift_eval(const ModelSpec& model, const Vector& x);

/// Columnwise drift over an ensemble (dx x N), written into out.
void drift_eval_batch(const ModelSpec& model, const Matrix& states, Matrix& out);

/// (th1 (x2-x1), th2 x1 - x2 - x1 x3, x1 x2 - th3 x3)
Vector lorenz63_drift(const Vector& x, const Vector& theta);

/// f_i = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + theta, indices cyclic.
/// Requires dx >= 4 so the stencil never self-overlaps.
Vector lorenz96_drift(const Vector& x, double theta);

/// Observation pair for the Lorenz 63 model: C is 1/2 on the diagonal and
/// first superdiagonal; (R^{1/2})_{ij} = 2 q((2/5) min(|i-j|, r2-|i-j|))
/// with q(x) = 1 - 3x/2 + x^3/2 on [0,1] and 0 otherwise.
std::pair<Matrix, Matrix> lorenz63_observation_operators(int r2 = 3);

// ---- Presets -------------------------------------------------------------

/// 5-dimensional OU benchmark: A = -0.8 Id, M0 = 0.1, P0 = 0.05 Id,
/// R^{1/2} = 2 Id, Q^{1/2} tridiagonal(1/3, 2/3, 1/3), C random with
/// entries i.i.d. U(0,1) drawn from `seed` (recorded in the returned spec).
ModelSpec make_ou5_model(std::uint64_t seed);

/// Scalar OU analogue of the 5-d benchmark (a = -0.8, c = 1, r^{1/2} = 2,
/// q^{1/2} = 1, M0 = 0.1, P0 = 0.05).
ModelSpec make_scalar_ou_model();

ModelSpec make_lorenz63_model(const Vector& theta);

/// d = 40 Lorenz 96 with external forcing theta, Q^{1/2} = sqrt(2) Id,
/// R^{1/2} = 0.5 Id, C = Id. `gaussian_init` switches the initial law from
/// the point mass at (8.01, 8, ..., 8) to N(8, 0.05 Id) (needed by the
/// transport variant, whose ensemble otherwise never leaves a point).
ModelSpec make_lorenz96_model(double theta, bool gaussian_init = false, int dx = 40);

/// 2-d parameter-estimation family: A = th1 Id, Q^{1/2} = th2 tridiag(1/2,1,1/2),
/// C random U(0,1) from `seed`, R^{1/2} = 0.556 Id, X0 ~ N(4, Id).
ModelSpec make_linear2d_model(const Vector& theta, std::uint64_t seed);

/// Uniform U(0,1) matrix drawn from the MatrixC stream of `seed`, row-major
/// draw order; used for the presets with unspecified observation matrices.
Matrix random_uniform_matrix(int rows, int cols, std::uint64_t seed);

}  // namespace mlkbf
