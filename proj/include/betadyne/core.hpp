#pragma once

// Dense complex linear algebra and standard quantum operators on small
// Hilbert spaces (d <= ~16). Everything here is pure and allocation-light;
// matrices are value types and safe to share across threads.
//
// Conventions used throughout the library:
//   * qubit basis order is (|e>, |g>), so sigma_z = diag(+1, -1) and
//     sigma_minus = |g><e| has its single 1 at (row 1, col 0);
//   * vectorization stacks columns: vec(rho)[i + d*j] = rho(i, j).

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace betadyne {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};

// Central tolerance record. Structural checks (hermiticity, trace,
// unitarity) use `structural`; eigensolver residuals and cross-solver
// agreement use `spectral`.
struct Tolerances {
  double structural = 1e-10;
  double spectral = 1e-8;
};

inline const Tolerances& tolerances() {
  static const Tolerances tol{};
  return tol;
}

// Thrown when an iterative numeric routine fails to converge. Dimension
// and argument errors use std::invalid_argument.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw std::invalid_argument(std::string(what) + ": matrix must be square and nonempty");
}

inline void require_same_dim(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

inline bool is_finite(const Matrix& a) {
  return a.allFinite();
}

inline bool is_hermitian(const Matrix& a, double tol = tolerances().structural) {
  if (a.rows() != a.cols()) return false;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_unitary(const Matrix& a, double tol = tolerances().structural) {
  if (a.rows() != a.cols()) return false;
  Matrix r = a.adjoint() * a - Matrix::Identity(a.rows(), a.cols());
  return r.cwiseAbs().maxCoeff() <= tol;
}

// --- standard operators -----------------------------------------------

inline Matrix identity(Eigen::Index dim) {
  if (dim < 1) throw std::invalid_argument("identity: dim must be >= 1");
  return Matrix::Identity(dim, dim);
}

inline Matrix pauli_x() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;
  m(1, 0) = 1.0;
  return m;
}

inline Matrix pauli_y() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = -kI;
  m(1, 0) = kI;
  return m;
}

inline Matrix pauli_z() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

// |e><g|: raises |g> -> |e> in the (e, g) ordering.
inline Matrix sigma_plus() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;
  return m;
}

// |g><e|
inline Matrix sigma_minus() {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}

// Truncated bosonic annihilation operator, <n-1|a|n> = sqrt(n).
inline Matrix annihilation(Eigen::Index dim) {
  if (dim < 2) throw std::invalid_argument("annihilation: dim must be >= 2");
  Matrix m = Matrix::Zero(dim, dim);
  for (Eigen::Index n = 1; n < dim; ++n) m(n - 1, n) = std::sqrt(double(n));
  return m;
}

inline Matrix number_operator(Eigen::Index dim) {
  if (dim < 2) throw std::invalid_argument("number_operator: dim must be >= 2");
  Matrix m = Matrix::Zero(dim, dim);
  for (Eigen::Index n = 0; n < dim; ++n) m(n, n) = double(n);
  return m;
}

// |i><j|
inline Matrix projector(Eigen::Index dim, Eigen::Index i, Eigen::Index j) {
  if (dim < 1 || i < 0 || j < 0 || i >= dim || j >= dim)
    throw std::invalid_argument("projector: index out of range");
  Matrix m = Matrix::Zero(dim, dim);
  m(i, j) = 1.0;
  return m;
}

inline Vector basis_ket(Eigen::Index dim, Eigen::Index i) {
  if (dim < 1 || i < 0 || i >= dim)
    throw std::invalid_argument("basis_ket: index out of range");
  Vector v = Vector::Zero(dim);
  v(i) = 1.0;
  return v;
}

// --- vectorization and superoperator building blocks -------------------

inline Matrix kron(const Matrix& a, const Matrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

// Column stacking: vec(rho)[i + d*j] = rho(i, j), so vec(A X B) = (B^T (x) A) vec(X).
inline Vector vectorize(const Matrix& rho) {
  require_square(rho, "vectorize");
  const Eigen::Index d = rho.rows();
  Vector v(d * d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) v(i + d * j) = rho(i, j);
  return v;
}

inline Matrix devectorize(const Vector& v) {
  const auto n = v.size();
  const auto d = Eigen::Index(std::llround(std::sqrt(double(n))));
  if (d * d != n) throw std::invalid_argument("devectorize: length is not a perfect square");
  Matrix rho(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) rho(i, j) = v(i + d * j);
  return rho;
}

// exp(A t), scaling-and-squaring Pade behind Eigen's MatrixFunctions.
inline Matrix matrix_exponential(const Matrix& a, double t = 1.0) {
  require_square(a, "matrix_exponential");
  if (!is_finite(a) || !std::isfinite(t))
    throw std::invalid_argument("matrix_exponential: non-finite input");
  return Matrix(a * t).exp();
}

// (1/2) sum |eig(rho - sigma)| for Hermitian arguments.
inline double trace_distance(const Matrix& rho, const Matrix& sigma) {
  require_same_dim(rho, sigma, "trace_distance");
  Matrix diff = rho - sigma;
  diff = 0.5 * (diff + diff.adjoint().eval());  // symmetrize away numeric skew
  Eigen::SelfAdjointEigenSolver<Matrix> es(diff);
  if (es.info() != Eigen::Success) throw NumericError("trace_distance: eigensolver failed");
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// Validation helper for density-matrix inputs: Hermitian, unit trace,
// nonnegative spectrum (all within tol).
inline void validate_density(const Matrix& rho, double tol = 1e-10) {
  require_square(rho, "validate_density");
  if (!is_hermitian(rho, tol))
    throw std::invalid_argument("density matrix must be Hermitian");
  if (std::abs(rho.trace() - Complex(1.0)) > tol)
    throw std::invalid_argument("density matrix must have unit trace");
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
  if (es.eigenvalues().minCoeff() < -tol)
    throw std::invalid_argument("density matrix must be positive semidefinite");
}

// Largest singular value; used for step-size guards.
inline double spectral_norm(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(a.adjoint() * a));
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

}  // namespace betadyne
