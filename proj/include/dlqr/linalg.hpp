#pragma once

#include <complex>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dlqr::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Builds a rows x cols matrix from row-major entries. Throws DimensionError
/// on a length mismatch and DomainError on a non-finite entry.
Matrix make_matrix(int rows, int cols, std::span<const double> row_major);

void require_finite(const Matrix& m, std::string_view what);
void require_square(const Matrix& m, std::string_view what);

/// Dense symmetric matrix. Construction symmetrizes its argument, so every
/// instance is exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(int dim);
  static SymMatrix zero(int dim);
  /// Fails with DomainError when `m` is farther than `tol` from symmetric.
  static SymMatrix checked(const Matrix& m, double tol);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& dense() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double s) const;

 private:
  Matrix m_;
};

double frobenius(const Matrix& m);

/// All eigenvalues of a general square matrix: balancing, Householder
/// reduction to Hessenberg form, then Francis double-shift QR. Throws
/// ConvergenceError when the QR sweeps exceed 30 * dim.
std::vector<std::complex<double>> eigenvalues(const Matrix& m);

/// max |lambda_i(m)|.
double spectral_radius(const Matrix& m);

/// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
std::vector<double> eigenvalues_sym(const SymMatrix& m);
double min_eig_sym(const SymMatrix& m);
double max_eig_sym(const SymMatrix& m);

/// 1e-9 * (1 + ||m||).
double default_pd_margin(const SymMatrix& m);

/// True iff the Cholesky factorization of m - margin * I succeeds.
bool is_pd(const SymMatrix& m, double margin);

/// Solves m * w = rhs by LU with partial pivoting. A pivot below
/// 1e-13 * ||m|| raises SingularityError.
Matrix solve_linear(const Matrix& m, const Matrix& rhs);

/// 2-norm condition number, +inf for singular input.
double condition_number(const Matrix& m);

Matrix kron(const Matrix& a, const Matrix& b);

/// Column-major vectorization and its inverse.
Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, int rows, int cols);

}  // namespace dlqr::linalg
