#pragma once

#include <cstddef>

#include "geosde/matrix.hpp"

namespace geosde {

/// Spectral decomposition A = Q diag(values) Q^T with values sorted descending
/// and the columns of `vectors` orthonormal.
struct SymEigResult {
  Vector values;
  Matrix vectors;
};

struct JacobiOptions {
  double tolerance = 1e-12;  // relative off-diagonal Frobenius mass
  int max_sweeps = 100;
  double symmetry_tolerance = 1e-10;
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Throws
/// std::invalid_argument if `a` is not square or not symmetric within
/// `symmetry_tolerance * max(1, max|a_ij|)`.
SymEigResult sym_eig(const Matrix& a, const JacobiOptions& options = {});

/// Closed-form eigen-decomposition of a symmetric 2x2 matrix (uses only the
/// upper triangle).
SymEigResult sym_eig2(const Matrix& a);

/// Smallest singular value of a tall matrix (rows >= cols). Closed form for
/// cols <= 3, Jacobi on the Gram matrix otherwise.
double min_singular_value(const Matrix& j);

/// Thin QR via twice-iterated modified Gram-Schmidt. Rank-deficient columns
/// get an arbitrary orthonormal completion and a zero diagonal entry in R.
struct ThinQr {
  Matrix q;  // rows x cols, orthonormal columns
  Matrix r;  // cols x cols, upper triangular
};
ThinQr thin_qr(const Matrix& a);

/// General inverse by Gauss-Jordan with partial pivoting. Throws
/// std::domain_error if the matrix is numerically singular.
Matrix inverse(const Matrix& a);

/// Inverse of a symmetric positive semi-definite matrix with eigenvalues
/// clamped from below at `floor`. `clamped` reports whether any eigenvalue
/// was raised.
struct ClampedInverse {
  Matrix inverse;
  bool clamped = false;
  double min_eigenvalue = 0.0;
};
ClampedInverse clamped_spd_inverse(const Matrix& a, double floor);

/// Principal square root of a symmetric PSD matrix (negative eigenvalues are
/// treated as zero). Closed form for 2x2.
Matrix sym_sqrt(const Matrix& a);

/// Solve a x = b for small square `a` (partial pivoting).
Vector solve(const Matrix& a, std::span<const double> b);

/// 2-norm condition number sigma_max / sigma_min of a square matrix.
double condition_number(const Matrix& a);

}  // namespace geosde
