#include "geosde/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace geosde {

namespace {

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw std::invalid_argument(std::string(what) + ": expected a non-empty square matrix");
  }
}

SymEigResult sort_descending(Vector values, const Matrix& vectors) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  SymEigResult out{Vector(n), Matrix(vectors.rows(), n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = values[order[k]];
    for (std::size_t r = 0; r < vectors.rows(); ++r) out.vectors(r, k) = vectors(r, order[k]);
  }
  return out;
}

// Eigenvalues of a symmetric 3x3 matrix, descending (trigonometric method).
Vector sym_eigenvalues3(const Matrix& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
  if (p1 == 0.0) {
    Vector v{a(0, 0), a(1, 1), a(2, 2)};
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
  }
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Matrix b = a;
  for (int i = 0; i < 3; ++i) b(i, i) -= q;
  b *= 1.0 / p;
  const double det_b = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                       b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                       b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
  const double r = std::clamp(det_b / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  const double e2 = 3.0 * q - e1 - e3;
  return {e1, e2, e3};
}

}  // namespace

SymEigResult sym_eig2(const Matrix& a) {
  if (a.rows() != 2 || a.cols() != 2) throw std::invalid_argument("sym_eig2: expected 2x2");
  const double p = a(0, 0);
  const double b = a(0, 1);
  const double c = a(1, 1);
  const double half_diff = 0.5 * (p - c);
  const double radius = std::hypot(half_diff, b);
  const double mean = 0.5 * (p + c);
  const double theta = 0.5 * std::atan2(b, half_diff);
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  SymEigResult out{{mean + radius, mean - radius}, Matrix(2, 2)};
  out.vectors(0, 0) = cs;
  out.vectors(1, 0) = sn;
  out.vectors(0, 1) = -sn;
  out.vectors(1, 1) = cs;
  return out;
}

SymEigResult sym_eig(const Matrix& input, const JacobiOptions& options) {
  require_square(input, "sym_eig");
  const std::size_t n = input.rows();
  const double scale = std::max(1.0, max_abs(input));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(input(i, j) - input(j, i)) > options.symmetry_tolerance * scale)
        throw std::invalid_argument("sym_eig: matrix is not symmetric");

  Matrix a = symmetrize(input);
  Matrix v = Matrix::identity(n);
  const double total = frobenius_norm(a);
  if (total == 0.0) return sort_descending(Vector(n, 0.0), v);

  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(2.0 * off) <= options.tolerance * total) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Skip rotations that cannot change the diagonal at working precision.
        if (sweep > 3 && std::abs(apq) < 1e-18 * (std::abs(app) + std::abs(aqq))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  Vector values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  return sort_descending(std::move(values), v);
}

double min_singular_value(const Matrix& j) {
  if (j.rows() < j.cols() || j.cols() == 0)
    throw std::invalid_argument("min_singular_value: expected a tall matrix");
  if (j.cols() == 1) return norm(j.data());
  if (j.cols() == 2) {
    // sigma_min of the 2x2 triangular factor: s1 s2 = |det R|, s1^2 + s2^2 = |R|_F^2.
    const ThinQr qr = thin_qr(j);
    const double det = std::abs(qr.r(0, 0) * qr.r(1, 1));
    const double f = frobenius_sq(qr.r);
    const double disc = std::sqrt(std::max(0.0, (f - 2.0 * det) * (f + 2.0 * det)));
    const double s_max = std::sqrt(0.5 * (f + disc));
    return s_max == 0.0 ? 0.0 : det / s_max;
  }
  const Matrix gram = matmul_tn(j, j);
  if (j.cols() == 3) return std::sqrt(std::max(0.0, sym_eigenvalues3(gram)[2]));
  return std::sqrt(std::max(0.0, sym_eig(gram).values.back()));
}

ThinQr thin_qr(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw std::invalid_argument("thin_qr: expected rows >= cols");
  ThinQr out{a, Matrix(n, n)};
  Matrix& q = out.q;
  const double scale = std::max(frobenius_norm(a), 1e-300);
  std::size_t next_unit = 0;
  for (std::size_t k = 0; k < n; ++k) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < k; ++i) {
        double proj = 0.0;
        for (std::size_t r = 0; r < m; ++r) proj += q(r, i) * q(r, k);
        for (std::size_t r = 0; r < m; ++r) q(r, k) -= proj * q(r, i);
        out.r(i, k) += proj;
      }
    }
    double nk = 0.0;
    for (std::size_t r = 0; r < m; ++r) nk += q(r, k) * q(r, k);
    nk = std::sqrt(nk);
    if (nk > 1e-14 * scale) {
      out.r(k, k) = nk;
      for (std::size_t r = 0; r < m; ++r) q(r, k) /= nk;
      continue;
    }
    // Dependent column: complete the basis with a fresh unit vector.
    out.r(k, k) = 0.0;
    for (;;) {
      if (next_unit >= m) throw std::domain_error("thin_qr: cannot complete basis");
      for (std::size_t r = 0; r < m; ++r) q(r, k) = (r == next_unit) ? 1.0 : 0.0;
      ++next_unit;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < k; ++i) {
          double proj = 0.0;
          for (std::size_t r = 0; r < m; ++r) proj += q(r, i) * q(r, k);
          for (std::size_t r = 0; r < m; ++r) q(r, k) -= proj * q(r, i);
        }
      }
      double nu = 0.0;
      for (std::size_t r = 0; r < m; ++r) nu += q(r, k) * q(r, k);
      nu = std::sqrt(nu);
      if (nu > 1e-8) {
        for (std::size_t r = 0; r < m; ++r) q(r, k) /= nu;
        break;
      }
    }
  }
  return out;
}

Matrix inverse(const Matrix& input) {
  require_square(input, "inverse");
  const std::size_t n = input.rows();
  Matrix a = input;
  Matrix inv = Matrix::identity(n);
  const double scale = std::max(max_abs(input), 1e-300);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (std::abs(a(pivot, col)) <= 1e-14 * scale) throw std::domain_error("inverse: singular matrix");
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a(pivot, c), a(col, c));
        std::swap(inv(pivot, c), inv(col, c));
      }
    }
    const double d = 1.0 / a(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      a(col, c) *= d;
      inv(col, c) *= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a(r, c) -= f * a(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

Vector solve(const Matrix& a, std::span<const double> b) { return matvec(inverse(a), b); }

ClampedInverse clamped_spd_inverse(const Matrix& a, double floor) {
  require_square(a, "clamped_spd_inverse");
  const SymEigResult eig = a.rows() == 2 ? sym_eig2(a) : sym_eig(symmetrize(a));
  ClampedInverse out{Matrix(a.rows(), a.rows()), false, eig.values.back()};
  for (std::size_t k = 0; k < eig.values.size(); ++k) {
    double lam = eig.values[k];
    if (lam < floor) {
      lam = floor;
      out.clamped = true;
    }
    const double inv_lam = 1.0 / lam;
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.rows(); ++j)
        out.inverse(i, j) += inv_lam * eig.vectors(i, k) * eig.vectors(j, k);
  }
  return out;
}

Matrix sym_sqrt(const Matrix& a) {
  require_square(a, "sym_sqrt");
  const SymEigResult eig = a.rows() == 2 ? sym_eig2(a) : sym_eig(symmetrize(a));
  Matrix out(a.rows(), a.rows());
  for (std::size_t k = 0; k < eig.values.size(); ++k) {
    const double s = std::sqrt(std::max(0.0, eig.values[k]));
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.rows(); ++j)
        out(i, j) += s * eig.vectors(i, k) * eig.vectors(j, k);
  }
  return out;
}

double condition_number(const Matrix& a) {
  require_square(a, "condition_number");
  const SymEigResult eig = sym_eig(matmul_tn(a, a));
  const double lo = eig.values.back();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(eig.values.front() / lo);
}

}  // namespace geosde
