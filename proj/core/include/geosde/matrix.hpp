#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace geosde {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Sized for the small Jacobians, metrics
/// and covariances of a d-dimensional chart in R^D (D up to a few hundred).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);
  /// Column matrix from a vector.
  static Matrix column(std::span<const double> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  Vector col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> v);

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  Matrix transpose() const;
  /// Columns [first, first + count).
  Matrix cols_range(std::size_t first, std::size_t count) const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);

Vector matvec(const Matrix& a, std::span<const double> x);
/// a^T x without forming the transpose.
Vector matvec_t(const Matrix& a, std::span<const double> x);
/// a^T b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a b^T without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// Horizontal concatenation [a | b].
Matrix hconcat(const Matrix& a, const Matrix& b);
Matrix outer(std::span<const double> a, std::span<const double> b);

double trace(const Matrix& a);
double frobenius_norm(const Matrix& a);
double frobenius_sq(const Matrix& a);
/// <a, b>_F = sum_ij a_ij b_ij.
double frobenius_inner(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);
/// 0.5 (a + a^T)
Matrix symmetrize(const Matrix& a);
bool all_finite(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double squared_norm(std::span<const double> a);
Vector add(std::span<const double> a, std::span<const double> b);
Vector sub(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> a, double s);
/// y += s x
void axpy(double s, std::span<const double> x, std::span<double> y);
bool all_finite(std::span<const double> v);

}  // namespace geosde
