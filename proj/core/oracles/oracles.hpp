#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "geosde/chart.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/geometry.hpp"
#include "geosde/matrix.hpp"
#include "geosde/mlp.hpp"

namespace geosde::oracle {

/// Loop-over-indices evaluation through Mlp::weight / Mlp::bias only.
Vector reference_forward(const Mlp& net, std::span<const double> x);

/// Value, Jacobian and every output's full input Hessian, propagated layer
/// by layer in closed form (no dual numbers, no finite differences).
struct NetworkDerivatives {
  Vector value;
  Matrix jacobian;               // out x in
  std::vector<Matrix> hessians;  // one in x in matrix per output
};
NetworkDerivatives reference_derivatives(const Mlp& net, std::span<const double> x);

using VectorFn = std::function<Vector(std::span<const double>)>;
using ScalarFn = std::function<double(std::span<const double>)>;

/// Central differences, column k = (f(x + h e_k) - f(x - h e_k)) / 2h.
Matrix fd_jacobian(const VectorFn& f, std::span<const double> x, double h = 1e-6);
Vector fd_gradient(const ScalarFn& f, std::span<const double> x, double h = 1e-6);
/// d/dtheta of seed^T f(x), perturbing one parameter at a time.
Vector fd_param_gradient(const Mlp& net, std::span<const double> x, std::span<const double> seed,
                         double h = 1e-6);

/// Solve a x = b by Gauss-Jordan with partial pivoting (square a).
Matrix gauss_jordan_solve(Matrix a, Matrix b);

/// 1/2 ||J (J^T J)^{-1} J^T - U U^T||_F^2 with both projectors formed densely.
double dense_tangent_loss(const Matrix& j, const Matrix& u);

/// sum_ab Lambda_ab H^j_ab with H^j the dense Hessian of encoder output j.
Vector dense_hessian_contraction(const Mlp& encoder, std::span<const double> x,
                                 const Matrix& lambda);

/// max |a - b| / max(1, |b|) over entries.
double rel_error(std::span<const double> a, std::span<const double> b);
/// ||a - b||_2 / max(||b||_2, floor).
double rel_norm_error(std::span<const double> a, std::span<const double> b,
                      double floor = 1e-12);

/// phi(u, v) = (u, v, 0, ..., 0), pi(x) = (x1, x2).
class FlatChart final : public Chart {
 public:
  explicit FlatChart(std::size_t ambient_dim) : dim_(ambient_dim) {}
  std::size_t latent_dim() const override { return 2; }
  std::size_t ambient_dim() const override { return dim_; }
  Vector decode(std::span<const double> z) const override;
  Matrix decoder_jacobian(std::span<const double> z) const override;
  Vector decoder_second_directional(std::span<const double> z,
                                    std::span<const double> v) const override;
  Vector encode(std::span<const double> x) const override;
  Matrix encoder_jacobian(std::span<const double> x) const override;
  Vector encoder_hvp(std::span<const double> x, std::size_t j,
                     std::span<const double> v) const override;

 private:
  std::size_t dim_;
};

/// Constant-velocity, noise-free latent motion.
class ConstantDriftSde final : public LatentSde {
 public:
  explicit ConstantDriftSde(Vector velocity) : velocity_(std::move(velocity)) {}
  Vector drift(std::span<const double>) const override { return velocity_; }
  Matrix diffusion(std::span<const double>) const override { return Matrix(2, 2); }

 private:
  Vector velocity_;
};

}  // namespace geosde::oracle
