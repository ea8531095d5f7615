#include "geosde/chart.hpp"

#include <stdexcept>
#include <utility>

#include "geosde/linalg.hpp"

namespace geosde {

namespace {

SymEigResult small_eig(const Matrix& s) {
  return s.rows() == 2 ? sym_eig2(s) : sym_eig(symmetrize(s));
}

// Sum over eigenpairs of S of lambda_k * f(e_k), f returning a vector.
template <typename F>
Vector contract_by_eigen(const Matrix& s, std::size_t out_dim, F&& f) {
  Vector out(out_dim, 0.0);
  const SymEigResult eig = small_eig(s);
  for (std::size_t k = 0; k < eig.values.size(); ++k) {
    if (eig.values[k] == 0.0) continue;
    const Vector e = eig.vectors.col(k);
    axpy(eig.values[k], f(e), out);
  }
  return out;
}

}  // namespace

Vector Chart::cycle_second_directional(std::span<const double> z,
                                       std::span<const double> v) const {
  const Vector x = decode(z);
  const Vector xdot = matvec(decoder_jacobian(z), v);
  const Vector xddot = decoder_second_directional(z, v);
  Vector out = matvec(encoder_jacobian(x), xddot);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += dot(xdot, encoder_hvp(x, j, xdot));
  return out;
}

Vector Chart::ito_correction(std::span<const double> z, const Matrix& s) const {
  if (s.rows() != latent_dim() || s.cols() != latent_dim())
    throw std::invalid_argument("Chart::ito_correction: S must be d x d");
  return contract_by_eigen(s, ambient_dim(),
                           [&](const Vector& e) { return decoder_second_directional(z, e); });
}

Vector Chart::cycle_contraction(std::span<const double> z, const Matrix& s) const {
  if (s.rows() != latent_dim() || s.cols() != latent_dim())
    throw std::invalid_argument("Chart::cycle_contraction: S must be d x d");
  return contract_by_eigen(s, latent_dim(),
                           [&](const Vector& e) { return cycle_second_directional(z, e); });
}

Matrix Chart::metric(std::span<const double> z) const {
  const Matrix j = decoder_jacobian(z);
  return matmul_tn(j, j);
}

// --- LearnedChart ----------------------------------------------------------

LearnedChart::LearnedChart(Mlp encoder, Mlp decoder)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  if (encoder_.input_dim() != decoder_.output_dim() ||
      encoder_.output_dim() != decoder_.input_dim())
    throw std::invalid_argument("LearnedChart: encoder/decoder widths do not pair up");
}

Vector LearnedChart::decode(std::span<const double> z) const { return mlp_forward(decoder_, z); }

Matrix LearnedChart::decoder_jacobian(std::span<const double> z) const {
  return mlp_input_jacobian(decoder_, z);
}

Vector LearnedChart::decoder_second_directional(std::span<const double> z,
                                                std::span<const double> v) const {
  return mlp_second_directional(decoder_, z, v).second;
}

Vector LearnedChart::encode(std::span<const double> x) const { return mlp_forward(encoder_, x); }

Matrix LearnedChart::encoder_jacobian(std::span<const double> x) const {
  return mlp_input_jacobian(encoder_, x);
}

Vector LearnedChart::encoder_hvp(std::span<const double> x, std::size_t j,
                                 std::span<const double> v) const {
  return mlp_input_hvp(encoder_, x, j, v);
}

Vector LearnedChart::cycle_second_directional(std::span<const double> z,
                                              std::span<const double> v) const {
  return mlp_second_directional(Mlp::compose(encoder_, decoder_), z, v).second;
}

// --- LinearReparamChart ----------------------------------------------------

LinearReparamChart::LinearReparamChart(std::shared_ptr<const Chart> base, Matrix a)
    : base_(std::move(base)), a_(std::move(a)) {
  if (!base_) throw std::invalid_argument("LinearReparamChart: null base chart");
  if (a_.rows() != base_->latent_dim() || a_.cols() != base_->latent_dim())
    throw std::invalid_argument("LinearReparamChart: A must be d x d");
  a_inv_ = inverse(a_);
}

Vector LinearReparamChart::decode(std::span<const double> w) const {
  return base_->decode(matvec(a_, w));
}

Matrix LinearReparamChart::decoder_jacobian(std::span<const double> w) const {
  return base_->decoder_jacobian(matvec(a_, w)) * a_;
}

Vector LinearReparamChart::decoder_second_directional(std::span<const double> w,
                                                      std::span<const double> v) const {
  return base_->decoder_second_directional(matvec(a_, w), matvec(a_, v));
}

Vector LinearReparamChart::encode(std::span<const double> x) const {
  return matvec(a_inv_, base_->encode(x));
}

Matrix LinearReparamChart::encoder_jacobian(std::span<const double> x) const {
  return a_inv_ * base_->encoder_jacobian(x);
}

Vector LinearReparamChart::encoder_hvp(std::span<const double> x, std::size_t j,
                                       std::span<const double> v) const {
  Vector out(x.size(), 0.0);
  for (std::size_t k = 0; k < a_inv_.cols(); ++k) {
    if (a_inv_(j, k) == 0.0) continue;
    axpy(a_inv_(j, k), base_->encoder_hvp(x, k, v), out);
  }
  return out;
}

Vector LinearReparamChart::cycle_second_directional(std::span<const double> w,
                                                    std::span<const double> v) const {
  return matvec(a_inv_, base_->cycle_second_directional(matvec(a_, w), matvec(a_, v)));
}

// --- ShearChart ------------------------------------------------------------

ShearChart::ShearChart(std::shared_ptr<const Chart> base, double c)
    : base_(std::move(base)), c_(c) {
  if (!base_ || base_->latent_dim() != 2)
    throw std::invalid_argument("ShearChart: needs a 2-d base chart");
}

Vector ShearChart::forward(std::span<const double> w) const {
  return {w[0] + c_ * w[1] * w[1], w[1]};
}

Vector ShearChart::backward(std::span<const double> z) const {
  return {z[0] - c_ * z[1] * z[1], z[1]};
}

Vector ShearChart::decode(std::span<const double> w) const { return base_->decode(forward(w)); }

Matrix ShearChart::decoder_jacobian(std::span<const double> w) const {
  const Matrix dalpha{{1.0, 2.0 * c_ * w[1]}, {0.0, 1.0}};
  return base_->decoder_jacobian(forward(w)) * dalpha;
}

Vector ShearChart::decoder_second_directional(std::span<const double> w,
                                              std::span<const double> v) const {
  const Vector y = forward(w);
  const Vector ydot{v[0] + 2.0 * c_ * w[1] * v[1], v[1]};
  const Vector yddot{2.0 * c_ * v[1] * v[1], 0.0};
  Vector out = base_->decoder_second_directional(y, ydot);
  axpy(1.0, matvec(base_->decoder_jacobian(y), yddot), out);
  return out;
}

Vector ShearChart::encode(std::span<const double> x) const { return backward(base_->encode(x)); }

Matrix ShearChart::encoder_jacobian(std::span<const double> x) const {
  const Vector z = base_->encode(x);
  const Matrix dinv{{1.0, -2.0 * c_ * z[1]}, {0.0, 1.0}};
  return dinv * base_->encoder_jacobian(x);
}

Vector ShearChart::encoder_hvp(std::span<const double> x, std::size_t j,
                               std::span<const double> v) const {
  const Vector z = base_->encode(x);
  const Matrix dpi = base_->encoder_jacobian(x);
  const double dinv[2][2] = {{1.0, -2.0 * c_ * z[1]}, {0.0, 1.0}};
  Vector out(x.size(), 0.0);
  for (std::size_t k = 0; k < 2; ++k) {
    if (dinv[j][k] != 0.0) axpy(dinv[j][k], base_->encoder_hvp(x, k, v), out);
  }
  if (j == 0) {
    // grad^2 (alpha^{-1})^1 = diag(0, -2c), pulled back through Dpi.
    const double s = -2.0 * c_ * dot(dpi.row(1), v);
    axpy(s, dpi.row(1), out);
  }
  return out;
}

}  // namespace geosde
