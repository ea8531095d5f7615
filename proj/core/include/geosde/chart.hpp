#pragma once

#include <cstddef>
#include <memory>
#include <span>

#include "geosde/matrix.hpp"
#include "geosde/mlp.hpp"

namespace geosde {

/// Encoder/decoder pair pi: R^D -> R^d, phi: R^d -> R^D with the derivative
/// queries the Ito rules need. Implementations must be safe for concurrent
/// const use.
class Chart {
 public:
  virtual ~Chart() = default;

  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t ambient_dim() const = 0;

  virtual Vector decode(std::span<const double> z) const = 0;
  /// D x d.
  virtual Matrix decoder_jacobian(std::span<const double> z) const = 0;
  /// Component-wise v^T grad^2 phi^i(z) v, length D.
  virtual Vector decoder_second_directional(std::span<const double> z,
                                            std::span<const double> v) const = 0;

  virtual Vector encode(std::span<const double> x) const = 0;
  /// d x D.
  virtual Matrix encoder_jacobian(std::span<const double> x) const = 0;
  /// grad^2 pi^j(x) v.
  virtual Vector encoder_hvp(std::span<const double> x, std::size_t j,
                             std::span<const double> v) const = 0;

  /// v^T D^2(pi o phi)(z) v for every latent component. The default goes
  /// through the decoder second directional and encoder HVPs.
  virtual Vector cycle_second_directional(std::span<const double> z,
                                          std::span<const double> v) const;

  /// q(S)^i = <S, grad^2 phi^i(z)>_F for symmetric d x d S.
  Vector ito_correction(std::span<const double> z, const Matrix& s) const;
  /// <S, D^2(pi o phi)(z)>_F stacked over latent components.
  Vector cycle_contraction(std::span<const double> z, const Matrix& s) const;
  /// g = Dphi^T Dphi.
  Matrix metric(std::span<const double> z) const;
};

/// Two tanh MLPs: encoder D -> d, decoder d -> D.
class LearnedChart final : public Chart {
 public:
  LearnedChart() = default;
  LearnedChart(Mlp encoder, Mlp decoder);

  std::size_t latent_dim() const override { return encoder_.output_dim(); }
  std::size_t ambient_dim() const override { return encoder_.input_dim(); }

  Vector decode(std::span<const double> z) const override;
  Matrix decoder_jacobian(std::span<const double> z) const override;
  Vector decoder_second_directional(std::span<const double> z,
                                    std::span<const double> v) const override;
  Vector encode(std::span<const double> x) const override;
  Matrix encoder_jacobian(std::span<const double> x) const override;
  Vector encoder_hvp(std::span<const double> x, std::size_t j,
                     std::span<const double> v) const override;
  /// Differentiates the concatenated network pi o phi directly.
  Vector cycle_second_directional(std::span<const double> z,
                                  std::span<const double> v) const override;

  const Mlp& encoder() const { return encoder_; }
  const Mlp& decoder() const { return decoder_; }
  Mlp& encoder() { return encoder_; }
  Mlp& decoder() { return decoder_; }

 private:
  Mlp encoder_;
  Mlp decoder_;
};

/// phi~(w) = phi(A w), pi~(x) = A^{-1} pi(x) for invertible d x d A.
class LinearReparamChart final : public Chart {
 public:
  LinearReparamChart(std::shared_ptr<const Chart> base, Matrix a);

  std::size_t latent_dim() const override { return base_->latent_dim(); }
  std::size_t ambient_dim() const override { return base_->ambient_dim(); }

  Vector decode(std::span<const double> w) const override;
  Matrix decoder_jacobian(std::span<const double> w) const override;
  Vector decoder_second_directional(std::span<const double> w,
                                    std::span<const double> v) const override;
  Vector encode(std::span<const double> x) const override;
  Matrix encoder_jacobian(std::span<const double> x) const override;
  Vector encoder_hvp(std::span<const double> x, std::size_t j,
                     std::span<const double> v) const override;
  Vector cycle_second_directional(std::span<const double> w,
                                  std::span<const double> v) const override;

  const Matrix& a() const { return a_; }
  const Matrix& a_inverse() const { return a_inv_; }

 private:
  std::shared_ptr<const Chart> base_;
  Matrix a_;
  Matrix a_inv_;
};

/// Nonlinear reparameterization of a 2-d chart by the shear
/// alpha(w) = (w1 + c w2^2, w2): phi~ = phi o alpha, pi~ = alpha^{-1} o pi.
/// Keeps an exact inverse pair exact while giving the encoder curvature.
class ShearChart final : public Chart {
 public:
  ShearChart(std::shared_ptr<const Chart> base, double c);

  std::size_t latent_dim() const override { return 2; }
  std::size_t ambient_dim() const override { return base_->ambient_dim(); }

  Vector decode(std::span<const double> w) const override;
  Matrix decoder_jacobian(std::span<const double> w) const override;
  Vector decoder_second_directional(std::span<const double> w,
                                    std::span<const double> v) const override;
  Vector encode(std::span<const double> x) const override;
  Matrix encoder_jacobian(std::span<const double> x) const override;
  Vector encoder_hvp(std::span<const double> x, std::size_t j,
                     std::span<const double> v) const override;

 private:
  Vector forward(std::span<const double> w) const;
  Vector backward(std::span<const double> z) const;

  std::shared_ptr<const Chart> base_;
  double c_;
};

}  // namespace geosde
