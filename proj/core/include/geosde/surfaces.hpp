#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "geosde/chart.hpp"

namespace geosde {

enum class SurfaceKind { kParaboloid, kHyperbolicParaboloid, kQuarticDome, kSinusoidal };

std::string_view to_string(SurfaceKind kind);
/// Accepts the names printed by to_string. Throws std::invalid_argument.
SurfaceKind parse_surface(std::string_view name);
inline constexpr std::array<SurfaceKind, 4> kAllSurfaces = {
    SurfaceKind::kParaboloid, SurfaceKind::kHyperbolicParaboloid, SurfaceKind::kQuarticDome,
    SurfaceKind::kSinusoidal};

/// Height function of the Monge patch (u, v, f(u, v)).
class MongeSurface {
 public:
  explicit MongeSurface(SurfaceKind kind) : kind_(kind) {}

  SurfaceKind kind() const { return kind_; }
  double height(double u, double v) const;
  std::array<double, 2> gradient(double u, double v) const;
  /// (f_uu, f_uv, f_vv)
  std::array<double, 3> hessian(double u, double v) const;

 private:
  SurfaceKind kind_;
};

struct FourierMode {
  double omega_u = 0.0;
  double omega_v = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// K_F extra coordinate pairs (a sin(w.z + t), a cos(w.z + t)).
class FourierEmbedding {
 public:
  FourierEmbedding() = default;
  explicit FourierEmbedding(std::vector<FourierMode> modes) : modes_(std::move(modes)) {}

  /// Integer frequencies of sup-norm 1 + k/4 for the k-th pair, distinct up
  /// to sign within an order, amplitude 1/(1 + |w|), phase uniform in
  /// [0, 2 pi). Reproducible from `seed`.
  static FourierEmbedding from_seed(std::size_t k_f, std::uint64_t seed);

  std::size_t pairs() const { return modes_.size(); }
  const std::vector<FourierMode>& modes() const { return modes_; }

 private:
  std::vector<FourierMode> modes_;
};

/// Exact chart of the embedded surface: phi(u, v) = (u, v, f, fourier...),
/// pi(x) = (x1, x2). D = 3 + 2 K_F.
class TrueChart final : public Chart {
 public:
  explicit TrueChart(MongeSurface surface, FourierEmbedding embedding = {});

  std::size_t latent_dim() const override { return 2; }
  std::size_t ambient_dim() const override { return 3 + 2 * embedding_.pairs(); }

  Vector decode(std::span<const double> z) const override;
  Matrix decoder_jacobian(std::span<const double> z) const override;
  Vector decoder_second_directional(std::span<const double> z,
                                    std::span<const double> v) const override;
  Vector encode(std::span<const double> x) const override;
  Matrix encoder_jacobian(std::span<const double> x) const override;
  Vector encoder_hvp(std::span<const double> x, std::size_t j,
                     std::span<const double> v) const override;
  Vector cycle_second_directional(std::span<const double> z,
                                  std::span<const double> v) const override;

  /// grad^2 phi^i(z) as a 2x2 matrix.
  Matrix decoder_hessian(std::span<const double> z, std::size_t i) const;

  const MongeSurface& surface() const { return surface_; }
  const FourierEmbedding& embedding() const { return embedding_; }

 private:
  MongeSurface surface_;
  FourierEmbedding embedding_;
};

}  // namespace geosde
