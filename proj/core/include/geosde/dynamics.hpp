#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

#include "geosde/geometry.hpp"
#include "geosde/surfaces.hpp"

namespace geosde {

enum class DynamicsKind { kRotation, kMuellerBrown };
std::string_view to_string(DynamicsKind kind);
DynamicsKind parse_dynamics(std::string_view name);

/// Latent SDE dZ = mu(Z) dt + sigma(Z) dB on R^2.
class LatentSde {
 public:
  virtual ~LatentSde() = default;
  virtual Vector drift(std::span<const double> z) const = 0;
  /// sigma(z), d x d.
  virtual Matrix diffusion(std::span<const double> z) const = 0;
  LatentCoefficients coefficients(std::span<const double> z) const {
    return latent_from_factor(drift(z), diffusion(z));
  }
};

/// mu = (-v, u), sigma = [[1 + u^2/4, u + v], [0, 1 + v^2/4]].
class RotationSde final : public LatentSde {
 public:
  Vector drift(std::span<const double> z) const override;
  Matrix diffusion(std::span<const double> z) const override;
};

/// Mueller-Brown Langevin dynamics in rescaled coordinates
/// x = 2.25 u - 0.25, y = 2.25 v + 1.0, potential V~ = V_MB / 200,
/// mu = -grad V~, sigma = sqrt(2 kT) I with kT = 0.1.
class MuellerBrownSde final : public LatentSde {
 public:
  static constexpr double kScale = 2.25;
  static constexpr double kShiftX = -0.25;
  static constexpr double kShiftY = 1.0;
  static constexpr double kV0 = 200.0;
  static constexpr double kKt = 0.10;

  /// Raw V_MB(x, y) in the original coordinates.
  static double raw_potential(double x, double y);
  /// grad of V_MB in the original coordinates.
  static std::array<double, 2> raw_gradient(double x, double y);

  double potential(std::span<const double> z) const;
  Vector gradient(std::span<const double> z) const;

  Vector drift(std::span<const double> z) const override;
  Matrix diffusion(std::span<const double> z) const override;
};

/// Metastable well cores in rescaled coordinates.
struct WellSet {
  std::array<std::array<double, 2>, 3> centers{{{-0.137, 0.196}, {0.388, -0.432}, {0.089, -0.237}}};
  double r_core = 0.08;
  std::size_t n_dwell = 10;

  /// Index of the core containing z, or -1.
  int label(std::span<const double> z) const;
};

/// Local minimum of V~ reached by damped Newton iteration from `start`.
std::array<double, 2> refine_mb_minimum(std::array<double, 2> start);

/// Exact ambient coefficients of `sde` pushed through the true chart at z.
AmbientCoefficients oracle_ambient(const TrueChart& chart, const LatentSde& sde,
                                   std::span<const double> z);

}  // namespace geosde
