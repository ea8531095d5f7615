#include "geosde/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "geosde/linalg.hpp"

namespace geosde {

namespace {

constexpr double kA[4] = {-200.0, -100.0, -170.0, 15.0};
constexpr double kLa[4] = {-1.0, -1.0, -6.5, 0.7};
constexpr double kLb[4] = {0.0, 0.0, 11.0, 0.6};
constexpr double kLc[4] = {-10.0, -10.0, -6.5, 0.7};
constexpr double kX0[4] = {1.0, 0.0, -0.5, -1.0};
constexpr double kY0[4] = {0.0, 0.5, 1.5, 1.0};

}  // namespace

std::string_view to_string(DynamicsKind kind) {
  return kind == DynamicsKind::kRotation ? "rotation" : "mueller_brown";
}

DynamicsKind parse_dynamics(std::string_view name) {
  if (name == "rotation") return DynamicsKind::kRotation;
  if (name == "mueller_brown" || name == "mb") return DynamicsKind::kMuellerBrown;
  throw std::invalid_argument("unknown dynamics '" + std::string(name) + "'");
}

Vector RotationSde::drift(std::span<const double> z) const { return {-z[1], z[0]}; }

Matrix RotationSde::diffusion(std::span<const double> z) const {
  const double u = z[0];
  const double v = z[1];
  return Matrix{{1.0 + 0.25 * u * u, u + v}, {0.0, 1.0 + 0.25 * v * v}};
}

double MuellerBrownSde::raw_potential(double x, double y) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double dx = x - kX0[i];
    const double dy = y - kY0[i];
    s += kA[i] * std::exp(kLa[i] * dx * dx + kLb[i] * dx * dy + kLc[i] * dy * dy);
  }
  return s;
}

std::array<double, 2> MuellerBrownSde::raw_gradient(double x, double y) {
  std::array<double, 2> g{0.0, 0.0};
  for (int i = 0; i < 4; ++i) {
    const double dx = x - kX0[i];
    const double dy = y - kY0[i];
    const double e = kA[i] * std::exp(kLa[i] * dx * dx + kLb[i] * dx * dy + kLc[i] * dy * dy);
    g[0] += e * (2.0 * kLa[i] * dx + kLb[i] * dy);
    g[1] += e * (kLb[i] * dx + 2.0 * kLc[i] * dy);
  }
  return g;
}

double MuellerBrownSde::potential(std::span<const double> z) const {
  return raw_potential(kScale * z[0] + kShiftX, kScale * z[1] + kShiftY) / kV0;
}

Vector MuellerBrownSde::gradient(std::span<const double> z) const {
  const auto g = raw_gradient(kScale * z[0] + kShiftX, kScale * z[1] + kShiftY);
  return {kScale * g[0] / kV0, kScale * g[1] / kV0};
}

Vector MuellerBrownSde::drift(std::span<const double> z) const {
  return scaled(gradient(z), -1.0);
}

Matrix MuellerBrownSde::diffusion(std::span<const double> /*z*/) const {
  const double s = std::sqrt(2.0 * kKt);
  return Matrix{{s, 0.0}, {0.0, s}};
}

int WellSet::label(std::span<const double> z) const {
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const double du = z[0] - centers[k][0];
    const double dv = z[1] - centers[k][1];
    if (du * du + dv * dv <= r_core * r_core) return static_cast<int>(k);
  }
  return -1;
}

std::array<double, 2> refine_mb_minimum(std::array<double, 2> start) {
  const MuellerBrownSde mb;
  Vector z{start[0], start[1]};
  const double h = 1e-6;
  for (int it = 0; it < 100; ++it) {
    const Vector g = mb.gradient(z);
    if (norm(g) < 1e-13) break;
    Matrix hess(2, 2);
    for (int k = 0; k < 2; ++k) {
      Vector zp = z;
      Vector zm = z;
      zp[k] += h;
      zm[k] -= h;
      const Vector gp = mb.gradient(zp);
      const Vector gm = mb.gradient(zm);
      hess(0, k) = (gp[0] - gm[0]) / (2.0 * h);
      hess(1, k) = (gp[1] - gm[1]) / (2.0 * h);
    }
    Vector step = solve(symmetrize(hess), g);
    // Backtrack until the potential decreases.
    double t = 1.0;
    const double v0 = mb.potential(z);
    while (t > 1e-8) {
      const Vector trial{z[0] - t * step[0], z[1] - t * step[1]};
      if (mb.potential(trial) <= v0) {
        z = trial;
        break;
      }
      t *= 0.5;
    }
    if (t <= 1e-8) break;
  }
  return {z[0], z[1]};
}

AmbientCoefficients oracle_ambient(const TrueChart& chart, const LatentSde& sde,
                                   std::span<const double> z) {
  return ito_local_to_ambient(chart, z, sde.coefficients(z));
}

}  // namespace geosde
