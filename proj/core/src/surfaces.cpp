#include "geosde/surfaces.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

#include "geosde/rng.hpp"

namespace geosde {

std::string_view to_string(SurfaceKind kind) {
  switch (kind) {
    case SurfaceKind::kParaboloid: return "paraboloid";
    case SurfaceKind::kHyperbolicParaboloid: return "hyperbolic_paraboloid";
    case SurfaceKind::kQuarticDome: return "quartic_dome";
    case SurfaceKind::kSinusoidal: return "sinusoidal";
  }
  return "unknown";
}

SurfaceKind parse_surface(std::string_view name) {
  for (SurfaceKind k : kAllSurfaces)
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown surface '" + std::string(name) + "'");
}

double MongeSurface::height(double u, double v) const {
  switch (kind_) {
    case SurfaceKind::kParaboloid: return u * u + v * v;
    case SurfaceKind::kHyperbolicParaboloid: return u * u - v * v;
    case SurfaceKind::kQuarticDome: return (u * u + v * v) - 0.5 * (u * u * u * u + v * v * v * v);
    case SurfaceKind::kSinusoidal: return std::sin(u + v);
  }
  return 0.0;
}

std::array<double, 2> MongeSurface::gradient(double u, double v) const {
  switch (kind_) {
    case SurfaceKind::kParaboloid: return {2.0 * u, 2.0 * v};
    case SurfaceKind::kHyperbolicParaboloid: return {2.0 * u, -2.0 * v};
    case SurfaceKind::kQuarticDome: return {2.0 * u - 2.0 * u * u * u, 2.0 * v - 2.0 * v * v * v};
    case SurfaceKind::kSinusoidal: {
      const double c = std::cos(u + v);
      return {c, c};
    }
  }
  return {0.0, 0.0};
}

std::array<double, 3> MongeSurface::hessian(double u, double v) const {
  switch (kind_) {
    case SurfaceKind::kParaboloid: return {2.0, 0.0, 2.0};
    case SurfaceKind::kHyperbolicParaboloid: return {2.0, 0.0, -2.0};
    case SurfaceKind::kQuarticDome: return {2.0 - 6.0 * u * u, 0.0, 2.0 - 6.0 * v * v};
    case SurfaceKind::kSinusoidal: {
      const double s = -std::sin(u + v);
      return {s, s, s};
    }
  }
  return {0.0, 0.0, 0.0};
}

FourierEmbedding FourierEmbedding::from_seed(std::size_t k_f, std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, "fourier_embedding"));
  std::vector<FourierMode> modes;
  std::set<std::pair<int, int>> used;
  for (std::size_t k = 0; k < k_f; ++k) {
    const int order = 1 + static_cast<int>(k / 4);
    // Half of the sup-norm ring: first nonzero component positive.
    std::vector<std::pair<int, int>> ring;
    for (int i = -order; i <= order; ++i) {
      for (int j = -order; j <= order; ++j) {
        if (std::max(std::abs(i), std::abs(j)) != order) continue;
        if (i < 0 || (i == 0 && j < 0)) continue;
        if (used.count({i, j}) == 0) ring.emplace_back(i, j);
      }
    }
    const auto pick = ring[static_cast<std::size_t>(rng.below(ring.size()))];
    used.insert(pick);
    FourierMode m;
    m.omega_u = pick.first;
    m.omega_v = pick.second;
    m.amplitude = 1.0 / (1.0 + std::hypot(m.omega_u, m.omega_v));
    m.phase = rng.uniform(0.0, 2.0 * M_PI);
    modes.push_back(m);
  }
  return FourierEmbedding(std::move(modes));
}

TrueChart::TrueChart(MongeSurface surface, FourierEmbedding embedding)
    : surface_(surface), embedding_(std::move(embedding)) {}

Vector TrueChart::decode(std::span<const double> z) const {
  if (z.size() != 2) throw std::invalid_argument("TrueChart::decode: z must have length 2");
  Vector x{z[0], z[1], surface_.height(z[0], z[1])};
  for (const auto& m : embedding_.modes()) {
    const double arg = m.omega_u * z[0] + m.omega_v * z[1] + m.phase;
    x.push_back(m.amplitude * std::sin(arg));
    x.push_back(m.amplitude * std::cos(arg));
  }
  return x;
}

Matrix TrueChart::decoder_jacobian(std::span<const double> z) const {
  Matrix j(ambient_dim(), 2);
  j(0, 0) = 1.0;
  j(1, 1) = 1.0;
  const auto g = surface_.gradient(z[0], z[1]);
  j(2, 0) = g[0];
  j(2, 1) = g[1];
  std::size_t r = 3;
  for (const auto& m : embedding_.modes()) {
    const double arg = m.omega_u * z[0] + m.omega_v * z[1] + m.phase;
    const double c = m.amplitude * std::cos(arg);
    const double s = -m.amplitude * std::sin(arg);
    j(r, 0) = c * m.omega_u;
    j(r, 1) = c * m.omega_v;
    j(r + 1, 0) = s * m.omega_u;
    j(r + 1, 1) = s * m.omega_v;
    r += 2;
  }
  return j;
}

Vector TrueChart::decoder_second_directional(std::span<const double> z,
                                             std::span<const double> v) const {
  Vector out(ambient_dim(), 0.0);
  const auto h = surface_.hessian(z[0], z[1]);
  out[2] = h[0] * v[0] * v[0] + 2.0 * h[1] * v[0] * v[1] + h[2] * v[1] * v[1];
  std::size_t r = 3;
  for (const auto& m : embedding_.modes()) {
    const double arg = m.omega_u * z[0] + m.omega_v * z[1] + m.phase;
    const double wv = m.omega_u * v[0] + m.omega_v * v[1];
    out[r] = -m.amplitude * std::sin(arg) * wv * wv;
    out[r + 1] = -m.amplitude * std::cos(arg) * wv * wv;
    r += 2;
  }
  return out;
}

Matrix TrueChart::decoder_hessian(std::span<const double> z, std::size_t i) const {
  if (i >= ambient_dim()) throw std::out_of_range("TrueChart::decoder_hessian");
  if (i < 2) return Matrix(2, 2);
  if (i == 2) {
    const auto h = surface_.hessian(z[0], z[1]);
    return Matrix{{h[0], h[1]}, {h[1], h[2]}};
  }
  const auto& m = embedding_.modes()[(i - 3) / 2];
  const double arg = m.omega_u * z[0] + m.omega_v * z[1] + m.phase;
  const double s = -m.amplitude * ((i - 3) % 2 == 0 ? std::sin(arg) : std::cos(arg));
  return Matrix{{s * m.omega_u * m.omega_u, s * m.omega_u * m.omega_v},
                {s * m.omega_u * m.omega_v, s * m.omega_v * m.omega_v}};
}

Vector TrueChart::encode(std::span<const double> x) const {
  if (x.size() != ambient_dim()) throw std::invalid_argument("TrueChart::encode: bad length");
  return {x[0], x[1]};
}

Matrix TrueChart::encoder_jacobian(std::span<const double> x) const {
  Matrix j(2, x.size());
  j(0, 0) = 1.0;
  j(1, 1) = 1.0;
  return j;
}

Vector TrueChart::encoder_hvp(std::span<const double> x, std::size_t /*j*/,
                              std::span<const double> /*v*/) const {
  return Vector(x.size(), 0.0);
}

Vector TrueChart::cycle_second_directional(std::span<const double> /*z*/,
                                           std::span<const double> /*v*/) const {
  return Vector(2, 0.0);
}

}  // namespace geosde
