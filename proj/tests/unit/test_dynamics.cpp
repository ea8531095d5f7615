#include <doctest.h>

#include <cmath>

#include "geosde/dynamics.hpp"
#include "geosde/rng.hpp"
#include "geosde/surfaces.hpp"
#include "oracles.hpp"

using namespace geosde;

TEST_CASE("rotation coefficients") {
  const RotationSde sde;
  CHECK(sde.drift(Vector{0, 0}) == Vector{0, 0});
  CHECK(sde.diffusion(Vector{0, 0}) == Matrix::identity(2));
  CHECK(max_abs(sde.coefficients(Vector{0, 0}).cov - Matrix::identity(2)) == 0.0);
  CHECK(sde.drift(Vector{1, 0}) == Vector{0, 1});
  CHECK(max_abs(sde.diffusion(Vector{1, 0}) - Matrix{{1.25, 1}, {0, 1}}) <= 1e-15);
  // Divergence-free drift.
  const auto j = oracle::fd_jacobian([&](std::span<const double> z) { return sde.drift(z); }, Vector{0.3, 0.7});
  CHECK(std::abs(j(0, 0) + j(1, 1)) <= 1e-10);
}

TEST_CASE("Mueller-Brown well centers") {
  const MuellerBrownSde mb;
  const WellSet wells;
  for (const auto& c : wells.centers) {
    const auto m = refine_mb_minimum(c);
    CHECK(norm(mb.gradient(Vector{m[0], m[1]})) <= 1e-10);
    CHECK(std::hypot(m[0] - c[0], m[1] - c[1]) <= 5e-3);
    // The quoted centers are the minima rounded to three decimals.
    CHECK(std::round(m[0] * 1000.0) / 1000.0 == doctest::Approx(c[0]).epsilon(1e-12));
    CHECK(std::round(m[1] * 1000.0) / 1000.0 == doctest::Approx(c[1]).epsilon(1e-12));
  }
  // W1 and W2 are shallow enough for |grad V| <= 1e-2 at the rounded point;
  // W0 (curvature ~103) is not. The acceptance suite reports that criterion.
  CHECK(norm(mb.gradient(Vector{wells.centers[1][0], wells.centers[1][1]})) <= 1e-2);
  CHECK(norm(mb.gradient(Vector{wells.centers[2][0], wells.centers[2][1]})) <= 1e-2);
}

TEST_CASE("Mueller-Brown gradient vs differences") {
  const MuellerBrownSde mb;
  CounterRng rng(41);
  for (int i = 0; i < 100; ++i) {
    const Vector z{rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55)};
    const Vector fd = oracle::fd_gradient([&](std::span<const double> p) { return mb.potential(p); }, z, 1e-6);
    CHECK(oracle::rel_norm_error(mb.gradient(z), fd, 1e-3) <= 1e-6);
    CHECK(oracle::rel_error(mb.drift(z), scaled(mb.gradient(z), -1.0)) == 0.0);
  }
}

TEST_CASE("Mueller-Brown barrier and raw values") {
  const MuellerBrownSde mb;
  const WellSet wells;
  const auto& w0 = wells.centers[0];
  const auto& w1 = wells.centers[1];
  const Vector mid{0.5 * (w0[0] + w1[0]), 0.5 * (w0[1] + w1[1])};
  CHECK(mb.potential(Vector{w0[0], w0[1]}) < mb.potential(mid));
  // Textbook minimum near (-0.558, 1.442) with V ~ -146.7.
  CHECK(MuellerBrownSde::raw_potential(-0.558, 1.442) == doctest::Approx(-146.7).epsilon(1e-3));
  const double s = std::sqrt(2 * MuellerBrownSde::kKt);
  CHECK(max_abs(mb.diffusion(mid) - s * Matrix::identity(2)) <= 1e-15);
}

TEST_CASE("well labels") {
  const WellSet wells;
  CHECK(wells.label(Vector{wells.centers[2][0], wells.centers[2][1]}) == 2);
  CHECK(wells.label(Vector{0.9, 0.9}) == -1);
}

TEST_CASE("oracle ambient coefficients") {
  const TrueChart chart(MongeSurface(SurfaceKind::kParaboloid));
  const RotationSde rot;
  const auto amb = oracle_ambient(chart, rot, Vector{0, 0});
  CHECK(oracle::rel_error(amb.b, Vector{0, 0, 2}) <= 1e-15);
  CHECK(max_abs(amb.lambda.to_dense() - Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 0}}) <= 1e-15);

  const TrueChart sine(MongeSurface(SurfaceKind::kSinusoidal));
  const Vector z{0.4, -0.3};
  const auto a2 = oracle_ambient(sine, rot, z);
  const Vector dphi_mu = matvec(sine.decoder_jacobian(z), rot.drift(z));
  CHECK(std::abs(a2.b[0] - dphi_mu[0]) <= 1e-15);
  CHECK(std::abs(a2.b[1] - dphi_mu[1]) <= 1e-15);

  struct Zero final : LatentSde {
    Vector drift(std::span<const double>) const override { return {0, 0}; }
    Matrix diffusion(std::span<const double>) const override { return Matrix(2, 2); }
  } zero;
  const auto a3 = oracle_ambient(sine, zero, z);
  CHECK(norm(a3.b) == 0.0);
  CHECK(max_abs(a3.lambda.to_dense()) == 0.0);
}

TEST_CASE("name round trips") {
  for (auto k : {DynamicsKind::kRotation, DynamicsKind::kMuellerBrown}) CHECK(parse_dynamics(to_string(k)) == k);
  for (auto k : kAllSurfaces) CHECK(parse_surface(to_string(k)) == k);
  CHECK_THROWS(parse_surface("torus"));
}

TEST_CASE("surfaces: derivatives vs differences") {
  for (auto kind : kAllSurfaces) {
    const MongeSurface s(kind);
    const auto g = s.gradient(0.3, -0.2);
    const double h = 1e-6;
    CHECK(g[0] == doctest::Approx((s.height(0.3 + h, -0.2) - s.height(0.3 - h, -0.2)) / (2 * h)).epsilon(1e-7));
    CHECK(g[1] == doctest::Approx((s.height(0.3, -0.2 + h) - s.height(0.3, -0.2 - h)) / (2 * h)).epsilon(1e-7));
    const auto H = s.hessian(0.3, -0.2);
    CHECK(H[1] == doctest::Approx((s.gradient(0.3, -0.2 + h)[0] - s.gradient(0.3, -0.2 - h)[0]) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("Fourier embedding") {
  const FourierEmbedding e = FourierEmbedding::from_seed(4, 0);
  CHECK(e.pairs() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& m = e.modes()[k];
    const double order = std::max(std::abs(m.omega_u), std::abs(m.omega_v));
    CHECK(order == static_cast<double>(1 + k / 4));
    CHECK(m.amplitude == doctest::Approx(1.0 / (1.0 + std::hypot(m.omega_u, m.omega_v))));
    CHECK((m.phase >= 0.0 && m.phase < 2 * M_PI));
  }
  const FourierEmbedding again = FourierEmbedding::from_seed(4, 0);
  CHECK(again.modes()[2].phase == e.modes()[2].phase);
  const TrueChart chart(MongeSurface(SurfaceKind::kParaboloid), e);
  CHECK(chart.ambient_dim() == 11);
  const Vector z{0.1, 0.2};
  CHECK(chart.encode(chart.decode(z)) == z);
  const Matrix fd = oracle::fd_jacobian([&](std::span<const double> p) { return chart.decode(p); }, z);
  CHECK(oracle::rel_error(chart.decoder_jacobian(z).data(), fd.data()) <= 1e-8);
}
