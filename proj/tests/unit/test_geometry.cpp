#include <doctest.h>

#include <cmath>
#include <memory>

#include "geosde/chart_training.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/geometry.hpp"
#include "geosde/linalg.hpp"
#include "geosde/rng.hpp"
#include "geosde/surfaces.hpp"
#include "oracles.hpp"

using namespace geosde;

namespace {

TrueChart paraboloid() { return TrueChart(MongeSurface(SurfaceKind::kParaboloid)); }

Matrix random_spd2(CounterRng& rng) {
  Matrix a(2, 2);
  for (double& x : a.data()) x = rng.normal();
  return matmul_nt(a, a) + 0.1 * Matrix::identity(2);
}

}  // namespace

TEST_CASE("tangent projector examples") {
  const Matrix p = tangent_projector(Matrix{{1, 0}, {0, 1}, {0, 0}});
  CHECK(max_abs(p - Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 0}}) <= 1e-15);

  const TrueChart chart = paraboloid();
  const Matrix p0 = tangent_projector(chart.decoder_jacobian(Vector{0.0, 0.0}));
  CHECK(max_abs(p0 - Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 0}}) <= 1e-15);

  const Matrix j = chart.decoder_jacobian(Vector{0.3, -0.4});
  const Matrix a{{2.0, 1.0}, {-0.5, 0.7}};
  CHECK(max_abs(tangent_projector(j) - tangent_projector(j * a)) <= 1e-12);
}

TEST_CASE("projector from covariance") {
  const auto sp = projector_from_covariance(AmbientCovariance::dense(Matrix{{2, 0, 0}, {0, 1, 0}, {0, 0, 0}}), 2);
  CHECK(max_abs(sp.projector - Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 0}}) <= 1e-14);
  CHECK_FALSE(sp.degenerate);

  CounterRng rng(3);
  const TrueChart chart(MongeSurface(SurfaceKind::kSinusoidal), FourierEmbedding::from_seed(99, 1));
  for (int trial = 0; trial < 5; ++trial) {
    const Vector z{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Matrix j = chart.decoder_jacobian(z);
    const Matrix sigma = random_spd2(rng);
    const auto factored = projector_from_covariance(AmbientCovariance::factored(j, sigma), 2);
    CHECK(max_abs(factored.projector - tangent_projector(j)) <= 1e-8);
    const auto dense = projector_from_covariance(AmbientCovariance::dense(j * sigma * j.transpose()), 2);
    CHECK(max_abs(dense.projector - factored.projector) <= 1e-8);
  }
}

TEST_CASE("ito local to ambient: paraboloid at the origin") {
  const TrueChart chart = paraboloid();
  const auto amb = ito_local_to_ambient(chart, Vector{0, 0}, latent_from_factor({1, 0}, Matrix::identity(2)));
  CHECK(oracle::rel_error(amb.b, Vector{1, 0, 2}) <= 1e-15);
  CHECK(max_abs(amb.lambda.to_dense() - Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 0}}) <= 1e-15);

  const auto zero = ito_local_to_ambient(chart, Vector{0.2, 0.1}, latent_from_factor({0, 0}, Matrix(2, 2)));
  CHECK(norm(zero.b) == 0.0);
  CHECK(max_abs(zero.lambda.to_dense()) == 0.0);
}

TEST_CASE("ito: flat chart gives b = Dphi mu") {
  const oracle::FlatChart flat(5);
  const auto amb = ito_local_to_ambient(flat, Vector{0.3, 0.4}, latent_from_factor({0.5, -1}, Matrix{{1, 2}, {0, 1}}));
  CHECK(oracle::rel_error(amb.b, Vector{0.5, -1, 0, 0, 0}) <= 1e-15);
  const auto back = ito_ambient_to_local(flat, flat.decode(Vector{0.3, 0.4}), amb);
  CHECK(oracle::rel_error(back.local.mu, Vector{0.5, -1}) <= 1e-15);
}

TEST_CASE("ito ambient to local inverts the paraboloid example") {
  const TrueChart chart = paraboloid();
  const auto amb = ito_local_to_ambient(chart, Vector{0, 0}, latent_from_factor({1, 0}, Matrix::identity(2)));
  const auto back = ito_ambient_to_local(chart, chart.decode(Vector{0, 0}), amb);
  CHECK(back.gc_ok);
  CHECK(oracle::rel_error(back.local.mu, Vector{1, 0}) <= 1e-14);
  CHECK(max_abs(back.local.cov - Matrix::identity(2)) <= 1e-14);
}

TEST_CASE("encoder pullback drift") {
  const TrueChart chart = paraboloid();
  const auto amb = ito_local_to_ambient(chart, Vector{0, 0}, latent_from_factor({1, 0}, Matrix::identity(2)));
  CHECK(oracle::rel_error(encoder_pullback_drift(chart, chart.decode(Vector{0, 0}), amb), Vector{1, 0}) <= 1e-14);

  // Linear encoder: no Hessian term.
  const Vector x = chart.decode(Vector{0.4, -0.2});
  const auto amb2 = ito_local_to_ambient(chart, Vector{0.4, -0.2}, latent_from_factor({0.3, 0.1}, Matrix{{1, 0.2}, {0, 0.8}}));
  const Vector hc = encoder_hessian_contraction(chart, x, amb2.lambda);
  CHECK(norm(hc) == 0.0);
  CHECK(oracle::rel_error(encoder_pullback_drift(chart, x, amb2), matvec(chart.encoder_jacobian(x), amb2.b)) <= 1e-15);
}

TEST_CASE("encoder pullback: factored and dense Lambda agree") {
  CounterRng rng(5);
  const LearnedChart chart = init_chart(11, 2, 16, 77);
  const TrueChart truth(MongeSurface(SurfaceKind::kQuarticDome), FourierEmbedding::from_seed(4, 3));
  const RotationSde sde;
  for (int trial = 0; trial < 5; ++trial) {
    const Vector z{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    AmbientCoefficients amb = oracle_ambient(truth, sde, z);
    const Vector x = truth.decode(z);
    const Vector a = encoder_pullback_drift(chart, x, amb);
    amb.lambda = AmbientCovariance::dense(amb.lambda.to_dense());
    const Vector b = encoder_pullback_drift(chart, x, amb);
    CHECK(oracle::rel_error(a, b) <= 1e-10);
  }
}

TEST_CASE("bias decomposition: exact pair has zero terms") {
  const auto chart = std::make_shared<TrueChart>(MongeSurface(SurfaceKind::kHyperbolicParaboloid));
  const RotationSde sde;
  const Vector z{0.3, -0.6};
  const auto amb = oracle_ambient(*chart, sde, z);
  const BiasTerms t = bias_decomposition(*chart, chart->decode(z), amb);
  CHECK(norm(t.term_i) <= 1e-12);
  CHECK(norm(t.term_ii) <= 1e-12);
  CHECK(norm(t.term_iii) <= 1e-12);
  CHECK(oracle::rel_error(t.mu_dec, t.mu_enc) <= 1e-12);
}

TEST_CASE("bias decomposition: linear pair has no term II") {
  const oracle::FlatChart flat(4);
  AmbientCoefficients amb;
  amb.b = {0.3, -0.2, 0.5, 0.1};
  Matrix e(4, 2);
  e(0, 0) = 1;
  e(1, 1) = 1;
  e(2, 0) = 0.4;
  amb.lambda = AmbientCovariance::factored(e, Matrix{{1.0, 0.2}, {0.2, 0.5}});
  const BiasTerms t = bias_decomposition(flat, amb.b, amb);
  CHECK(norm(t.term_ii) == 0.0);
  CHECK(t.residual <= 1e-12);
}

TEST_CASE("bias decomposition: random chart, O(1) terms, tiny residual") {
  const LearnedChart chart = init_chart(7, 2, 12, 5);
  const TrueChart truth(MongeSurface(SurfaceKind::kSinusoidal), FourierEmbedding::from_seed(2, 8));
  const RotationSde sde;
  const Vector z{0.2, 0.5};
  const BiasTerms t = bias_decomposition(chart, truth.decode(z), oracle_ambient(truth, sde, z));
  CHECK(norm(t.term_i) > 1e-3);
  CHECK(t.residual <= 1e-8);
}

TEST_CASE("coordinate invariance") {
  const auto base = std::make_shared<TrueChart>(MongeSurface(SurfaceKind::kParaboloid), FourierEmbedding::from_seed(2, 4));
  const Vector z{0.2, -0.3};
  const Vector dmu{0.4, -0.1};
  const Matrix dsig{{0.3, 0.1}, {0.1, -0.2}};
  const auto id = coordinate_reparam_check(*base, z, Matrix::identity(2), dmu, dsig);
  CHECK(id.projector_diff <= 1e-15);
  CHECK(id.drift_norm_diff <= 1e-15);
  CHECK(id.trace_form_diff <= 1e-15);
  const auto two = coordinate_reparam_check(*base, z, 2.0 * Matrix::identity(2), dmu, dsig);
  CHECK(two.projector_diff <= 1e-10);
  CHECK(two.drift_norm_diff <= 1e-10);
  CHECK(two.trace_form_diff <= 1e-10);
}

TEST_CASE("projector identities: aligned and orthogonal frames") {
  const Matrix h1{{1}, {0}, {0}, {0}};
  const Matrix h2{{0}, {1}, {0}, {0}};
  const auto same = projector_identities(h1, h1);
  CHECK(same.half_sq_distance == doctest::Approx(0).epsilon(1e-15));
  const auto orth = projector_identities(h1, h2);
  CHECK(orth.half_sq_distance == doctest::Approx(1));
  CHECK(orth.frame_form == doctest::Approx(1));
  CHECK(orth.normal_form_12 == doctest::Approx(1));
  CHECK(orth.normal_form_21 == doctest::Approx(1));
  const Matrix n = orthogonal_complement(h1);
  CHECK(n.cols() == 3);
  CHECK(max_abs(matmul_tn(n, h1)) <= 1e-15);
}

TEST_CASE("metric distance and singular grid") {
  const TrueChart a = paraboloid();
  CHECK(rho_distance(a, a, -1, 1, 200, 1) == 0.0);
  CHECK(min_singular_on_grid(a, -1, 1, 10) >= 1.0 - 1e-12);
  const TrueChart b(MongeSurface(SurfaceKind::kQuarticDome));
  CHECK(rho_distance(a, b, -1, 1, 200, 1) > 0.0);
}
