#include <doctest.h>

#include <cmath>
#include <limits>

#include "geosde/chart_training.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/evaluate.hpp"
#include "geosde/latent_sde.hpp"
#include "geosde/surfaces.hpp"
#include "oracles.hpp"

using namespace geosde;

namespace {

TrueChart rotation_surface() {
  return TrueChart(MongeSurface(SurfaceKind::kParaboloid), FourierEmbedding::from_seed(4, 0));
}

std::vector<std::int8_t> labels(std::initializer_list<std::pair<int, int>> runs) {
  std::vector<std::int8_t> out;
  for (auto [label, count] : runs) out.insert(out.end(), count, static_cast<std::int8_t>(label));
  return out;
}

}  // namespace

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK(std::isnan(median({})));
}

TEST_CASE("chart metrics of the exact chart vanish") {
  const TrueChart truth = rotation_surface();
  const RotationSde sde;
  const auto pts = uniform_points(50, -1, 1, 3);
  const ChartMetrics m = chart_metrics(truth, truth, sde, pts);
  CHECK(m.reconstruction <= 1e-28);
  CHECK(m.tangent <= 1e-20);
  CHECK(m.fidelity <= 1e-20);
  CHECK(m.excluded == 0);
}

TEST_CASE("coefficient metrics with oracle networks vanish") {
  const TrueChart truth = rotation_surface();
  const RotationSde sde;
  const auto pts = uniform_points(50, -1, 1, 4);
  const CoefficientMetrics m = coefficient_metrics(truth, sde, truth, sde, pts);
  CHECK(m.e_b <= 1e-8);
  CHECK(m.e_lambda <= 1e-8);
  CHECK(m.e_sigma <= 1e-8);
}

TEST_CASE("coefficient metrics with a zero diffusion network") {
  const TrueChart truth = rotation_surface();
  const RotationSde sde;
  struct DriftOnly final : LatentSde {
    Vector drift(std::span<const double> z) const override { return RotationSde{}.drift(z); }
    Matrix diffusion(std::span<const double>) const override { return Matrix(2, 2); }
  } model;
  const auto pts = uniform_points(41, -1, 1, 5);
  std::vector<double> norms;
  for (const Vector& z : pts) norms.push_back(frobenius_sq(oracle_ambient(truth, sde, z).lambda.to_dense()));
  const CoefficientMetrics m = coefficient_metrics(truth, model, truth, sde, pts);
  CHECK(m.e_lambda == doctest::Approx(median(norms)).epsilon(1e-10));
}

TEST_CASE("extrapolation sweep") {
  const TrueChart truth = rotation_surface();
  const std::vector<double> deltas{0.0, 0.1, 0.3};
  for (double e : extrapolation_sweep(truth, truth, deltas, 100, 1)) CHECK(e <= 1e-28);

  const LearnedChart chart = init_chart(11, 2, 16, 3);
  const auto sweep = extrapolation_sweep(chart, truth, deltas, 200, 2);
  CHECK(sweep.size() == 3);
  for (double e : sweep) CHECK(e > 0.0);
}

TEST_CASE("radial MFPT of straight-line motion") {
  const oracle::FlatChart flat(5);
  const oracle::ConstantDriftSde sde(Vector{0.8, 0.0});
  SimConfig c;
  c.dt = 0.01;
  c.horizon = 2.0;
  c.n_traj = 3;
  c.box_lo = -10;
  c.box_hi = 10;
  EnsembleOptions opt;
  opt.radial_r = 1.0;
  const std::vector<Vector> z0{{0, 0}, {0.5, 0.5}, {-1, 0}};
  const TrajectoryEnsemble e = simulate_ensemble(sde, [&](std::span<const double> z) { return flat.decode(z); }, z0, c, opt);
  std::size_t used = 0;
  CHECK(std::abs(mean_radial_time(e, &used) - 1.0 / 0.8) <= c.dt);
  CHECK(used == 3);
  const RadialMfpt r = radial_mfpt(e, e);
  CHECK(r.valid);
  CHECK(r.relative_error == 0.0);
}

TEST_CASE("radial MFPT caps unreached passages at T") {
  const oracle::FlatChart flat(3);
  const oracle::ConstantDriftSde still(Vector{0, 0});
  SimConfig c;
  c.horizon = 1.0;
  c.n_traj = 1;
  EnsembleOptions opt;
  opt.radial_r = 2.0;
  const auto e = simulate_ensemble(still, [&](std::span<const double> z) { return flat.decode(z); },
                                   std::vector<Vector>{{0, 0}}, c, opt);
  CHECK(mean_radial_time(e) == doctest::Approx(1.0));
}

TEST_CASE("dwell-confirmed passages") {
  const auto one = extract_passages(labels({{0, 2}, {-1, 1}, {1, 10}}), 10, 1.0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].from == 0);
  CHECK(one[0].to == 1);
  CHECK(one[0].time == 3.0);
  CHECK(extract_passages(labels({{0, 2}, {-1, 1}, {1, 9}}), 10, 1.0).empty());
  // A short excursion into well 2 is not a passage.
  const auto two = extract_passages(labels({{0, 3}, {2, 4}, {-1, 2}, {1, 12}}), 10, 0.5);
  REQUIRE(two.size() == 1);
  CHECK(two[0].to == 1);
  CHECK(two[0].time == doctest::Approx(4.5));
}

TEST_CASE("inter-well comparison") {
  InterwellMfpt gt{2.0, 4.0, 10, 5};
  InterwellMfpt learned{3.0, 0.0, 10, 0};
  const auto c = compare_interwell(gt, learned);
  CHECK(c.rel_error_01 == doctest::Approx(0.5));
  CHECK(std::isnan(c.rel_error_02));
}

TEST_CASE("atlas: weights, kernel limit and symmetry") {
  const TrueChart truth = rotation_surface();
  const RotationSde sde;
  const std::vector<Vector> pts{{0.2, 0.1}, {-0.3, 0.4}, {0.5, -0.5}};
  const LandmarkSet lms = build_landmark_set(truth, sde, pts);
  const AtlasModel atlas(lms);
  CHECK(atlas.bandwidth() > 0.0);
  const Vector w = atlas.weights(truth.decode(Vector{0.0, 0.0}));
  double sum = 0.0;
  for (double v : w) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));

  const AtlasModel narrow(lms, 1e-4);
  const auto at = narrow.blend(lms.items[1].x);
  CHECK(oracle::rel_error(at.b, lms.items[1].ambient.b) <= 1e-12);
  CHECK(max_abs(at.projector - matmul_nt(lms.items[1].frame, lms.items[1].frame)) <= 1e-10);

  const LandmarkSet pair = build_landmark_set(truth, sde, std::vector<Vector>{{0.2, 0.1}, {-0.3, 0.4}});
  const AtlasModel two(pair, 0.5);
  const Vector mid = scaled(add(pair.items[0].x, pair.items[1].x), 0.5);
  const auto avg = two.blend(mid);
  CHECK(oracle::rel_error(avg.b, scaled(add(pair.items[0].ambient.b, pair.items[1].ambient.b), 0.5)) <= 1e-12);

  // Far-away queries still get a normalized weight vector.
  const Vector far(11, 50.0);
  double far_sum = 0.0;
  for (double v : atlas.weights(far)) far_sum += v;
  CHECK(far_sum == doctest::Approx(1.0));
}

TEST_CASE("atlas metrics are finite with no diffusion-frame error") {
  const TrueChart truth = rotation_surface();
  const RotationSde sde;
  const LandmarkSet lms = build_landmark_set(truth, sde, uniform_points(60, -1, 1, 9));
  const AtlasModel atlas(lms);
  const auto pts = uniform_points(50, -1, 1, 10);
  const AtlasMetrics m = atlas_metrics(atlas, truth, sde, pts, pts);
  CHECK(std::isfinite(m.chart.tangent));
  CHECK(std::isfinite(m.chart.fidelity));
  CHECK(std::isfinite(m.coefficients.e_b));
  CHECK(std::isnan(m.coefficients.e_sigma));
}
