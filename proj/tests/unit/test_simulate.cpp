#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "geosde/dynamics.hpp"
#include "geosde/latent_sde.hpp"
#include "geosde/simulate.hpp"
#include "geosde/surfaces.hpp"
#include "oracles.hpp"

using namespace geosde;

namespace {

struct LinearSde final : LatentSde {
  double a = 0.0;
  Vector drift(std::span<const double> z) const override { return {a * z[0], a * z[1]}; }
  Matrix diffusion(std::span<const double>) const override { return Matrix(2, 2); }
};

struct SilentRotation final : LatentSde {
  Vector drift(std::span<const double> z) const override { return {-z[1], z[0]}; }
  Matrix diffusion(std::span<const double>) const override { return Matrix(2, 2); }
};

MetricFn euclidean(std::size_t n) {
  return [n](std::span<const double>) { return Matrix::identity(n); };
}

}  // namespace

TEST_CASE("sim config steps") {
  SimConfig c;
  c.dt = 0.01;
  c.horizon = 2.0;
  CHECK(c.steps() == 200);
  c.horizon = 2.005;
  CHECK_THROWS(c.steps());
  CHECK(SimConfig::mueller_brown_defaults().steps() == 10000);
}

TEST_CASE("euler-maruyama: zero coefficients and one explicit step") {
  SimConfig c;
  c.dt = 0.1;
  c.horizon = 1.0;
  const NoiseBank noise(1);
  const oracle::ConstantDriftSde still(Vector{0, 0});
  const Path p = euler_maruyama(still, Vector{0.3, -0.4}, c, noise, 0);
  CHECK(p.length() == 11);
  for (std::size_t k = 0; k < p.length(); ++k) CHECK(oracle::rel_error(p.state(k), Vector{0.3, -0.4}) == 0.0);

  LinearSde lin;
  lin.a = 0.7;
  const Path q = euler_maruyama(lin, Vector{1, 0}, c, noise, 0);
  CHECK(q.state(1)[0] == doctest::Approx(1.07).epsilon(1e-15));
  CHECK(q.state(1)[1] == 0.0);
}

TEST_CASE("euler-maruyama: rotation conserves radius to O(dt)") {
  SimConfig c;
  c.dt = 1e-4;
  c.horizon = 1.0;
  const Path p = euler_maruyama(SilentRotation{}, Vector{1, 0}, c, NoiseBank(2), 0);
  CHECK(std::abs(norm(p.state(p.length() - 1)) - 1.0) <= 1e-3);
}

TEST_CASE("greedy delta net examples") {
  const std::vector<Vector> a{{0.0}, {0.5}, {1.0}};
  CHECK(greedy_delta_net(a, 0.4, euclidean(1)) == std::vector<std::size_t>{0, 1, 2});
  const std::vector<Vector> b{{0.0}, {0.1}, {0.5}};
  CHECK(greedy_delta_net(b, 0.3, euclidean(1)) == std::vector<std::size_t>{0, 2});
  // The Euclidean shortcut never changes the answer.
  CHECK(greedy_delta_net(b, 0.3, euclidean(1), 1.0) == std::vector<std::size_t>{0, 2});
}

TEST_CASE("delta net on the paraboloid") {
  const TrueChart chart(MongeSurface(SurfaceKind::kParaboloid));
  const DeltaNetResult r = delta_net_landmarks(chart, -1, 1, 50, 17);
  CHECK(r.within_tolerance);
  CHECK(r.points.size() >= 45);
  CHECK(r.points.size() <= 55);
  CHECK(r.pool_size == 10000);
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const Vector du = sub(r.points[i], r.points[j]);
      const Vector mid = scaled(add(r.points[i], r.points[j]), 0.5);
      CHECK(std::sqrt(dot(du, matvec(chart.metric(mid), du))) > r.delta);
    }
  }
  const DeltaNetResult again = delta_net_landmarks(chart, -1, 1, 50, 17);
  CHECK(again.points == r.points);
}

TEST_CASE("censoring") {
  const TrueChart chart(MongeSurface(SurfaceKind::kParaboloid));
  SimConfig c;
  c.dt = 0.01;
  c.horizon = 0.1;
  c.n_traj = 2;
  const std::vector<Vector> z0{{1.5, 0.0}, {0.0, 0.0}};
  const oracle::ConstantDriftSde still(Vector{0, 0});
  EnsembleOptions opt;
  const TrajectoryEnsemble e = simulate_ground_truth(chart, still, z0, c, opt);
  CHECK(e.summaries[0].censored);
  CHECK_FALSE(e.summaries[1].censored);
  CHECK(e.exit_fraction() == doctest::Approx(0.5));

  // Drifting out of the box mid-path; wells mark censored paths with -1 throughout.
  const WellSet wells;
  EnsembleOptions labelled;
  labelled.wells = &wells;
  const oracle::ConstantDriftSde fast(Vector{5.0, 0.0});
  const std::vector<Vector> start{{wells.centers[0][0], wells.centers[0][1]}};
  c.horizon = 0.5;
  const TrajectoryEnsemble f = simulate_ground_truth(chart, fast, start, c, labelled);
  CHECK(f.summaries[0].censored);
  for (auto l : f.summaries[0].labels) CHECK(l == -1);
}

TEST_CASE("learned simulation with oracle coefficients equals ground truth") {
  const TrueChart chart(MongeSurface(SurfaceKind::kSinusoidal), FourierEmbedding::from_seed(4, 0));
  const RotationSde sde;
  SimConfig c;
  c.dt = 0.01;
  c.horizon = 0.5;
  c.n_traj = 8;
  c.seed = 99;
  std::vector<Vector> z0, x0;
  for (int i = 0; i < 8; ++i) {
    z0.push_back({0.1 * i - 0.4, 0.05 * i});
    x0.push_back(chart.decode(z0.back()));
  }
  EnsembleOptions opt;
  opt.keep_paths = true;
  opt.radial_r = 0.5;
  const TrajectoryEnsemble gt = simulate_ground_truth(chart, sde, z0, c, opt);
  const TrajectoryEnsemble learned = simulate_learned(chart, sde, x0, c, opt);
  REQUIRE(gt.latent_paths.size() == learned.latent_paths.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < gt.latent_paths.size(); ++i)
    worst = std::max(worst, oracle::rel_error(learned.latent_paths[i].states, gt.latent_paths[i].states));
  CHECK(worst <= 1e-10);
  for (std::size_t i = 0; i < gt.summaries.size(); ++i) {
    CHECK(gt.summaries[i].censored == learned.summaries[i].censored);
    CHECK(gt.summaries[i].radial_time == learned.summaries[i].radial_time);
  }
}

TEST_CASE("ensembles do not depend on the worker count") {
  const TrueChart chart(MongeSurface(SurfaceKind::kParaboloid));
  const MuellerBrownSde sde;
  const WellSet wells;
  SimConfig c = SimConfig::mueller_brown_defaults();
  c.horizon = 1.0;
  c.n_traj = 16;
  const auto z0 = mb_initial_conditions(16, wells, -0.55, 0.55, 3);
  EnsembleOptions one;
  one.wells = &wells;
  EnsembleOptions four = one;
  four.jobs = 4;
  const auto a = simulate_ground_truth(chart, sde, z0, c, one);
  const auto b = simulate_ground_truth(chart, sde, z0, c, four);
  for (std::size_t i = 0; i < 16; ++i) CHECK(a.summaries[i].labels == b.summaries[i].labels);
}

TEST_CASE("zero networks give a constant decoded path") {
  const TrueChart chart(MongeSurface(SurfaceKind::kParaboloid));
  const MlpLatentModel zero(Mlp({2, 4, 2}), Mlp({2, 4, 4}));
  SimConfig c;
  c.horizon = 0.2;
  c.n_traj = 1;
  EnsembleOptions opt;
  opt.keep_paths = true;
  const std::vector<Vector> x0{chart.decode(Vector{0.2, 0.3})};
  const auto e = simulate_learned(chart, zero, x0, c, opt);
  const Path& p = e.ambient_paths[0];
  for (std::size_t k = 0; k < p.length(); ++k) CHECK(oracle::rel_error(p.state(k), x0[0]) == 0.0);
}

TEST_CASE("MB initial conditions are clipped") {
  const WellSet wells;
  const auto z = mb_initial_conditions(500, wells, -0.55, 0.55, 4);
  for (const Vector& p : z) {
    CHECK(std::abs(p[0]) <= 0.55);
    CHECK(std::abs(p[1]) <= 0.55);
  }
  CHECK(mb_initial_conditions(5, wells, -0.55, 0.55, 4) == std::vector<Vector>(z.begin(), z.begin() + 5));
}

TEST_CASE("binary path dump") {
  const TrueChart chart(MongeSurface(SurfaceKind::kParaboloid));
  SimConfig c;
  c.horizon = 0.1;
  c.n_traj = 2;
  EnsembleOptions opt;
  opt.keep_paths = true;
  const std::vector<Vector> z0{{0, 0}, {0.1, 0.1}};
  const auto e = simulate_ground_truth(chart, RotationSde{}, z0, c, opt);
  const auto file = std::filesystem::temp_directory_path() / "geosde_paths_test.bin";
  write_paths_binary(file.string(), e);
  std::ifstream in(file, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  CHECK(std::string(magic, 8) == "GEOSDEP1");
  CHECK(std::filesystem::file_size(file) == 8 + 24 + 2 * 11 * 2 * 8);
  std::filesystem::remove(file);
}
