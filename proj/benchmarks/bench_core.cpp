#include <benchmark/benchmark.h>

#include "geosde/chart_training.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/evaluate.hpp"
#include "geosde/geometry.hpp"
#include "geosde/latent_sde.hpp"
#include "geosde/linalg.hpp"
#include "geosde/mlp.hpp"
#include "geosde/rng.hpp"
#include "geosde/simulate.hpp"
#include "geosde/surfaces.hpp"

using namespace geosde;

namespace {

TrueChart surface(std::size_t k_f) {
  return TrueChart(MongeSurface(SurfaceKind::kParaboloid), FourierEmbedding::from_seed(k_f, 0));
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix m(r, c);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

}  // namespace

static void BM_MlpForward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  CounterRng rng(1);
  const Mlp net = Mlp::glorot({11, width, width, 2}, rng);
  const Vector x(11, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(net, x));
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(256);

static void BM_MlpJacobian(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  CounterRng rng(1);
  const Mlp net = Mlp::glorot({2, width, width, 11}, rng);
  const Vector z{0.1, -0.2};
  for (auto _ : state) benchmark::DoNotOptimize(mlp_input_jacobian(net, z));
}
BENCHMARK(BM_MlpJacobian)->Arg(64)->Arg(256);

static void BM_MlpHvp(benchmark::State& state) {
  CounterRng rng(1);
  const Mlp net = Mlp::glorot({11, 64, 64, 2}, rng);
  const Vector x(11, 0.1);
  const Vector v(11, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_input_hvp(net, x, 0, v));
}
BENCHMARK(BM_MlpHvp);

static void BM_TangentLossTrace(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const Matrix j = random_matrix(dim, 2, 2);
  const Matrix u = thin_qr(random_matrix(dim, 2, 3)).q;
  Matrix grad;
  for (auto _ : state) benchmark::DoNotOptimize(tangent_loss_trace(j, u, &grad));
}
BENCHMARK(BM_TangentLossTrace)->Arg(11)->Arg(201);

static void BM_SymEig(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(dim, 2, 4);
  const Matrix lambda = matmul_nt(a, a);
  for (auto _ : state) benchmark::DoNotOptimize(sym_eig(lambda));
}
BENCHMARK(BM_SymEig)->Arg(11)->Arg(51);

static void BM_FactoredSpectrum(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto cov = AmbientCovariance::factored(random_matrix(dim, 2, 5), Matrix{{1.0, 0.2}, {0.2, 0.5}});
  for (auto _ : state) benchmark::DoNotOptimize(cov.spectrum(2));
}
BENCHMARK(BM_FactoredSpectrum)->Arg(11)->Arg(201);

static void BM_EncoderPullback(benchmark::State& state) {
  const TrueChart truth = surface(4);
  const RotationSde sde;
  const LearnedChart chart = init_chart(11, 2, 64, 1);
  const Vector z{0.2, 0.3};
  const auto amb = oracle_ambient(truth, sde, z);
  const Vector x = truth.decode(z);
  for (auto _ : state) benchmark::DoNotOptimize(encoder_pullback_drift(chart, x, amb));
}
BENCHMARK(BM_EncoderPullback);

static void BM_Stage1Epoch(benchmark::State& state) {
  const TrueChart truth = surface(4);
  const RotationSde sde;
  const LandmarkSet lms = build_landmark_set(truth, sde, uniform_points(50, -1, 1, 1));
  LearnedChart chart = init_chart(11, 2, 64, 1);
  PenaltyConfig penalty;
  std::vector<double> ge, gd;
  for (auto _ : state)
    benchmark::DoNotOptimize(stage1_objective(chart, lms, penalty, TangentForm::kExact, {}, &ge, &gd));
}
BENCHMARK(BM_Stage1Epoch)->Unit(benchmark::kMillisecond);

static void BM_Stage2Objective(benchmark::State& state) {
  const TrueChart truth = surface(4);
  const RotationSde sde;
  const LandmarkSet lms = build_landmark_set(truth, sde, uniform_points(50, -1, 1, 1));
  const LatentTargets targets = build_targets(truth, lms);
  CounterRng rng(2);
  const Mlp net = Mlp::glorot({2, 64, 64, 2}, rng);
  std::vector<double> g;
  for (auto _ : state) benchmark::DoNotOptimize(drift_objective(net, targets, &g));
}
BENCHMARK(BM_Stage2Objective)->Unit(benchmark::kMicrosecond);

static void BM_GroundTruthEnsemble(benchmark::State& state) {
  const TrueChart truth = surface(4);
  const RotationSde sde;
  SimConfig cfg = SimConfig::rotation_defaults();
  cfg.n_traj = 100;
  const std::vector<Vector> z0(cfg.n_traj, Vector{0.0, 0.0});
  EnsembleOptions opt;
  opt.radial_r = 2.0;
  opt.stop_at_radial = true;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_ground_truth(truth, sde, z0, cfg, opt));
}
BENCHMARK(BM_GroundTruthEnsemble)->Unit(benchmark::kMillisecond);

static void BM_DeltaNet(benchmark::State& state) {
  const TrueChart truth = surface(4);
  for (auto _ : state) benchmark::DoNotOptimize(delta_net_landmarks(truth, -1, 1, 50, 3));
}
BENCHMARK(BM_DeltaNet)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
