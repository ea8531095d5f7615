#include <doctest.h>

#include <cmath>

#include "geosde/chart_training.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/linalg.hpp"
#include "geosde/rng.hpp"
#include "geosde/surfaces.hpp"
#include "oracles.hpp"
#include "properties.hpp"

using namespace geosde;

namespace {

// Linear encoder/decoder pair with chosen weights.
LearnedChart linear_pair(const Matrix& enc, const Matrix& dec) {
  Mlp e({enc.cols(), enc.rows()}, {Activation::kIdentity});
  Mlp d({dec.cols(), dec.rows()}, {Activation::kIdentity});
  for (std::size_t o = 0; o < enc.rows(); ++o)
    for (std::size_t i = 0; i < enc.cols(); ++i) e.weight(0, o, i) = enc(o, i);
  for (std::size_t o = 0; o < dec.rows(); ++o)
    for (std::size_t i = 0; i < dec.cols(); ++i) d.weight(0, o, i) = dec(o, i);
  return LearnedChart(std::move(e), std::move(d));
}

class OffsetChart final : public Chart {
 public:
  OffsetChart(const Chart& base, Vector offset) : base_(base), offset_(std::move(offset)) {}
  std::size_t latent_dim() const override { return 2; }
  std::size_t ambient_dim() const override { return base_.ambient_dim(); }
  Vector decode(std::span<const double> z) const override { return add(base_.decode(z), offset_); }
  Matrix decoder_jacobian(std::span<const double> z) const override { return base_.decoder_jacobian(z); }
  Vector decoder_second_directional(std::span<const double> z, std::span<const double> v) const override {
    return base_.decoder_second_directional(z, v);
  }
  Vector encode(std::span<const double> x) const override { return base_.encode(x); }
  Matrix encoder_jacobian(std::span<const double> x) const override { return base_.encoder_jacobian(x); }
  Vector encoder_hvp(std::span<const double> x, std::size_t j, std::span<const double> v) const override {
    return base_.encoder_hvp(x, j, v);
  }

 private:
  const Chart& base_;
  Vector offset_;
};

Matrix random_frame(std::size_t dim, std::size_t d, CounterRng& rng) {
  Matrix a(dim, d);
  for (double& x : a.data()) x = rng.normal();
  return thin_qr(a).q;
}

}  // namespace

TEST_CASE("reconstruction loss") {
  const TrueChart truth(MongeSurface(SurfaceKind::kParaboloid));
  const Vector x = truth.decode(Vector{0.3, 0.2});
  CHECK(loss_reconstruction(truth, x) == 0.0);
  const OffsetChart off(truth, Vector{0.1, 0.0, -0.2});
  CHECK(loss_reconstruction(off, x) == doctest::Approx(0.05).epsilon(1e-14));
}

TEST_CASE("tangent loss examples") {
  CounterRng rng(2);
  const Matrix u = random_frame(11, 2, rng);
  CHECK(std::abs(tangent_loss_trace(u, u)) <= 1e-14);
  CHECK(std::abs(tangent_loss_trace(u * Matrix{{2, 1}, {0, 3}}, u)) <= 1e-13);
  // Orthogonal lines in R^4.
  CHECK(tangent_loss_trace(Matrix{{1}, {0}, {0}, {0}}, Matrix{{0}, {1}, {0}, {0}}) == doctest::Approx(1.0));
}

TEST_CASE("tangent loss trace form vs dense projectors") {
  CounterRng rng(3);
  for (std::size_t dim : {11u, 201u}) {
    for (int trial = 0; trial < 10; ++trial) {
      Matrix j(dim, 2);
      for (double& x : j.data()) x = rng.normal();
      const Matrix u = random_frame(dim, 2, rng);
      const double a = tangent_loss_trace(j, u);
      CHECK(std::abs(a - oracle::dense_tangent_loss(j, u)) <= 1e-10);
      CHECK(a >= -1e-14);
    }
  }
}

TEST_CASE("tangent loss gradient vs differences") {
  CounterRng rng(4);
  Matrix j(7, 2);
  for (double& x : j.data()) x = rng.normal();
  const Matrix u = random_frame(7, 2, rng);
  Matrix grad;
  tangent_loss_trace(j, u, &grad);
  const Vector fd = oracle::fd_gradient(
      [&](std::span<const double> p) { return tangent_loss_trace(Matrix(7, 2, Vector(p.begin(), p.end())), u); },
      j.data(), 1e-6);
  CHECK(oracle::rel_error(grad.data(), fd) <= 1e-7);
}

TEST_CASE("simplified form agrees for an exact inverse pair") {
  CounterRng rng(5);
  Matrix j(5, 2);
  for (double& x : j.data()) x = rng.normal();
  const Matrix dpi = inverse(matmul_tn(j, j)) * j.transpose();  // left inverse
  const Matrix u = random_frame(5, 2, rng);
  CHECK(tangent_loss_simplified(dpi * u, j, u) == doctest::Approx(tangent_loss_trace(j, u)).epsilon(1e-12));
}

TEST_CASE("inverse consistency and contractive losses") {
  const Matrix enc{{2, 0, 0}, {0, 2, 0}};
  const Matrix dec{{1, 0}, {0, 1}, {0, 0}};
  const LearnedChart pair = linear_pair(enc, dec);
  CHECK(loss_inverse_consistency(pair, Vector{0.1, 0.2, 0.3}) == doctest::Approx(2.0));
  CHECK(loss_contractive(pair, Vector{0.1, 0.2, 0.3}) == doctest::Approx(8.0));

  const LearnedChart exact = linear_pair(Matrix{{1, 0, 0}, {0, 1, 0}}, dec);
  CHECK(loss_inverse_consistency(exact, Vector{0.4, -0.1, 0.0}) == 0.0);

  const LearnedChart zero = init_chart(3, 2, 4, 1);
  LearnedChart flat(Mlp({3, 4, 2}), zero.decoder());
  CHECK(loss_contractive(flat, Vector{0.1, 0.2, 0.3}) == 0.0);
}

TEST_CASE("contractive and inverse losses vs explicit jacobians") {
  const LearnedChart chart = init_chart(5, 2, 8, 9);
  const Vector x{0.1, -0.2, 0.3, 0.0, 0.5};
  const Matrix dpi = chart.encoder_jacobian(x);
  CHECK(loss_contractive(chart, x) == doctest::Approx(frobenius_sq(dpi)).epsilon(1e-12));
  const Vector z = chart.encode(x);
  const Matrix m = dpi * chart.decoder_jacobian(z) - Matrix::identity(2);
  CHECK(loss_inverse_consistency(chart, x) == doctest::Approx(frobenius_sq(m)).epsilon(1e-12));
}

TEST_CASE("condition semantics") {
  PenaltyConfig p;
  p.lambda_t = 3.0;
  p.lambda_f = 2.0;
  p.lambda_c = 0.5;
  p.condition = Condition::kBaseline;
  CHECK(p.weight_t() == 0.0);
  CHECK(p.weight_f() == 0.0);
  CHECK(p.weight_c() == 0.0);
  p.condition = Condition::kT;
  CHECK(p.weight_t() == 3.0);
  CHECK(p.weight_f() == 0.0);
  p.condition = Condition::kTF;
  CHECK(p.weight_t() == 3.0);
  CHECK(p.weight_f() == 2.0);
  CHECK(p.weight_c() == 0.0);
  p.condition = Condition::kC;
  CHECK(p.weight_c() == 0.5);
  for (auto c : {Condition::kBaseline, Condition::kT, Condition::kF, Condition::kC, Condition::kTF, Condition::kAtlas})
    CHECK(parse_condition(to_string(c)) == c);
  CHECK(parse_condition("tf") == Condition::kTF);
}

TEST_CASE("baseline objective is the mean reconstruction loss") {
  const TrueChart truth(MongeSurface(SurfaceKind::kParaboloid), FourierEmbedding::from_seed(4, 0));
  const RotationSde sde;
  const std::vector<Vector> pts{{0.1, 0.2}, {-0.5, 0.3}, {0.7, -0.7}};
  const LandmarkSet lms = build_landmark_set(truth, sde, pts);
  const LearnedChart chart = init_chart(11, 2, 16, 3);
  PenaltyConfig p;
  p.condition = Condition::kBaseline;
  const LossTerms t = stage1_objective(chart, lms, p, TangentForm::kExact, {}, nullptr, nullptr);
  double mean = 0.0;
  for (const auto& lm : lms.items) mean += loss_reconstruction(chart, lm.x) / 3.0;
  CHECK(t.total == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("landmark frames span the tangent plane") {
  const TrueChart truth(MongeSurface(SurfaceKind::kQuarticDome), FourierEmbedding::from_seed(4, 2));
  const RotationSde sde;
  const LandmarkSet lms = build_landmark_set(truth, sde, std::vector<Vector>{{0.3, -0.4}});
  const auto& lm = lms.items[0];
  CHECK(max_abs(matmul_nt(lm.frame, lm.frame) - tangent_projector(truth.decoder_jacobian(lm.z_true))) <= 1e-10);
}

TEST_CASE("stage 1 memorizes a single landmark") {
  const TrueChart truth(MongeSurface(SurfaceKind::kParaboloid), FourierEmbedding::from_seed(4, 0));
  const RotationSde sde;
  // train_stage1 wants N >= 2; a duplicated point has the same objective.
  const LandmarkSet lms = build_landmark_set(truth, sde, std::vector<Vector>{{0.3, -0.2}, {0.3, -0.2}});
  LearnedChart chart = init_chart(11, 2, 32, 11);
  PenaltyConfig p;
  p.condition = Condition::kBaseline;
  Stage1Schedule s;
  s.epochs = 400;
  s.batch_size = 2;
  const StageOneReport r = train_stage1(chart, lms, p, s, 1);
  CHECK_FALSE(r.diverged);
  CHECK(loss_reconstruction(chart, lms.items[0].x) < 1e-4);
}

TEST_CASE("stage 1 losses stay non-negative and training is deterministic") {
  const TrueChart truth(MongeSurface(SurfaceKind::kParaboloid), FourierEmbedding::from_seed(4, 0));
  const RotationSde sde;
  std::vector<Vector> pts;
  CounterRng rng(8);
  for (int i = 0; i < 20; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  const LandmarkSet lms = build_landmark_set(truth, sde, pts);
  Stage1Schedule s;
  s.epochs = 30;
  PenaltyConfig p;
  LearnedChart a = init_chart(11, 2, 16, 4);
  LearnedChart b = init_chart(11, 2, 16, 4);
  const StageOneReport ra = train_stage1(a, lms, p, s, 9);
  const StageOneReport rb = train_stage1(b, lms, p, s, 9);
  CHECK(a.encoder() == b.encoder());
  CHECK(a.decoder() == b.decoder());
  REQUIRE(ra.epochs.size() == 30);
  for (const LossTerms& t : ra.epochs) {
    CHECK(t.reconstruction >= 0.0);
    CHECK(t.tangent >= -1e-12);
    CHECK(t.inverse >= 0.0);
  }
  CHECK(rb.epochs.back().total == ra.epochs.back().total);
  CHECK(ra.epochs.back().total < ra.epochs.front().total);
}

TEST_CASE("stage 1 invariants: order and inactive penalties") {
  const TrueChart truth(MongeSurface(SurfaceKind::kParaboloid), FourierEmbedding::from_seed(4, 0));
  const RotationSde sde;
  std::vector<Vector> pts;
  CounterRng rng(12);
  for (int i = 0; i < 8; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  const LandmarkSet lms = build_landmark_set(truth, sde, pts);
  const LearnedChart chart = init_chart(11, 2, 16, 4);
  PenaltyConfig p;
  const std::vector<std::size_t> fwd{0, 1, 2, 3, 4, 5, 6, 7};
  const std::vector<std::size_t> rev{7, 6, 5, 4, 3, 2, 1, 0};
  const double a = stage1_objective(chart, lms, p, TangentForm::kExact, fwd, nullptr, nullptr).total;
  const double b = stage1_objective(chart, lms, p, TangentForm::kExact, rev, nullptr, nullptr).total;
  CHECK(a == doctest::Approx(b).epsilon(1e-14));

  // Condition F never sees the tangent weight.
  Stage1Schedule s;
  s.epochs = 10;
  s.batch_size = 8;
  PenaltyConfig f;
  f.condition = Condition::kF;
  f.lambda_t = 0.0;
  PenaltyConfig g = f;
  g.lambda_t = 7.0;
  LearnedChart c1 = chart;
  LearnedChart c2 = chart;
  train_stage1(c1, lms, f, s, 3);
  train_stage1(c2, lms, g, s, 3);
  CHECK(c1.encoder() == c2.encoder());
  CHECK(c1.decoder() == c2.decoder());
  CHECK_THROWS_AS(train_stage1(c1, build_landmark_set(truth, sde, std::vector<Vector>{{0, 0}}), f, s, 3),
                  std::invalid_argument);
}

TEST_CASE("sigma_min diagnostic of an exact-looking chart") {
  const LearnedChart chart = init_chart(11, 2, 16, 4);
  const TrueChart truth(MongeSurface(SurfaceKind::kParaboloid), FourierEmbedding::from_seed(4, 0));
  const double s = sigma_min_diagnostic(chart, truth, -1, 1, 5);
  CHECK(std::isfinite(s));
  CHECK(s >= 0.0);
  CHECK(default_chart_width(11) == 64);
  CHECK(default_chart_width(201) == 256);
}

TEST_CASE("trace-form check catches a corrupted loss") {
  const auto good = oracle::check_tangent_trace_form(
      [](const Matrix& j, const Matrix& u) { return tangent_loss_trace(j, u); }, 1);
  CHECK(good.passed);
  // Drops the metric inverse: d - Tr(C C^T).
  const auto bad = oracle::check_tangent_trace_form(
      [](const Matrix& j, const Matrix& u) {
        const Matrix c = matmul_tn(j, u);
        return static_cast<double>(j.cols()) - frobenius_sq(c);
      },
      1);
  CHECK_FALSE(bad.passed);
  const auto scaled = oracle::check_tangent_trace_form(
      [](const Matrix& j, const Matrix& u) { return 1.0001 * tangent_loss_trace(j, u); }, 1);
  CHECK_FALSE(scaled.passed);
}
