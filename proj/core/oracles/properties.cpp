#include "properties.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "geosde/chart.hpp"
#include "geosde/chart_training.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/evaluate.hpp"
#include "geosde/geometry.hpp"
#include "geosde/linalg.hpp"
#include "geosde/rng.hpp"
#include "geosde/simulate.hpp"
#include "geosde/surfaces.hpp"
#include "oracles.hpp"

namespace geosde::oracle {

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, CounterRng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.data()) v = scale * rng.normal();
  return m;
}

Vector random_vector(std::size_t n, CounterRng& rng, double scale = 1.0) {
  Vector v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

Matrix random_spd(std::size_t d, CounterRng& rng) {
  const Matrix a = random_matrix(d, d, rng);
  return symmetrize(matmul_nt(a, a) + 0.1 * Matrix::identity(d));
}

Matrix random_frame(std::size_t rows, std::size_t cols, CounterRng& rng) {
  return thin_qr(random_matrix(rows, cols, rng)).q;
}

Vector random_latent(CounterRng& rng, double half_width = 1.0) {
  return {rng.uniform(-half_width, half_width), rng.uniform(-half_width, half_width)};
}

Mlp random_net(std::vector<std::size_t> widths, CounterRng& rng, double bias_scale = 0.5) {
  Mlp net = Mlp::glorot(std::move(widths), rng);
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    for (std::size_t o = 0; o < net.layers()[l].out; ++o) net.bias(l, o) = bias_scale * rng.normal();
  return net;
}

std::shared_ptr<const TrueChart> true_chart(SurfaceKind kind, std::size_t k_f, std::uint64_t seed) {
  return std::make_shared<TrueChart>(MongeSurface(kind), FourierEmbedding::from_seed(k_f, seed));
}

// Tracks the worst error over all cases of one property.
struct Tally {
  PropertyResult r;
  Tally(std::string name, double tol) {
    r.name = std::move(name);
    r.tolerance = tol;
  }
  void add(double err, const std::string& where = {}) {
    ++r.cases;
    if (std::isnan(err)) err = std::numeric_limits<double>::infinity();
    if (err > r.worst) {
      r.worst = err;
      r.detail = where;
    }
  }
  PropertyResult finish() {
    r.passed = r.cases > 0 && r.worst <= r.tolerance;
    return r;
  }
};

double mat_rel_error(const Matrix& a, const Matrix& b) { return rel_error(a.data(), b.data()); }

}  // namespace

PropertyResult check_ito_round_trip(std::uint64_t seed) {
  Tally t("ito_round_trip", 1e-8);
  CounterRng rng(derive_seed(seed, "ito_round_trip"));
  for (SurfaceKind kind : kAllSurfaces) {
    const auto truth = true_chart(kind, 4, seed);
    const ShearChart shear(truth, 0.3);
    for (int i = 0; i < 100; ++i) {
      const Vector z = random_latent(rng);
      const LatentCoefficients local = latent_from_covariance(random_vector(2, rng), random_spd(2, rng));
      for (const Chart* chart : {static_cast<const Chart*>(truth.get()),
                                 static_cast<const Chart*>(&shear)}) {
        const AmbientCoefficients amb = ito_local_to_ambient(*chart, z, local);
        const AmbientToLocal back = ito_ambient_to_local(*chart, chart->decode(z), amb);
        const double err = std::max(rel_error(back.local.mu, local.mu),
                                    mat_rel_error(back.local.cov, local.cov));
        t.add(back.gc_ok ? err : std::numeric_limits<double>::infinity(),
              std::string(to_string(kind)) + (chart == &shear ? " (sheared)" : ""));
      }
    }
  }
  return t.finish();
}

PropertyResult check_tangent_trace_form(const TangentLossFn& loss, std::uint64_t seed) {
  Tally t("tangent_trace_form", 1e-10);
  CounterRng rng(derive_seed(seed, "tangent_trace_form"));
  for (int i = 0; i < 100; ++i) {
    const std::size_t dim = i % 2 == 0 ? 11 : 201;
    const Matrix j = random_matrix(dim, 2, rng, rng.uniform(0.2, 3.0));
    // Half the frames sit near rng(J) so small losses are exercised too.
    const Matrix u = i % 4 < 2 ? random_frame(dim, 2, rng)
                               : thin_qr(j + random_matrix(dim, 2, rng, 0.05)).q;
    const double got = loss(j, u);
    const double want = dense_tangent_loss(j, u);
    t.add(std::abs(got - want), "D=" + std::to_string(dim));
  }
  return t.finish();
}

PropertyResult check_bias_decomposition(std::uint64_t seed) {
  Tally t("bias_decomposition", 1e-8);
  CounterRng rng(derive_seed(seed, "bias_decomposition"));
  const auto truth = true_chart(SurfaceKind::kParaboloid, 4, seed);
  const RotationSde sde;
  std::vector<Vector> pts;
  for (int i = 0; i < 12; ++i) pts.push_back(random_latent(rng));
  const LandmarkSet landmarks = build_landmark_set(*truth, sde, pts);
  Stage1Schedule schedule;
  schedule.epochs = 15;
  schedule.batch_size = 6;
  for (int c = 0; c < 50; ++c) {
    LearnedChart chart = init_chart(truth->ambient_dim(), 2, 16, derive_seed(seed, "chart/" + std::to_string(c)));
    const bool trained = c % 2 == 1;
    if (trained) train_stage1(chart, landmarks, {}, schedule, derive_seed(seed, "batches/" + std::to_string(c)));
    const Vector z = random_latent(rng);
    const Vector x = truth->decode(z);
    const BiasTerms bias = bias_decomposition(chart, x, oracle_ambient(*truth, sde, z));
    const double scale = std::max(1.0, norm(sub(bias.mu_dec, bias.mu_enc)));
    t.add(bias.residual / scale, trained ? "trained chart" : "untrained chart");
  }
  return t.finish();
}

PropertyResult check_coordinate_invariance(std::uint64_t seed) {
  Tally t("coordinate_invariance", 1e-8);
  CounterRng rng(derive_seed(seed, "coordinate_invariance"));
  const auto truth = true_chart(SurfaceKind::kHyperbolicParaboloid, 4, seed);
  const LearnedChart learned = init_chart(truth->ambient_dim(), 2, 16, derive_seed(seed, "learned"));
  for (int i = 0; i < 50; ++i) {
    // A = R(a) diag(s1, s2) R(b) with s1 / s2 <= 10.
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    const double b = rng.uniform(0.0, 2.0 * M_PI);
    const double s1 = rng.uniform(0.5, 2.0);
    const double s2 = s1 * rng.uniform(0.1, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const Matrix ra{{std::cos(a), -std::sin(a)}, {std::sin(a), std::cos(a)}};
    const Matrix rb{{std::cos(b), -std::sin(b)}, {std::sin(b), std::cos(b)}};
    const Matrix am = ra * Matrix{{s1, 0.0}, {0.0, s2}} * rb;
    if (condition_number(am) > 10.0 + 1e-9) {
      t.add(std::numeric_limits<double>::infinity(), "condition > 10");
      continue;
    }
    const Vector dmu = random_vector(2, rng);
    const Matrix ds = symmetrize(random_matrix(2, 2, rng));
    const Vector z = random_latent(rng);
    for (const Chart* chart : {static_cast<const Chart*>(truth.get()),
                               static_cast<const Chart*>(&learned)}) {
      const ReparamReport rep = coordinate_reparam_check(*chart, z, am, dmu, ds);
      const double err =
          std::max({rep.projector_diff, rep.drift_norm_diff / std::max(1.0, rep.drift_norm),
                    rep.trace_form_diff / std::max(1.0, std::abs(rep.trace_form))});
      t.add(err, chart == &learned ? "learned chart" : "true chart");
    }
  }
  return t.finish();
}

PropertyResult check_projector_identities(std::uint64_t seed) {
  Tally t("projector_identities", 1e-10);
  CounterRng rng(derive_seed(seed, "projector_identities"));
  for (int i = 0; i < 500; ++i) {
    const std::size_t dim = 3 + rng.below(28);
    const std::size_t d = 1 + rng.below(std::min<std::size_t>(4, dim - 1));
    const Matrix h1 = random_frame(dim, d, rng);
    const Matrix h2 = random_frame(dim, d, rng);
    const ProjectorIdentities id = projector_identities(h1, h2);
    const double dense = 0.5 * frobenius_sq(matmul_nt(h1, h1) - matmul_nt(h2, h2));
    const double err = std::max({std::abs(id.half_sq_distance - dense), std::abs(id.frame_form - dense),
                                 std::abs(id.normal_form_12 - dense),
                                 std::abs(id.normal_form_21 - dense)});
    t.add(err / std::max(1.0, dense),
          "D=" + std::to_string(dim) + " d=" + std::to_string(d));
  }
  return t.finish();
}

PropertyResult check_projector_lipschitz(std::uint64_t seed) {
  // worst = max ||f(X) - f(Y)||_F / (sqrt(2)/s ||X - Y||_F); must stay <= 1.
  Tally t("projector_lipschitz", 1.0 + 1e-10);
  CounterRng rng(derive_seed(seed, "projector_lipschitz"));
  for (int i = 0; i < 500; ++i) {
    const std::size_t dim = 3 + rng.below(28);
    const std::size_t d = 1 + rng.below(std::min<std::size_t>(4, dim - 1));
    const Matrix x = random_matrix(dim, d, rng);
    const double eps = std::pow(10.0, rng.uniform(-4.0, 0.5));
    const Matrix y = x + random_matrix(dim, d, rng, eps);
    const double s = std::min(min_singular_value(x), min_singular_value(y));
    const double lhs = frobenius_norm(tangent_projector(x) - tangent_projector(y));
    const double rhs = std::sqrt(2.0) / s * frobenius_norm(x - y);
    t.add(lhs / rhs, "D=" + std::to_string(dim) + " d=" + std::to_string(d));
  }
  return t.finish();
}

PropertyResult check_covariation_identity(std::uint64_t seed) {
  Tally t("covariation_identity", 1e-8);
  CounterRng rng(derive_seed(seed, "covariation_identity"));
  for (SurfaceKind kind : kAllSurfaces) {
    const auto truth = true_chart(kind, 2, seed);
    for (int i = 0; i < 10; ++i) {
      const auto shear = std::make_shared<ShearChart>(truth, rng.uniform(-0.5, 0.5));
      const LinearReparamChart mixed(shear, Matrix{{1.2, 0.3}, {-0.2, 0.8}});
      for (const Chart* chart : {static_cast<const Chart*>(shear.get()),
                                 static_cast<const Chart*>(&mixed)}) {
        const Vector w = random_latent(rng, 0.5);
        const Vector x = chart->decode(w);
        const Matrix sigma = random_spd(2, rng);
        const AmbientCovariance lambda =
            AmbientCovariance::factored(chart->decoder_jacobian(w), sigma);
        const Vector lhs = encoder_hessian_contraction(*chart, x, lambda);
        const Vector rhs = scaled(matvec(chart->encoder_jacobian(x), chart->ito_correction(w, sigma)), -1.0);
        t.add(rel_error(lhs, rhs), std::string(to_string(kind)));
      }
    }
  }
  return t.finish();
}

PropertyResult check_network_autodiff(std::uint64_t seed) {
  Tally t("network_autodiff", 1e-5);
  CounterRng rng(derive_seed(seed, "network_autodiff"));
  for (int n = 0; n < 50; ++n) {
    std::vector<std::size_t> widths{1 + rng.below(8)};
    const std::size_t hidden = 1 + rng.below(3);
    for (std::size_t h = 0; h < hidden; ++h) widths.push_back(2 + rng.below(11));
    widths.push_back(1 + rng.below(8));
    const Mlp net = random_net(widths, rng);
    const Vector x = random_vector(net.input_dim(), rng);
    const std::string tag = "net " + std::to_string(n);

    t.add(rel_error(mlp_forward(net, x), reference_forward(net, x)), tag + " forward");

    const Matrix jac = mlp_input_jacobian(net, x);
    const Matrix fd = fd_jacobian([&](std::span<const double> p) { return mlp_forward(net, p); }, x);
    t.add(rel_norm_error(jac.data(), fd.data()), tag + " jacobian");

    const Vector v = random_vector(net.input_dim(), rng);
    for (std::size_t j = 0; j < net.output_dim(); ++j) {
      const Vector hvp = mlp_input_hvp(net, x, j, v);
      const double h = 1e-5;
      const Vector xp = add(x, scaled(v, h));
      const Vector xm = sub(x, scaled(v, h));
      const Matrix jp = mlp_input_jacobian(net, xp);
      const Matrix jm = mlp_input_jacobian(net, xm);
      const Vector fd_hvp = scaled(sub(jp.row(j), jm.row(j)), 1.0 / (2.0 * h));
      t.add(rel_norm_error(hvp, fd_hvp, 1e-6), tag + " hvp");
    }

    const Vector seed_vec = random_vector(net.output_dim(), rng);
    t.add(rel_norm_error(mlp_param_gradient(net, x, seed_vec), fd_param_gradient(net, x, seed_vec)),
          tag + " parameter gradient");
  }
  return t.finish();
}

PropertyResult check_stage1_gradient(std::uint64_t seed) {
  Tally t("stage1_gradient", 1e-4);
  CounterRng rng(derive_seed(seed, "stage1_gradient"));
  const auto truth = true_chart(SurfaceKind::kSinusoidal, 1, seed);
  const RotationSde sde;
  std::vector<Vector> pts;
  for (int i = 0; i < 6; ++i) pts.push_back(random_latent(rng));
  const LandmarkSet landmarks = build_landmark_set(*truth, sde, pts);
  const Condition conditions[] = {Condition::kBaseline, Condition::kT, Condition::kF, Condition::kC,
                                  Condition::kTF};
  int k = 0;
  for (Condition cond : conditions) {
    for (TangentForm form : {TangentForm::kExact, TangentForm::kSimplified}) {
      const LearnedChart chart = init_chart(truth->ambient_dim(), 2, 8, derive_seed(seed, "chart/" + std::to_string(k++)));
      PenaltyConfig penalty;
      penalty.condition = cond;
      penalty.lambda_c = 0.3;
      std::vector<double> eg;
      std::vector<double> dg;
      stage1_objective(chart, landmarks, penalty, form, {}, &eg, &dg);
      Vector grad = eg;
      grad.insert(grad.end(), dg.begin(), dg.end());

      Vector theta(chart.encoder().params().begin(), chart.encoder().params().end());
      theta.insert(theta.end(), chart.decoder().params().begin(), chart.decoder().params().end());
      const std::size_t ne = chart.encoder().param_count();
      const auto objective = [&](std::span<const double> p) {
        LearnedChart c = chart;
        std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(ne), c.encoder().params().begin());
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(ne), p.end(), c.decoder().params().begin());
        return stage1_objective(c, landmarks, penalty, form, {}, nullptr, nullptr).total;
      };
      const Vector fd = fd_gradient(objective, theta, 1e-6);
      t.add(rel_norm_error(grad, fd), std::string(to_string(cond)) +
                                          (form == TangentForm::kExact ? " exact" : " simplified"));
    }
  }
  return t.finish();
}

PropertyResult check_hessian_contraction(std::uint64_t seed) {
  Tally t("hessian_contraction", 1e-10);
  CounterRng rng(derive_seed(seed, "hessian_contraction"));
  const std::size_t dim = 11;
  for (int i = 0; i < 20; ++i) {
    const LearnedChart chart(random_net({dim, 16, 16, 2}, rng), random_net({2, 16, 16, dim}, rng));
    const Vector x = random_vector(dim, rng, 0.7);
    const std::size_t r = i % 2 == 0 ? 2 : 4;
    const AmbientCovariance factored =
        AmbientCovariance::factored(random_matrix(dim, r, rng), random_spd(r, rng));
    const AmbientCovariance dense = AmbientCovariance::dense(factored.to_dense());
    const Vector want = dense_hessian_contraction(chart.encoder(), x, factored.to_dense());
    t.add(rel_error(encoder_hessian_contraction(chart, x, factored), want), "factored");
    t.add(rel_error(encoder_hessian_contraction(chart, x, dense), want), "dense");
  }
  return t.finish();
}

PropertyResult check_mfpt_radial() {
  // worst = max |MFPT - r/v| / dt; must stay <= 1.
  Tally t("mfpt_radial", 1.0);
  const FlatChart flat(3);
  const Decoder decode = [&](std::span<const double> z) { return flat.decode(z); };
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.horizon = 2.0;
  cfg.n_traj = 4;
  cfg.box_lo = -10.0;
  cfg.box_hi = 10.0;
  EnsembleOptions opt;
  opt.stop_at_radial = true;
  const std::vector<Vector> z0(cfg.n_traj, Vector{0.0, 0.0});
  for (const auto& [speed, r] : {std::pair{0.7, 0.5}, std::pair{0.3, 0.5}, std::pair{1.3, 2.0},
                                 std::pair{0.1, 0.5}}) {
    const ConstantDriftSde sde({speed * 0.6, speed * 0.8});
    opt.radial_r = r;
    const TrajectoryEnsemble ens = simulate_ensemble(sde, decode, z0, cfg, opt);
    std::size_t used = 0;
    const double mfpt = mean_radial_time(ens, &used);
    const double want = std::min(r / speed, cfg.horizon);
    t.add(used == cfg.n_traj ? std::abs(mfpt - want) / cfg.dt : std::numeric_limits<double>::infinity(),
          "v=" + std::to_string(speed) + " r=" + std::to_string(r));
  }
  return t.finish();
}

PropertyResult check_mfpt_dwell_scan() {
  Tally t("mfpt_dwell_scan", 0.0);
  using Seq = std::vector<std::int8_t>;
  const auto run = [](const Seq& s) { return extract_passages(s, 10, 1.0); };
  const auto repeat = [](std::int8_t v, int n) { return Seq(static_cast<std::size_t>(n), v); };
  const auto cat = [](std::initializer_list<Seq> parts) {
    Seq out;
    for (const Seq& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
  };
  const auto expect = [&](const Seq& s, const std::vector<Passage>& want, const std::string& tag) {
    const auto got = run(s);
    bool ok = got.size() == want.size();
    for (std::size_t i = 0; ok && i < got.size(); ++i)
      ok = got[i].from == want[i].from && got[i].to == want[i].to && got[i].time == want[i].time;
    t.add(ok ? 0.0 : 1.0, tag);
  };
  expect(cat({{0, 0, -1}, repeat(1, 10)}), {{0, 1, 3.0}}, "[0,0,-1,1x10]");
  expect(cat({{0, 0, -1}, repeat(1, 9)}), {}, "nine ones");
  expect(cat({{0, 0, -1}, repeat(1, 9), {-1}}), {}, "nine ones then gap");
  expect(cat({{0, 0}, repeat(1, 10), repeat(2, 10)}), {{0, 1, 2.0}, {1, 2, 10.0}}, "0 -> 1 -> 2");
  expect(cat({{0}, repeat(1, 5), {-1}, repeat(1, 10)}), {{0, 1, 7.0}}, "broken dwell");
  expect(cat({{-1, -1, 0, 0}, repeat(2, 12)}), {{0, 2, 2.0}}, "late first label");
  expect(cat({{0}, repeat(1, 4), {0, 0}, repeat(1, 10)}), {{0, 1, 7.0}}, "return before dwell");

  // Two trajectories never produce a passage across their boundary.
  TrajectoryEnsemble ens;
  ens.dt = 1.0;
  ens.summaries.resize(2);
  ens.summaries[0].labels = repeat(0, 5);
  ens.summaries[1].labels = repeat(1, 12);
  const InterwellMfpt m = interwell_mfpt(ens, WellSet{});
  t.add(m.n_01 == 0 && m.n_02 == 0 ? 0.0 : 1.0, "cross-trajectory");
  return t.finish();
}

PropertyResult check_mfpt_crn(std::uint64_t seed) {
  Tally t("mfpt_crn", 0.0);
  const auto truth = true_chart(SurfaceKind::kParaboloid, 1, seed);
  const RotationSde sde;
  SimConfig cfg;
  cfg.n_traj = 40;
  cfg.seed = derive_seed(seed, streams::kSimulationNoise);
  EnsembleOptions opt;
  opt.radial_r = 0.5;
  opt.stop_at_radial = true;
  const std::vector<Vector> z0(cfg.n_traj, Vector{0.0, 0.0});
  std::vector<Vector> x0;
  for (const Vector& z : z0) x0.push_back(truth->decode(z));
  const TrajectoryEnsemble gt = simulate_ground_truth(*truth, sde, z0, cfg, opt);
  const TrajectoryEnsemble same = simulate_learned(*truth, sde, x0, cfg, opt);
  const RadialMfpt r = radial_mfpt(gt, same);
  t.add(r.valid ? r.relative_error : std::numeric_limits<double>::infinity(), "radial");
  opt.jobs = 3;
  const TrajectoryEnsemble threaded = simulate_ground_truth(*truth, sde, z0, cfg, opt);
  t.add(radial_mfpt(gt, threaded).relative_error, "radial, 3 workers");
  return t.finish();
}

std::vector<PropertyResult> run_property_suite(const PropertyOptions& options) {
  const TangentLossFn loss = options.tangent_loss
                                 ? options.tangent_loss
                                 : TangentLossFn([](const Matrix& j, const Matrix& u) {
                                     return tangent_loss_trace(j, u);
                                   });
  const std::uint64_t s = options.seed;
  return {check_ito_round_trip(s),        check_tangent_trace_form(loss, s),
          check_bias_decomposition(s),    check_coordinate_invariance(s),
          check_projector_identities(s),  check_projector_lipschitz(s),
          check_covariation_identity(s),  check_network_autodiff(s),
          check_stage1_gradient(s),       check_hessian_contraction(s),
          check_mfpt_radial(),            check_mfpt_dwell_scan(),
          check_mfpt_crn(s)};
}

}  // namespace geosde::oracle
