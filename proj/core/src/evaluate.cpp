#include "geosde/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "geosde/geometry.hpp"
#include "geosde/linalg.hpp"
#include "geosde/rng.hpp"

namespace geosde {

namespace {

constexpr double kRankFloor = 1e-10;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Component of the true drift that an exact chart sees: Dphi_* mu = b - q/2.
Vector true_tangential_drift(const TrueChart& truth, const LatentSde& sde,
                             std::span<const double> z) {
  return matvec(truth.decoder_jacobian(z), sde.drift(z));
}

// A^T Lambda A for A (D x k).
Matrix congruence(const Matrix& a, const AmbientCovariance& lambda) {
  if (lambda.is_factored()) {
    const Matrix ate = matmul_tn(a, lambda.factor());
    return symmetrize(ate * matmul_nt(lambda.core(), ate));
  }
  return symmetrize(matmul_tn(a, lambda.to_dense() * a));
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return kNaN;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<Vector> uniform_points(std::size_t n, double lo, double hi, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<Vector> out(n);
  for (auto& p : out) p = {rng.uniform(lo, hi), rng.uniform(lo, hi)};
  return out;
}

ChartMetrics chart_metrics(const Chart& chart, const TrueChart& truth, const LatentSde& sde,
                           std::span<const Vector> test_points) {
  std::vector<double> rec;
  std::vector<double> tan;
  std::vector<double> fid;
  ChartMetrics m;
  const std::size_t d = chart.latent_dim();
  for (const Vector& zt : test_points) {
    const Vector x = truth.decode(zt);
    const AmbientCoefficients amb = oracle_ambient(truth, sde, zt);
    const Vector z = chart.encode(x);
    rec.push_back(squared_norm(sub(x, chart.decode(z))));
    const Matrix j = chart.decoder_jacobian(z);
    if (!(min_singular_value(j) > kRankFloor)) {
      ++m.excluded;
      continue;
    }
    const Matrix p_theta = tangent_projector(j);
    const SpectralProjector p = projector_from_covariance(amb.lambda, d);
    tan.push_back(frobenius_sq(p_theta - p.projector));

    const Matrix ginv = inverse(matmul_tn(j, j));
    const Matrix sigma_hat = symmetrize(ginv * congruence(j, amb.lambda) * ginv);
    Vector corrected = amb.b;
    axpy(-0.5, chart.ito_correction(z, sigma_hat), corrected);
    fid.push_back(squared_norm(sub(corrected, matvec(p_theta, corrected))));
  }
  m.reconstruction = median(rec);
  m.tangent = median(tan);
  m.fidelity = median(fid);
  return m;
}

CoefficientMetrics coefficient_metrics(const Chart& chart, const LatentSde& model,
                                       const TrueChart& truth, const LatentSde& sde,
                                       std::span<const Vector> eval_points) {
  CoefficientMetrics m;
  std::vector<double> eb;
  std::vector<double> el;
  std::vector<double> es;
  for (const Vector& zt : eval_points) {
    const Vector x = truth.decode(zt);
    const AmbientCoefficients amb = oracle_ambient(truth, sde, zt);
    const Vector z = chart.encode(x);
    const Matrix j = chart.decoder_jacobian(z);
    if (!(min_singular_value(j) > kRankFloor)) {
      ++m.excluded;
      continue;
    }
    const Matrix s = model.diffusion(z);
    const Matrix sigma_hat = matmul_nt(s, s);
    Vector b_hat = matvec(j, model.drift(z));
    axpy(0.5, chart.ito_correction(z, sigma_hat), b_hat);
    eb.push_back(squared_norm(sub(b_hat, amb.b)));
    el.push_back(frobenius_sq(j * matmul_nt(sigma_hat, j) - amb.lambda.to_dense()));

    const Matrix target = congruence(chart.encoder_jacobian(x).transpose(), amb.lambda);
    const Matrix gd = matmul_tn(j, j) * (sigma_hat - target);
    es.push_back(trace(gd * gd));
  }
  m.e_b = median(eb);
  m.e_lambda = median(el);
  m.e_sigma = median(es);
  return m;
}

std::vector<double> extrapolation_sweep(const Chart& chart, const TrueChart& truth,
                                        std::span<const double> deltas, std::size_t points,
                                        std::uint64_t seed) {
  std::vector<double> out;
  for (std::size_t di = 0; di < deltas.size(); ++di) {
    const double delta = deltas[di];
    CounterRng rng(derive_seed(seed, "extrapolation/" + std::to_string(di)));
    double sum = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
      Vector z(2);
      if (delta <= 0.0) {
        // Uniform on the perimeter of [-1, 1]^2.
        const double t = rng.uniform(0.0, 8.0);
        const int side = std::min(3, static_cast<int>(t / 2.0));
        const double s = t - 2.0 * side - 1.0;
        z = side == 0 ? Vector{s, -1.0} : side == 1 ? Vector{1.0, s}
          : side == 2 ? Vector{-s, 1.0} : Vector{-1.0, -s};
      } else {
        const double r = 1.0 + delta;
        do {
          z = {rng.uniform(-r, r), rng.uniform(-r, r)};
        } while (std::abs(z[0]) <= 1.0 && std::abs(z[1]) <= 1.0);
      }
      const Vector x = truth.decode(z);
      sum += squared_norm(sub(x, chart.decode(chart.encode(x))));
    }
    out.push_back(points > 0 ? sum / static_cast<double>(points) : kNaN);
  }
  return out;
}

double mean_radial_time(const TrajectoryEnsemble& ensemble, std::size_t* used) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : ensemble.summaries) {
    if (s.radial_time < 0.0) continue;
    sum += s.radial_time;
    ++n;
  }
  if (used != nullptr) *used = n;
  return n > 0 ? sum / static_cast<double>(n) : kNaN;
}

RadialMfpt radial_mfpt(const TrajectoryEnsemble& ground_truth, const TrajectoryEnsemble& learned) {
  RadialMfpt r;
  r.ground_truth = mean_radial_time(ground_truth, &r.n_ground_truth);
  r.learned = mean_radial_time(learned, &r.n_learned);
  r.valid = r.n_ground_truth > 0 && r.n_learned > 0 && r.ground_truth > 0.0;
  r.relative_error = r.valid ? std::abs(r.learned - r.ground_truth) / r.ground_truth : kNaN;
  return r;
}

std::vector<Passage> extract_passages(std::span<const std::int8_t> labels, std::size_t n_dwell,
                                      double dt) {
  std::vector<Passage> out;
  int cur = -1;
  std::size_t start = 0;
  const std::size_t n = labels.size();
  for (std::size_t k = 0; k < n; ++k) {
    const int l = labels[k];
    if (l < 0 || l == cur) continue;
    if (cur < 0) {
      cur = l;
      start = k;
      continue;
    }
    if (k + n_dwell > n) break;
    bool confirmed = true;
    for (std::size_t m = k; m < k + n_dwell; ++m) {
      if (labels[m] != l) {
        confirmed = false;
        break;
      }
    }
    if (!confirmed) continue;
    out.push_back({cur, l, static_cast<double>(k - start) * dt});
    cur = l;
    start = k;
  }
  return out;
}

InterwellMfpt interwell_mfpt(const TrajectoryEnsemble& ensemble, const WellSet& wells) {
  InterwellMfpt m;
  double s01 = 0.0;
  double s02 = 0.0;
  for (const auto& s : ensemble.summaries) {
    if (s.censored) continue;
    for (const Passage& p : extract_passages(s.labels, wells.n_dwell, ensemble.dt)) {
      if (p.from != 0) continue;
      if (p.to == 1) {
        s01 += p.time;
        ++m.n_01;
      } else if (p.to == 2) {
        s02 += p.time;
        ++m.n_02;
      }
    }
  }
  m.tau_01 = m.n_01 > 0 ? s01 / static_cast<double>(m.n_01) : kNaN;
  m.tau_02 = m.n_02 > 0 ? s02 / static_cast<double>(m.n_02) : kNaN;
  return m;
}

InterwellComparison compare_interwell(const InterwellMfpt& ground_truth,
                                      const InterwellMfpt& learned) {
  InterwellComparison c{ground_truth, learned, kNaN, kNaN};
  if (ground_truth.n_01 > 0 && learned.n_01 > 0)
    c.rel_error_01 = std::abs(learned.tau_01 - ground_truth.tau_01) / ground_truth.tau_01;
  if (ground_truth.n_02 > 0 && learned.n_02 > 0)
    c.rel_error_02 = std::abs(learned.tau_02 - ground_truth.tau_02) / ground_truth.tau_02;
  return c;
}

// --- ATLAS -------------------------------------------------------------------

AtlasModel::AtlasModel(const LandmarkSet& landmarks, double bandwidth)
    : landmarks_(landmarks), h_(bandwidth), d_(landmarks.latent_dim) {
  if (landmarks_.size() == 0) throw std::invalid_argument("AtlasModel: no landmarks");
  if (h_ <= 0.0) {
    std::vector<double> nn;
    for (std::size_t i = 0; i < landmarks_.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < landmarks_.size(); ++k)
        if (k != i) best = std::min(best, norm(sub(landmarks_.items[i].x, landmarks_.items[k].x)));
      if (std::isfinite(best)) nn.push_back(best);
    }
    h_ = nn.empty() ? 1.0 : 2.0 * median(nn);
  }
}

Vector AtlasModel::weights(std::span<const double> x) const {
  const std::size_t n = landmarks_.size();
  Vector w(n);
  double total = 0.0;
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = squared_norm(sub(x, landmarks_.items[i].x));
    if (d2 < best) {
      best = d2;
      nearest = i;
    }
    w[i] = std::exp(-d2 / (2.0 * h_ * h_));
    total += w[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(w.begin(), w.end(), 0.0);
    w[nearest] = 1.0;
    return w;
  }
  for (auto& v : w) v /= total;
  return w;
}

AtlasModel::Blend AtlasModel::blend(std::span<const double> x) const {
  Blend bl;
  bl.weights = weights(x);
  const std::size_t dim = x.size();
  bl.b.assign(dim, 0.0);
  bl.centroid.assign(dim, 0.0);
  // Blended covariance sum_i w_i E_i B_i E_i^T over landmarks with
  // non-negligible weight, factored while that is smaller than dense.
  std::vector<std::size_t> active;
  std::size_t cols = 0;
  for (std::size_t i = 0; i < bl.weights.size(); ++i) {
    const double w = bl.weights[i];
    if (w <= 1e-14) continue;
    const Landmark& lm = landmarks_.items[i];
    axpy(w, lm.ambient.b, bl.b);
    axpy(w, lm.x, bl.centroid);
    active.push_back(i);
    cols += lm.ambient.lambda.is_factored() ? lm.ambient.lambda.factor().cols() : dim;
  }
  AmbientCovariance cov;
  if (cols < dim) {
    Matrix e(dim, cols);
    Matrix core(cols, cols);
    std::size_t c0 = 0;
    for (std::size_t i : active) {
      const AmbientCovariance& l = landmarks_.items[i].ambient.lambda;
      const std::size_t r = l.factor().cols();
      for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t c = 0; c < r; ++c) e(a, c0 + c) = l.factor()(a, c);
      for (std::size_t a = 0; a < r; ++a)
        for (std::size_t c = 0; c < r; ++c) core(c0 + a, c0 + c) = bl.weights[i] * l.core()(a, c);
      c0 += r;
    }
    cov = AmbientCovariance::factored(std::move(e), std::move(core));
  } else {
    Matrix dense(dim, dim);
    for (std::size_t i : active) dense += bl.weights[i] * landmarks_.items[i].ambient.lambda.to_dense();
    cov = AmbientCovariance::dense(std::move(dense));
  }
  const auto spec = cov.spectrum(d_);
  bl.frame = spec.vectors;
  bl.values = spec.values;
  bl.projector = matmul_nt(bl.frame, bl.frame);
  return bl;
}

Vector AtlasModel::project(std::span<const double> x) const {
  const Blend bl = blend(x);
  const Vector off = sub(x, bl.centroid);
  return add(bl.centroid, matvec(bl.frame, matvec_t(bl.frame, off)));
}

TrajectoryEnsemble atlas_simulate(const AtlasModel& model, std::span<const Vector> x0,
                                  const SimConfig& cfg, const EnsembleOptions& options) {
  TrajectoryEnsemble ens;
  ens.dt = cfg.dt;
  ens.steps = cfg.steps();
  ens.summaries.resize(x0.size());
  if (options.keep_paths) ens.ambient_paths.resize(x0.size());
  const NoiseBank noise(cfg.seed);
  const double sqdt = std::sqrt(cfg.dt);
  const std::size_t d = model.latent_dim();
  for (std::size_t t = 0; t < x0.size(); ++t) {
    Vector x = x0[t];
    SummaryRecorder rec(cfg, options, ens.steps, ens.summaries[t]);
    Path* path = options.keep_paths ? &ens.ambient_paths[t] : nullptr;
    if (path != nullptr) {
      path->dim = x.size();
      path->states = x;
    }
    bool alive = rec.start(x);
    Vector xi(d);
    for (std::size_t k = 0; k < ens.steps && alive; ++k) {
      noise.gaussians(t, k, xi);
      const AtlasModel::Blend bl = model.blend(x);
      Vector kick(d);
      for (std::size_t c = 0; c < d; ++c) kick[c] = std::sqrt(std::max(0.0, bl.values[c])) * xi[c];
      Vector next = x;
      axpy(cfg.dt, bl.b, next);
      axpy(sqdt, matvec(bl.frame, kick), next);
      if (all_finite(next)) next = model.project(next);
      x = std::move(next);
      alive = rec.record(k + 1, x, all_finite(x));
      if (path != nullptr && alive) path->states.insert(path->states.end(), x.begin(), x.end());
    }
    rec.finish();
  }
  return ens;
}

AtlasMetrics atlas_metrics(const AtlasModel& model, const TrueChart& truth, const LatentSde& sde,
                           std::span<const Vector> test_points,
                           std::span<const Vector> eval_points) {
  AtlasMetrics out;
  std::vector<double> rec;
  std::vector<double> tan;
  std::vector<double> fid;
  for (const Vector& zt : test_points) {
    const Vector x = truth.decode(zt);
    const AmbientCoefficients amb = oracle_ambient(truth, sde, zt);
    const AtlasModel::Blend bl = model.blend(x);
    const Vector off = sub(x, bl.centroid);
    rec.push_back(squared_norm(sub(off, matvec(bl.projector, off))));
    tan.push_back(frobenius_sq(bl.projector - projector_from_covariance(amb.lambda, 2).projector));
    const Vector drift = true_tangential_drift(truth, sde, zt);
    fid.push_back(squared_norm(sub(drift, matvec(bl.projector, drift))));
  }
  out.chart.reconstruction = median(rec);
  out.chart.tangent = median(tan);
  out.chart.fidelity = median(fid);

  std::vector<double> eb;
  std::vector<double> el;
  for (const Vector& zt : eval_points) {
    const Vector x = truth.decode(zt);
    const AmbientCoefficients amb = oracle_ambient(truth, sde, zt);
    const AtlasModel::Blend bl = model.blend(x);
    eb.push_back(squared_norm(sub(bl.b, amb.b)));
    const Matrix lam = bl.frame * matmul_nt(Matrix::diagonal(bl.values), bl.frame);
    el.push_back(frobenius_sq(lam - amb.lambda.to_dense()));
  }
  out.coefficients.e_b = median(eb);
  out.coefficients.e_lambda = median(el);
  out.coefficients.e_sigma = kNaN;
  return out;
}

}  // namespace geosde
