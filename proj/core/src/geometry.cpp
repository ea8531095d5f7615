#include "geosde/geometry.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "geosde/linalg.hpp"
#include "geosde/rng.hpp"

namespace geosde {

namespace {

constexpr double kGcTolerance = 1e-6;
constexpr double kRankFloor = 1e-12;

// Dpi Lambda Dpi^T (or any left factor) without forming Lambda.
Matrix sandwich(const Matrix& left, const AmbientCovariance& lambda) {
  if (lambda.is_factored()) {
    const Matrix le = left * lambda.factor();
    return symmetrize(le * matmul_nt(lambda.core(), le));
  }
  return symmetrize(left * matmul_nt(lambda.to_dense(), left));
}

Matrix checked_metric_inverse(const Matrix& j, const char* who) {
  const Matrix g = matmul_tn(j, j);
  const double smin = min_singular_value(j);
  const double scale = std::max(1.0, frobenius_norm(j));
  if (!(smin > kRankFloor * scale))
    throw std::domain_error(std::string(who) + ": decoder Jacobian is rank deficient");
  return inverse(g);
}

}  // namespace

// --- AmbientCovariance ------------------------------------------------------

AmbientCovariance AmbientCovariance::factored(Matrix e, Matrix b) {
  if (b.rows() != e.cols() || b.cols() != e.cols())
    throw std::invalid_argument("AmbientCovariance::factored: B must be r x r with E D x r");
  AmbientCovariance c;
  c.factor_ = std::move(e);
  c.core_ = symmetrize(b);
  return c;
}

AmbientCovariance AmbientCovariance::dense(Matrix lambda) {
  if (lambda.rows() != lambda.cols())
    throw std::invalid_argument("AmbientCovariance::dense: matrix must be square");
  AmbientCovariance c;
  c.dense_ = symmetrize(lambda);
  return c;
}

Matrix AmbientCovariance::to_dense() const {
  if (!is_factored()) return dense_;
  return factor_ * matmul_nt(core_, factor_);
}

Vector AmbientCovariance::apply(std::span<const double> v) const {
  if (!is_factored()) return matvec(dense_, v);
  return matvec(factor_, matvec(core_, matvec_t(factor_, v)));
}

AmbientCovariance::Spectrum AmbientCovariance::spectrum(std::size_t count) const {
  Spectrum out;
  Vector values;
  Matrix vectors;
  if (is_factored()) {
    const std::size_t r = factor_.cols();
    if (count == 0) count = r;
    if (count > r)
      throw std::invalid_argument("AmbientCovariance::spectrum: count exceeds factor rank");
    const ThinQr qr = thin_qr(factor_);
    const Matrix m = symmetrize(qr.r * matmul_nt(core_, qr.r));
    const SymEigResult eig = r == 2 ? sym_eig2(m) : sym_eig(m);
    values = eig.values;
    vectors = qr.q * eig.vectors;
  } else {
    if (count == 0) count = dense_.rows();
    const SymEigResult eig = sym_eig(dense_);
    values = eig.values;
    vectors = eig.vectors;
  }
  out.leading = values.empty() ? 0.0 : values.front();
  out.values.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(count));
  out.vectors = vectors.cols_range(0, count);
  out.next_value = count < values.size() ? values[count] : 0.0;
  return out;
}

LatentCoefficients latent_from_factor(Vector mu, Matrix sigma) {
  LatentCoefficients c;
  c.mu = std::move(mu);
  c.cov = matmul_nt(sigma, sigma);
  c.factor = std::move(sigma);
  return c;
}

LatentCoefficients latent_from_covariance(Vector mu, Matrix cov) {
  LatentCoefficients c;
  c.mu = std::move(mu);
  c.cov = symmetrize(cov);
  c.factor = sym_sqrt(c.cov);
  return c;
}

// --- projectors ------------------------------------------------------------

Matrix tangent_projector(const Matrix& j) {
  const Matrix ginv = checked_metric_inverse(j, "tangent_projector");
  return symmetrize(j * matmul_nt(ginv, j));
}

SpectralProjector projector_from_covariance(const AmbientCovariance& lambda, std::size_t d) {
  const auto spec = lambda.spectrum(d);
  SpectralProjector out;
  out.frame = spec.vectors;
  out.values = spec.values;
  out.projector = matmul_nt(spec.vectors, spec.vectors);
  const double gap = spec.values.back() - spec.next_value;
  out.degenerate = !(gap > 1e-10 * std::abs(spec.leading)) || spec.leading <= 0.0;
  return out;
}

// --- Ito rules -------------------------------------------------------------

AmbientCoefficients ito_local_to_ambient(const Chart& chart, std::span<const double> z,
                                         const LatentCoefficients& local) {
  const Matrix j = chart.decoder_jacobian(z);
  AmbientCoefficients out;
  out.b = matvec(j, local.mu);
  axpy(0.5, chart.ito_correction(z, local.cov), out.b);
  out.lambda = AmbientCovariance::factored(j, local.cov);
  return out;
}

AmbientToLocal ito_ambient_to_local(const Chart& chart, std::span<const double> x,
                                    const AmbientCoefficients& ambient) {
  const std::size_t d = chart.latent_dim();
  const Vector z = chart.encode(x);
  const Matrix dpi = chart.encoder_jacobian(x);
  const Matrix dphi = chart.decoder_jacobian(z);

  AmbientToLocal out;
  AmbientCovariance lambda = ambient.lambda;
  const auto spec = lambda.spectrum(std::min(d, lambda.is_factored() ? lambda.factor().cols()
                                                                       : lambda.dim()));
  if (spec.leading > 0.0 && d < lambda.dim()) {
    // (I - U U^T) Dphi
    const Matrix resid = dphi - spec.vectors * matmul_tn(spec.vectors, dphi);
    out.gc_residual = frobenius_norm(resid) / std::max(frobenius_norm(dphi), 1e-300);
    out.gc_ok = out.gc_residual <= kGcTolerance;
    if (!out.gc_ok) {
      // P Lambda P with P the decoder tangent projector, kept factored.
      const Matrix p = tangent_projector(dphi);
      if (lambda.is_factored()) {
        lambda = AmbientCovariance::factored(p * lambda.factor(), lambda.core());
      } else {
        lambda = AmbientCovariance::dense(p * lambda.to_dense() * p);
      }
    }
  }
  const Matrix cov = sandwich(dpi, lambda);
  Vector corrected = ambient.b;
  axpy(-0.5, chart.ito_correction(z, cov), corrected);
  out.local = latent_from_covariance(matvec(dpi, corrected), cov);
  return out;
}

Vector encoder_hessian_contraction(const Chart& chart, std::span<const double> x,
                                   const AmbientCovariance& lambda) {
  const std::size_t d = chart.latent_dim();
  Vector out(d, 0.0);
  const auto spec = lambda.spectrum(0);
  for (std::size_t m = 0; m < spec.values.size(); ++m) {
    const double lam = spec.values[m];
    if (lam == 0.0) continue;
    const Vector u = spec.vectors.col(m);
    for (std::size_t j = 0; j < d; ++j) out[j] += lam * dot(u, chart.encoder_hvp(x, j, u));
  }
  return out;
}

Vector encoder_pullback_drift(const Chart& chart, std::span<const double> x,
                              const AmbientCoefficients& ambient) {
  Vector mu = matvec(chart.encoder_jacobian(x), ambient.b);
  axpy(0.5, encoder_hessian_contraction(chart, x, ambient.lambda), mu);
  return mu;
}

BiasTerms bias_decomposition(const Chart& chart, std::span<const double> x,
                             const AmbientCoefficients& ambient) {
  const Vector z = chart.encode(x);
  const Vector xhat = chart.decode(z);
  const Matrix j = chart.decoder_jacobian(z);
  const Matrix ginv = checked_metric_inverse(j, "bias_decomposition");
  const Matrix pinv = ginv * j.transpose();  // g^{-1} Dphi^T

  const Matrix jl = sandwich(j.transpose(), ambient.lambda);
  const Matrix sigma_hat = symmetrize(ginv * jl * ginv);
  Vector corrected = ambient.b;
  axpy(-0.5, chart.ito_correction(z, sigma_hat), corrected);

  BiasTerms out;
  out.mu_dec = matvec(pinv, corrected);
  out.mu_enc = encoder_pullback_drift(chart, xhat, ambient);

  const Matrix dpi = chart.encoder_jacobian(xhat);
  out.term_i = matvec(pinv - dpi, corrected);
  out.term_ii = chart.cycle_contraction(z, sigma_hat);
  out.term_iii = sub(encoder_hessian_contraction(chart, xhat, ambient.lambda),
                     encoder_hessian_contraction(
                         chart, xhat, AmbientCovariance::factored(j, sigma_hat)));

  Vector lhs = sub(out.mu_dec, out.mu_enc);
  axpy(-1.0, out.term_i, lhs);
  axpy(0.5, out.term_ii, lhs);
  axpy(0.5, out.term_iii, lhs);
  out.residual = norm(lhs);
  return out;
}

ReparamReport coordinate_reparam_check(const Chart& chart, std::span<const double> z,
                                       const Matrix& a, std::span<const double> delta_mu,
                                       const Matrix& delta_sigma) {
  const std::shared_ptr<const Chart> base(&chart, [](const Chart*) {});
  const LinearReparamChart tilde(base, a);
  const Matrix& ainv = tilde.a_inverse();
  const Vector w = matvec(ainv, z);

  const Matrix j = chart.decoder_jacobian(z);
  const Matrix jt = tilde.decoder_jacobian(w);
  const Matrix g = matmul_tn(j, j);
  const Matrix gt = matmul_tn(jt, jt);

  const Vector dmu_t = matvec(ainv, delta_mu);
  const Matrix ds_t = ainv * matmul_nt(delta_sigma, ainv);

  ReparamReport r;
  r.projector_diff = frobenius_norm(tangent_projector(jt) - tangent_projector(j));
  r.drift_norm = dot(delta_mu, matvec(g, delta_mu));
  r.drift_norm_diff = std::abs(dot(dmu_t, matvec(gt, dmu_t)) - r.drift_norm);
  const Matrix m = g * delta_sigma;
  const Matrix mt = gt * ds_t;
  r.trace_form = trace(m * m);
  r.trace_form_diff = std::abs(trace(mt * mt) - r.trace_form);
  return r;
}

Matrix orthogonal_complement(const Matrix& h) {
  const std::size_t dd = h.rows();
  const std::size_t d = h.cols();
  // Project the standard basis off rng(H) and orthonormalize; keep the
  // D - d best-conditioned directions.
  Matrix n(dd, dd - d);
  std::size_t found = 0;
  for (std::size_t k = 0; k < dd && found < dd - d; ++k) {
    Vector e(dd, 0.0);
    e[k] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      const Vector c = matvec_t(h, e);
      axpy(-1.0, matvec(h, c), e);
      for (std::size_t f = 0; f < found; ++f) {
        const Vector nf = n.col(f);
        axpy(-dot(nf, e), nf, e);
      }
    }
    const double len = norm(e);
    if (len < 1e-6) continue;
    for (auto& v : e) v /= len;
    n.set_col(found++, e);
  }
  if (found != dd - d) throw std::domain_error("orthogonal_complement: frame is not orthonormal");
  return n;
}

ProjectorIdentities projector_identities(const Matrix& h1, const Matrix& h2) {
  const double d = static_cast<double>(h1.cols());
  ProjectorIdentities out;
  out.half_sq_distance = 0.5 * frobenius_sq(matmul_nt(h1, h1) - matmul_nt(h2, h2));
  out.frame_form = d - frobenius_sq(matmul_tn(h1, h2));
  out.normal_form_12 = frobenius_sq(matmul_tn(orthogonal_complement(h1), h2));
  out.normal_form_21 = frobenius_sq(matmul_tn(orthogonal_complement(h2), h1));
  return out;
}

double rho_distance(const Chart& a, const Chart& b, double lo, double hi, std::size_t points,
                    std::uint64_t seed) {
  CounterRng rng(seed);
  const double area = (hi - lo) * (hi - lo);
  double l2 = 0.0;
  double proj = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const Vector z{rng.uniform(lo, hi), rng.uniform(lo, hi)};
    l2 += squared_norm(sub(a.decode(z), b.decode(z)));
    proj += 0.5 * frobenius_sq(tangent_projector(a.decoder_jacobian(z)) -
                               tangent_projector(b.decoder_jacobian(z)));
  }
  return std::sqrt(area * (l2 + proj) / static_cast<double>(points));
}

double min_singular_on_grid(const Chart& chart, double lo, double hi, std::size_t n) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double u = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1.0);
      const double v = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / (n - 1.0);
      const Vector z{u, v};
      best = std::min(best, min_singular_value(chart.decoder_jacobian(z)));
    }
  }
  return best;
}

}  // namespace geosde
