#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "geosde/chart.hpp"
#include "geosde/matrix.hpp"

namespace geosde {

/// Rank-deficient ambient covariance. Either factored, Lambda = E B E^T with
/// E: D x r and B: r x r symmetric PSD, or an opaque dense D x D matrix.
class AmbientCovariance {
 public:
  AmbientCovariance() = default;
  static AmbientCovariance factored(Matrix e, Matrix b);
  static AmbientCovariance dense(Matrix lambda);

  bool is_factored() const { return !factor_.empty() || dense_.empty(); }
  std::size_t dim() const { return is_factored() ? factor_.rows() : dense_.rows(); }
  const Matrix& factor() const { return factor_; }
  const Matrix& core() const { return core_; }

  Matrix to_dense() const;
  /// Lambda v.
  Vector apply(std::span<const double> v) const;

  /// Leading eigenpairs. For the factored form this is a QR of E plus an
  /// r x r eigenproblem; the dense form runs Jacobi on the full matrix.
  struct Spectrum {
    Vector values;   // top `count` eigenvalues, descending
    Matrix vectors;  // D x count, orthonormal columns
    double next_value = 0.0;  // eigenvalue count + 1 (0 beyond the rank)
    double leading = 0.0;
  };
  Spectrum spectrum(std::size_t count) const;

 private:
  Matrix factor_;
  Matrix core_;
  Matrix dense_;
};

struct AmbientCoefficients {
  Vector b;
  AmbientCovariance lambda;
};

struct LatentCoefficients {
  Vector mu;
  Matrix cov;     // Sigma
  Matrix factor;  // sigma with sigma sigma^T = Sigma
};

/// Builds Sigma = sigma sigma^T from a diffusion factor.
LatentCoefficients latent_from_factor(Vector mu, Matrix sigma);
/// Builds sigma = Sigma^{1/2} (principal root) from a covariance.
LatentCoefficients latent_from_covariance(Vector mu, Matrix cov);

/// P = J g^{-1} J^T. Throws std::domain_error when sigma_min(J) underflows.
Matrix tangent_projector(const Matrix& j);

struct SpectralProjector {
  Matrix projector;  // U_d U_d^T
  Matrix frame;      // U_d
  Vector values;     // top-d eigenvalues
  bool degenerate = false;  // lambda_d - lambda_{d+1} <= 1e-10 lambda_1
};
SpectralProjector projector_from_covariance(const AmbientCovariance& lambda, std::size_t d);

/// b = Dphi mu + 1/2 q(Sigma), Lambda = Dphi Sigma Dphi^T (factored).
AmbientCoefficients ito_local_to_ambient(const Chart& chart, std::span<const double> z,
                                         const LatentCoefficients& local);

struct AmbientToLocal {
  LatentCoefficients local;
  bool gc_ok = true;        // ||(I - P_Lambda) Dphi||_F <= 1e-6 ||Dphi||_F
  double gc_residual = 0.0;  // relative residual
};
/// Sigma = Dpi Lambda Dpi^T, mu = Dpi [b - 1/2 q(Sigma)], Dpi taken at x and
/// phi's Hessians at z = pi(x). A covariance leaking out of the tangent plane
/// is projected back onto rng(Dphi) before pulling back.
AmbientToLocal ito_ambient_to_local(const Chart& chart, std::span<const double> x,
                                    const AmbientCoefficients& ambient);

/// <Lambda, grad^2 pi^j(x)>_F for every j, as sum_m lambda_m u_m^T grad^2 pi^j u_m
/// with one HVP per (j, m).
Vector encoder_hessian_contraction(const Chart& chart, std::span<const double> x,
                                   const AmbientCovariance& lambda);

/// mu = Dpi(x) b + 1/2 <Lambda, grad^2 pi(x)>.
Vector encoder_pullback_drift(const Chart& chart, std::span<const double> x,
                              const AmbientCoefficients& ambient);

struct BiasTerms {
  Vector mu_dec;
  Vector mu_enc;
  Vector term_i;
  Vector term_ii;
  Vector term_iii;
  /// || (mu_dec - mu_enc) - (I - II/2 - III/2) ||
  double residual = 0.0;
};
/// Decoder-side vs encoder-side drift at z = pi(x). The encoder quantities
/// are evaluated at the reconstruction phi(z), where the chain rule for
/// pi o phi applies. Throws std::domain_error for a rank-deficient Dphi.
BiasTerms bias_decomposition(const Chart& chart, std::span<const double> x,
                             const AmbientCoefficients& ambient);

struct ReparamReport {
  double projector_diff = 0.0;    // ||P~ - P||_F
  double drift_norm_diff = 0.0;   // | ||dmu~||_g~^2 - ||dmu||_g^2 |
  double trace_form_diff = 0.0;   // | Tr((g~ dS~)^2) - Tr((g dS)^2) |
  double drift_norm = 0.0;
  double trace_form = 0.0;
};
/// Evaluates the three invariants at latent point z of `chart` against the
/// chart phi o A at w = A^{-1} z, transforming dmu and dSigma as a vector and
/// a (2,0)-tensor.
ReparamReport coordinate_reparam_check(const Chart& chart, std::span<const double> z,
                                       const Matrix& a, std::span<const double> delta_mu,
                                       const Matrix& delta_sigma);

/// Projector identities for two orthonormal frames H1, H2 (D x d).
struct ProjectorIdentities {
  double half_sq_distance = 0.0;  // 1/2 ||P1 - P2||_F^2
  double frame_form = 0.0;        // d - ||H1^T H2||_F^2
  double normal_form_12 = 0.0;    // ||N1^T H2||_F^2
  double normal_form_21 = 0.0;    // ||N2^T H1||_F^2
};
ProjectorIdentities projector_identities(const Matrix& h1, const Matrix& h2);

/// Orthonormal basis of rng(H)^perp for H with orthonormal columns.
Matrix orthogonal_complement(const Matrix& h);

/// rho(phi, psi)^2 = ||phi - psi||_{L2}^2 + 1/2 ||P_phi - P_psi||_{F,L2}^2 by
/// Monte-Carlo quadrature over `points` uniform draws on [lo, hi]^2.
double rho_distance(const Chart& a, const Chart& b, double lo, double hi, std::size_t points,
                    std::uint64_t seed);

/// Minimum of sigma_min(Dphi) over an n x n grid on [lo, hi]^2.
double min_singular_on_grid(const Chart& chart, double lo, double hi, std::size_t n);

}  // namespace geosde
