#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geosde/chart.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/geometry.hpp"
#include "geosde/surfaces.hpp"

namespace geosde {

enum class Condition { kBaseline, kT, kF, kC, kTF, kAtlas };
std::string_view to_string(Condition c);
/// "baseline", "T", "F", "C", "T+F", "atlas" (case-insensitive, "TF" also accepted).
Condition parse_condition(std::string_view name);

struct PenaltyConfig {
  double lambda_t = 1.0;
  double lambda_f = 1.0;
  double lambda_c = 0.01;
  Condition condition = Condition::kTF;

  /// Weights after applying the condition: inactive terms are zeroed
  /// regardless of the configured value.
  double weight_t() const;
  double weight_f() const;
  double weight_c() const;
};

/// Which algebraic form of the tangent loss to evaluate.
enum class TangentForm {
  kExact,       // d - Tr(g^{-1} C C^T)
  kSimplified,  // d - Tr(Dpi U U^T Dphi)
  kAuto,        // simplified only where ||Dpi Dphi - I||_F < 0.1
};

struct Landmark {
  Vector z_true;  // coordinates on the true chart
  Vector x;
  AmbientCoefficients ambient;
  Matrix frame;   // U_d, D x d
  Vector frame_values;
};

struct LandmarkSet {
  std::size_t latent_dim = 2;
  std::vector<Landmark> items;
  std::size_t size() const { return items.size(); }
};

/// Oracle data at each latent point, with the spectral frame of Lambda.
LandmarkSet build_landmark_set(const TrueChart& chart, const LatentSde& sde,
                               std::span<const Vector> latent_points);

// --- per-point losses on an arbitrary chart --------------------------------

double loss_reconstruction(const Chart& chart, std::span<const double> x);
/// 1/2 ||P_hat - U U^T||_F^2 in trace form. `clamped` reports a
/// rank-deficient metric whose eigenvalues were floored at 1e-10.
double loss_tangent(const Chart& chart, std::span<const double> x, const Matrix& frame,
                    TangentForm form = TangentForm::kExact, bool* clamped = nullptr);
double loss_inverse_consistency(const Chart& chart, std::span<const double> x);
double loss_contractive(const Chart& chart, std::span<const double> x);

/// d - Tr(g^{-1} C C^T) with C = J^T U and g = J^T J, O(D d^2). If `grad_j` is
/// non-null it receives dL/dJ (D x d).
double tangent_loss_trace(const Matrix& j, const Matrix& u, Matrix* grad_j = nullptr,
                          bool* clamped = nullptr);
/// d - Tr((Dpi U)(U^T J)).
double tangent_loss_simplified(const Matrix& dpi_u, const Matrix& j, const Matrix& u);

// --- Stage 1 ---------------------------------------------------------------

struct LossTerms {
  double reconstruction = 0.0;
  double tangent = 0.0;
  double inverse = 0.0;
  double contractive = 0.0;
  double total = 0.0;
};

/// Per-landmark Stage-1 objective L_R + l_T L_T + l_F L_F + l_C L_C and,
/// when the spans are non-empty, its parameter gradient accumulated (scaled
/// by `grad_scale`) into encoder/decoder gradient buffers.
struct Stage1Eval {
  LossTerms terms;
  bool simplified = false;
  bool clamped = false;
};
Stage1Eval stage1_landmark(const LearnedChart& chart, const Landmark& lm,
                           const PenaltyConfig& penalty, TangentForm form,
                           std::span<double> encoder_grad, std::span<double> decoder_grad,
                           double grad_scale = 1.0);

/// Mean objective over `indices` (all landmarks if empty) with gradients.
LossTerms stage1_objective(const LearnedChart& chart, const LandmarkSet& landmarks,
                           const PenaltyConfig& penalty, TangentForm form,
                           std::span<const std::size_t> indices, std::vector<double>* encoder_grad,
                           std::vector<double>* decoder_grad,
                           std::size_t* simplified_count = nullptr,
                           std::size_t* clamped_count = nullptr);

struct Stage1Schedule {
  std::size_t epochs = 500;
  double learning_rate = 0.005;
  std::size_t batch_size = 20;
  double warmup_fraction = 0.2;
  double warmup_lr_multiplier = 2.0;
  TangentForm tangent_form = TangentForm::kExact;
};

struct StageOneReport {
  std::vector<LossTerms> epochs;  // mean over the epoch's landmark visits
  bool diverged = false;
  std::string message;
  std::size_t clamped_evaluations = 0;
  std::size_t simplified_evaluations = 0;
  std::size_t evaluations = 0;
  double sigma_min = 0.0;  // filled by the caller via sigma_min_diagnostic
};

/// Encoder D -> h -> h -> d and decoder d -> h -> h -> D with Glorot weights.
LearnedChart init_chart(std::size_t ambient_dim, std::size_t latent_dim, std::size_t hidden,
                        std::uint64_t weight_seed);

/// Hidden width by ambient dimension: 64 up to D = 11, 256 above.
std::size_t default_chart_width(std::size_t ambient_dim);

/// Adam over both networks, two phases (warmup at a raised rate, then the
/// configured rate) with shared optimizer state. Minibatches are drawn
/// without replacement per epoch from a CounterRng seeded with
/// `batching_seed`.
StageOneReport train_stage1(LearnedChart& chart, const LandmarkSet& landmarks,
                            const PenaltyConfig& penalty, const Stage1Schedule& schedule,
                            std::uint64_t batching_seed);

/// min sigma_min(Dphi_theta) over an n x n grid of Omega, evaluated at the
/// learned latent images z = pi_theta(phi_*(u, v)).
double sigma_min_diagnostic(const LearnedChart& chart, const TrueChart& truth, double lo,
                            double hi, std::size_t n);

}  // namespace geosde
