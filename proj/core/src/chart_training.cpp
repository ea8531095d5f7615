#include "geosde/chart_training.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "geosde/adam.hpp"
#include "geosde/linalg.hpp"
#include "geosde/rng.hpp"

namespace geosde {

namespace {

constexpr double kMetricFloor = 1e-10;
constexpr double kSimplifyThreshold = 0.1;

void add_block(Matrix& dst, std::size_t col0, const Matrix& src, double s) {
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, col0 + c) += s * src(r, c);
}

Matrix minus_identity(Matrix m) {
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) m(i, i) -= 1.0;
  return m;
}

}  // namespace

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::kBaseline: return "baseline";
    case Condition::kT: return "T";
    case Condition::kF: return "F";
    case Condition::kC: return "C";
    case Condition::kTF: return "T+F";
    case Condition::kAtlas: return "atlas";
  }
  return "unknown";
}

Condition parse_condition(std::string_view name) {
  std::string s(name);
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (s == "baseline") return Condition::kBaseline;
  if (s == "t") return Condition::kT;
  if (s == "f") return Condition::kF;
  if (s == "c") return Condition::kC;
  if (s == "t+f" || s == "tf") return Condition::kTF;
  if (s == "atlas") return Condition::kAtlas;
  throw std::invalid_argument("unknown condition '" + std::string(name) + "'");
}

double PenaltyConfig::weight_t() const {
  return (condition == Condition::kT || condition == Condition::kTF) ? lambda_t : 0.0;
}
double PenaltyConfig::weight_f() const {
  return (condition == Condition::kF || condition == Condition::kTF) ? lambda_f : 0.0;
}
double PenaltyConfig::weight_c() const { return condition == Condition::kC ? lambda_c : 0.0; }

LandmarkSet build_landmark_set(const TrueChart& chart, const LatentSde& sde,
                               std::span<const Vector> latent_points) {
  LandmarkSet set;
  set.latent_dim = chart.latent_dim();
  set.items.reserve(latent_points.size());
  for (const Vector& z : latent_points) {
    Landmark lm;
    lm.z_true = z;
    lm.x = chart.decode(z);
    lm.ambient = oracle_ambient(chart, sde, z);
    const SpectralProjector sp = projector_from_covariance(lm.ambient.lambda, set.latent_dim);
    lm.frame = sp.frame;
    lm.frame_values = sp.values;
    set.items.push_back(std::move(lm));
  }
  return set;
}

// --- losses ------------------------------------------------------------------

double tangent_loss_trace(const Matrix& j, const Matrix& u, Matrix* grad_j, bool* clamped) {
  const double d = static_cast<double>(j.cols());
  const ClampedInverse ci = clamped_spd_inverse(matmul_tn(j, j), kMetricFloor);
  if (clamped != nullptr) *clamped = ci.clamped;
  const Matrix& k = ci.inverse;
  const Matrix c = matmul_tn(j, u);  // d x d
  const Matrix cct = matmul_nt(c, c);
  const double loss = d - frobenius_inner(k, cct);
  if (grad_j != nullptr) {
    // 2 J K C C^T K - 2 U C^T K
    *grad_j = 2.0 * (j * (k * cct * k)) - 2.0 * (u * matmul_tn(c, k));
  }
  return loss;
}

double tangent_loss_simplified(const Matrix& dpi_u, const Matrix& j, const Matrix& u) {
  return static_cast<double>(j.cols()) - trace(dpi_u * matmul_tn(u, j));
}

double loss_reconstruction(const Chart& chart, std::span<const double> x) {
  return squared_norm(sub(chart.decode(chart.encode(x)), x));
}

double loss_tangent(const Chart& chart, std::span<const double> x, const Matrix& frame,
                    TangentForm form, bool* clamped) {
  const Matrix j = chart.decoder_jacobian(chart.encode(x));
  if (clamped != nullptr) *clamped = false;
  if (form != TangentForm::kExact) {
    const Matrix dpi = chart.encoder_jacobian(x);
    const bool ok = form == TangentForm::kSimplified ||
                    frobenius_norm(minus_identity(dpi * j)) < kSimplifyThreshold;
    if (ok) return tangent_loss_simplified(dpi * frame, j, frame);
  }
  return tangent_loss_trace(j, frame, nullptr, clamped);
}

double loss_inverse_consistency(const Chart& chart, std::span<const double> x) {
  const Matrix j = chart.decoder_jacobian(chart.encode(x));
  return frobenius_sq(minus_identity(chart.encoder_jacobian(x) * j));
}

double loss_contractive(const Chart& chart, std::span<const double> x) {
  return frobenius_sq(chart.encoder_jacobian(x));
}

// --- Stage 1 -----------------------------------------------------------------

Stage1Eval stage1_landmark(const LearnedChart& chart, const Landmark& lm,
                           const PenaltyConfig& penalty, TangentForm form,
                           std::span<double> encoder_grad, std::span<double> decoder_grad,
                           double grad_scale) {
  const Mlp& enc = chart.encoder();
  const Mlp& dec = chart.decoder();
  const std::size_t d = enc.output_dim();
  const std::size_t dim = enc.input_dim();
  const double wt = penalty.weight_t();
  const double wf = penalty.weight_f();
  const double wc = penalty.weight_c();
  const Matrix& u = lm.frame;

  const Vector z = mlp_forward(enc, lm.x);
  const JetTape dec_tape = jet_forward(dec, z, Matrix::identity(d));
  const Matrix j = dec_tape.output_tangent();  // D x d
  const Vector r = sub(dec_tape.output(), lm.x);

  // Encoder directions: [J | U | I_D]; U and I_D only when a term needs them.
  // The J block is always pushed so L_F is reported under every condition.
  const bool need_u = wt > 0.0 && form != TangentForm::kExact;
  const bool need_i = wc > 0.0;
  const std::size_t off_u = d;
  const std::size_t off_i = off_u + (need_u ? d : 0);
  const std::size_t k = off_i + (need_i ? dim : 0);
  Matrix dirs(dim, k);
  add_block(dirs, 0, j, 1.0);
  if (need_u) add_block(dirs, off_u, u, 1.0);
  if (need_i) add_block(dirs, off_i, Matrix::identity(dim), 1.0);
  const JetTape enc_tape = jet_forward(enc, lm.x, dirs);
  const Matrix t = enc_tape.output_tangent();  // d x k

  Stage1Eval ev;
  ev.terms.reconstruction = squared_norm(r);
  Matrix j_bar(dim, d);
  Matrix t_bar(d, k);

  const Matrix m = minus_identity(t.cols_range(0, d));
  ev.terms.inverse = frobenius_sq(m);

  if (wt > 0.0) {
    ev.simplified = form == TangentForm::kSimplified ||
                    (form == TangentForm::kAuto && frobenius_norm(m) < kSimplifyThreshold);
    if (ev.simplified) {
      const Matrix b = t.cols_range(off_u, d);  // Dpi U
      ev.terms.tangent = tangent_loss_simplified(b, j, u);
      add_block(j_bar, 0, u * b.transpose(), -wt);
      add_block(t_bar, off_u, matmul_tn(j, u), -wt);
    } else {
      Matrix g;
      ev.terms.tangent = tangent_loss_trace(j, u, &g, &ev.clamped);
      add_block(j_bar, 0, g, wt);
    }
  } else {
    ev.terms.tangent = tangent_loss_trace(j, u, nullptr, &ev.clamped);
  }
  if (wf > 0.0) add_block(t_bar, 0, m, 2.0 * wf);
  if (need_i) {
    const Matrix dpi = t.cols_range(off_i, dim);
    ev.terms.contractive = frobenius_sq(dpi);
    add_block(t_bar, off_i, dpi, 2.0 * wc);
  }
  ev.terms.total = ev.terms.reconstruction + wt * ev.terms.tangent + wf * ev.terms.inverse +
                   wc * ev.terms.contractive;

  if (encoder_grad.empty() && decoder_grad.empty()) return ev;

  j_bar *= grad_scale;
  t_bar *= grad_scale;
  Matrix v_bar;
  jet_backward(enc, enc_tape, {}, t_bar, encoder_grad, nullptr, &v_bar);
  add_block(j_bar, 0, v_bar.cols_range(0, d), 1.0);
  const Vector r_bar = scaled(r, 2.0 * grad_scale);
  Vector z_bar;
  jet_backward(dec, dec_tape, r_bar, j_bar, decoder_grad, &z_bar, nullptr);
  jet_backward(enc, enc_tape, z_bar, Matrix(), encoder_grad, nullptr, nullptr);
  return ev;
}

LossTerms stage1_objective(const LearnedChart& chart, const LandmarkSet& landmarks,
                           const PenaltyConfig& penalty, TangentForm form,
                           std::span<const std::size_t> indices, std::vector<double>* encoder_grad,
                           std::vector<double>* decoder_grad, std::size_t* simplified_count,
                           std::size_t* clamped_count) {
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(landmarks.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    indices = all;
  }
  if (indices.empty()) throw std::invalid_argument("stage1_objective: no landmarks");
  const double scale = 1.0 / static_cast<double>(indices.size());
  std::span<double> eg;
  std::span<double> dg;
  if (encoder_grad != nullptr) {
    encoder_grad->assign(chart.encoder().param_count(), 0.0);
    eg = *encoder_grad;
  }
  if (decoder_grad != nullptr) {
    decoder_grad->assign(chart.decoder().param_count(), 0.0);
    dg = *decoder_grad;
  }
  LossTerms mean;
  for (std::size_t idx : indices) {
    const Stage1Eval ev =
        stage1_landmark(chart, landmarks.items.at(idx), penalty, form, eg, dg, scale);
    mean.reconstruction += scale * ev.terms.reconstruction;
    mean.tangent += scale * ev.terms.tangent;
    mean.inverse += scale * ev.terms.inverse;
    mean.contractive += scale * ev.terms.contractive;
    mean.total += scale * ev.terms.total;
    if (simplified_count != nullptr && ev.simplified) ++*simplified_count;
    if (clamped_count != nullptr && ev.clamped) ++*clamped_count;
  }
  return mean;
}

std::size_t default_chart_width(std::size_t ambient_dim) { return ambient_dim <= 11 ? 64 : 256; }

LearnedChart init_chart(std::size_t ambient_dim, std::size_t latent_dim, std::size_t hidden,
                        std::uint64_t weight_seed) {
  CounterRng rng(weight_seed);
  Mlp enc = Mlp::glorot({ambient_dim, hidden, hidden, latent_dim}, rng);
  Mlp dec = Mlp::glorot({latent_dim, hidden, hidden, ambient_dim}, rng);
  return LearnedChart(std::move(enc), std::move(dec));
}

StageOneReport train_stage1(LearnedChart& chart, const LandmarkSet& landmarks,
                            const PenaltyConfig& penalty, const Stage1Schedule& schedule,
                            std::uint64_t batching_seed) {
  if (landmarks.size() < 2) throw std::invalid_argument("train_stage1: need at least 2 landmarks");
  StageOneReport report;
  AdamState enc_opt(chart.encoder().param_count(), {schedule.learning_rate});
  AdamState dec_opt(chart.decoder().param_count(), {schedule.learning_rate});
  CounterRng batch_rng(batching_seed);
  std::vector<std::size_t> order(landmarks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::max<std::size_t>(1, std::min(schedule.batch_size, order.size()));
  const auto warmup_epochs = static_cast<std::size_t>(
      std::llround(schedule.warmup_fraction * static_cast<double>(schedule.epochs)));
  std::vector<double> eg;
  std::vector<double> dg;

  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    const double lr = epoch < warmup_epochs
                          ? schedule.learning_rate * schedule.warmup_lr_multiplier
                          : schedule.learning_rate;
    enc_opt.set_learning_rate(lr);
    dec_opt.set_learning_rate(lr);
    shuffle(std::span<std::size_t>(order), batch_rng);

    LossTerms epoch_terms;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      const LossTerms t =
          stage1_objective(chart, landmarks, penalty, schedule.tangent_form, idx, &eg, &dg,
                           &report.simplified_evaluations, &report.clamped_evaluations);
      report.evaluations += len;
      const double w = static_cast<double>(len) / static_cast<double>(order.size());
      epoch_terms.reconstruction += w * t.reconstruction;
      epoch_terms.tangent += w * t.tangent;
      epoch_terms.inverse += w * t.inverse;
      epoch_terms.contractive += w * t.contractive;
      epoch_terms.total += w * t.total;
      if (!std::isfinite(t.total) || !all_finite(eg) || !all_finite(dg)) {
        report.epochs.push_back(epoch_terms);
        report.diverged = true;
        report.message = "stage 1 diverged at epoch " + std::to_string(epoch);
        return report;
      }
      enc_opt.step(chart.encoder().params(), eg);
      dec_opt.step(chart.decoder().params(), dg);
    }
    report.epochs.push_back(epoch_terms);
  }
  return report;
}

double sigma_min_diagnostic(const LearnedChart& chart, const TrueChart& truth, double lo,
                            double hi, std::size_t n) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double step = n > 1 ? (hi - lo) / static_cast<double>(n - 1) : 0.0;
      const Vector zt{lo + step * static_cast<double>(i), lo + step * static_cast<double>(k)};
      const Vector z = chart.encode(truth.decode(zt));
      best = std::min(best, min_singular_value(chart.decoder_jacobian(z)));
    }
  }
  return best;
}

}  // namespace geosde
