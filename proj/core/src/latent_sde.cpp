#include "geosde/latent_sde.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "geosde/adam.hpp"
#include "geosde/geometry.hpp"
#include "geosde/linalg.hpp"

namespace geosde {

namespace {

constexpr double kMetricFloor = 1e-10;

bool positive_definite(const Matrix& g) {
  const SymEigResult e = g.rows() == 2 ? sym_eig2(g) : sym_eig(symmetrize(g));
  return std::isfinite(e.values.back()) && e.values.back() > kMetricFloor;
}

StageReport run_adam(Mlp& net, const LatentSchedule& schedule,
                     double (*objective)(const Mlp&, const LatentTargets&, std::vector<double>*),
                     const LatentTargets& targets, const char* stage) {
  StageReport report;
  if (targets.items.empty()) {
    report.diverged = true;
    report.message = std::string(stage) + ": no usable targets";
    return report;
  }
  AdamState opt(net.param_count(), {schedule.learning_rate});
  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    const double loss = objective(net, targets, &grad);
    report.losses.push_back(loss);
    if (!std::isfinite(loss) || !all_finite(grad)) {
      report.diverged = true;
      report.message = std::string(stage) + " diverged at epoch " + std::to_string(epoch);
      return report;
    }
    opt.step(net.params(), grad);
  }
  return report;
}

}  // namespace

LatentTargets build_targets(const Chart& chart, const LandmarkSet& landmarks) {
  LatentTargets out;
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    const Landmark& lm = landmarks.items[i];
    LatentTarget t;
    t.landmark = i;
    t.z = chart.encode(lm.x);
    t.dphi = chart.decoder_jacobian(t.z);
    t.metric = matmul_tn(t.dphi, t.dphi);
    if (!positive_definite(t.metric)) {
      ++out.excluded;
      continue;
    }
    t.mu = encoder_pullback_drift(chart, lm.x, lm.ambient);
    const Matrix b = chart.encoder_jacobian(lm.x) * lm.frame;
    t.cov = symmetrize(b * matmul_nt(Matrix::diagonal(lm.frame_values), b));
    out.items.push_back(std::move(t));
  }
  return out;
}

Matrix diffusion_matrix(const Mlp& net, std::span<const double> z) {
  const Vector out = mlp_forward(net, z);
  const std::size_t d = z.size();
  if (out.size() != d * d) throw std::invalid_argument("diffusion_matrix: output must be d*d");
  return Matrix(d, d, out);
}

double loss_drift(const Mlp& drift_net, const LatentTarget& target) {
  const Vector r = sub(mlp_forward(drift_net, target.z), target.mu);
  return squared_norm(matvec(target.dphi, r));
}

double loss_diffusion(const Mlp& diffusion_net, const LatentTarget& target) {
  const Matrix s = diffusion_matrix(diffusion_net, target.z);
  const Matrix m = target.metric * (matmul_nt(s, s) - target.cov);
  return trace(m * m);
}

double drift_objective(const Mlp& net, const LatentTargets& targets, std::vector<double>* grad) {
  const double scale = 1.0 / static_cast<double>(targets.items.size());
  if (grad != nullptr) grad->assign(net.param_count(), 0.0);
  double total = 0.0;
  for (const LatentTarget& t : targets.items) {
    const JetTape tape = jet_forward(net, t.z, Matrix());
    const Vector r = sub(tape.output(), t.mu);
    const Vector gr = matvec(t.metric, r);
    total += scale * dot(r, gr);
    if (grad != nullptr) {
      jet_backward(net, tape, scaled(gr, 2.0 * scale), Matrix(), *grad, nullptr, nullptr);
    }
  }
  return total;
}

double diffusion_objective(const Mlp& net, const LatentTargets& targets,
                           std::vector<double>* grad) {
  const double scale = 1.0 / static_cast<double>(targets.items.size());
  if (grad != nullptr) grad->assign(net.param_count(), 0.0);
  double total = 0.0;
  for (const LatentTarget& t : targets.items) {
    const std::size_t d = t.z.size();
    const JetTape tape = jet_forward(net, t.z, Matrix());
    const Matrix s(d, d, tape.output());
    const Matrix delta = matmul_nt(s, s) - t.cov;
    const Matrix gdg = t.metric * delta * t.metric;
    total += scale * frobenius_inner(gdg, delta);
    if (grad != nullptr) {
      // dL/dsigma = 4 g dS g sigma
      const Matrix seed = (4.0 * scale) * (gdg * s);
      jet_backward(net, tape, seed.data(), Matrix(), *grad, nullptr, nullptr);
    }
  }
  return total;
}

StageReport train_stage2(Mlp& drift_net, const LatentTargets& targets,
                         const LatentSchedule& schedule) {
  return run_adam(drift_net, schedule, &drift_objective, targets, "stage 2");
}

StageReport train_stage3(Mlp& diffusion_net, const LatentTargets& targets,
                         const LatentSchedule& schedule) {
  return run_adam(diffusion_net, schedule, &diffusion_objective, targets, "stage 3");
}

MlpLatentModel::MlpLatentModel(Mlp drift, Mlp diffusion)
    : drift_(std::move(drift)), diffusion_(std::move(diffusion)) {}

Vector MlpLatentModel::drift(std::span<const double> z) const { return mlp_forward(drift_, z); }

Matrix MlpLatentModel::diffusion(std::span<const double> z) const {
  return diffusion_matrix(diffusion_, z);
}

}  // namespace geosde
