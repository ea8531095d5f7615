#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "geosde/chart.hpp"
#include "geosde/chart_training.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/mlp.hpp"

namespace geosde {

struct LatentTarget {
  std::size_t landmark = 0;
  Vector z;       // pi_theta(x_i)
  Vector mu;      // encoder-pullback drift
  Matrix cov;     // Dpi Lambda Dpi^T
  Matrix metric;  // g(z_i)
  Matrix dphi;    // Dphi(z_i), D x d
};

struct LatentTargets {
  std::vector<LatentTarget> items;
  std::size_t excluded = 0;  // landmarks whose metric was not positive definite
};

/// Stage 2/3 targets on a frozen chart. Sigma is assembled from the
/// landmark's spectral frame as B diag(lambda) B^T with B = Dpi U_d.
LatentTargets build_targets(const Chart& chart, const LandmarkSet& landmarks);

/// Diffusion network output reshaped row-major into d x d.
Matrix diffusion_matrix(const Mlp& net, std::span<const double> z);

/// ||Dphi (mu_hat(z) - mu)||^2 = ||r||_g^2.
double loss_drift(const Mlp& drift_net, const LatentTarget& target);
/// Tr((g [sigma sigma^T - Sigma])^2).
double loss_diffusion(const Mlp& diffusion_net, const LatentTarget& target);

struct StageReport {
  std::vector<double> losses;  // full-batch loss before each update
  bool diverged = false;
  std::string message;
};

struct LatentSchedule {
  std::size_t epochs = 300;
  double learning_rate = 0.001;
};

/// Mean loss and its parameter gradient (overwritten) over all targets.
double drift_objective(const Mlp& net, const LatentTargets& targets, std::vector<double>* grad);
double diffusion_objective(const Mlp& net, const LatentTargets& targets,
                           std::vector<double>* grad);

/// Full-batch Adam on the drift network d -> hidden... -> d.
StageReport train_stage2(Mlp& drift_net, const LatentTargets& targets,
                         const LatentSchedule& schedule);
/// Full-batch Adam on the diffusion network d -> hidden... -> d*d.
StageReport train_stage3(Mlp& diffusion_net, const LatentTargets& targets,
                         const LatentSchedule& schedule);

/// Latent SDE backed by trained drift and diffusion networks.
class MlpLatentModel final : public LatentSde {
 public:
  MlpLatentModel(Mlp drift, Mlp diffusion);
  Vector drift(std::span<const double> z) const override;
  Matrix diffusion(std::span<const double> z) const override;
  const Mlp& drift_net() const { return drift_; }
  const Mlp& diffusion_net() const { return diffusion_; }

 private:
  Mlp drift_;
  Mlp diffusion_;
};

}  // namespace geosde
