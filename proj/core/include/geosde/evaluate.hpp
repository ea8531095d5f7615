#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "geosde/chart.hpp"
#include "geosde/chart_training.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/simulate.hpp"
#include "geosde/surfaces.hpp"

namespace geosde {

double median(std::vector<double> values);

/// Uniform points on [lo, hi]^2 from a CounterRng.
std::vector<Vector> uniform_points(std::size_t n, double lo, double hi, std::uint64_t seed);

struct ChartMetrics {
  double reconstruction = 0.0;  // median ||x - phi(pi(x))||^2
  double tangent = 0.0;         // median ||P_theta - P||_F^2
  double fidelity = 0.0;        // median ||(I - P_theta)(b - q/2)||^2
  std::size_t excluded = 0;
};

/// Test points are true latent coordinates; x = phi_*(z) with oracle data
/// from `sde`. P comes from the spectral truncation of the oracle Lambda.
ChartMetrics chart_metrics(const Chart& chart, const TrueChart& truth, const LatentSde& sde,
                           std::span<const Vector> test_points);

struct CoefficientMetrics {
  double e_b = 0.0;
  double e_lambda = 0.0;
  double e_sigma = 0.0;
  std::size_t excluded = 0;  // points with a rank-deficient decoder Jacobian
};

/// Pushes the learned latent coefficients through the learned decoder and
/// compares against the oracle ambient coefficients.
CoefficientMetrics coefficient_metrics(const Chart& chart, const LatentSde& model,
                                       const TrueChart& truth, const LatentSde& sde,
                                       std::span<const Vector> eval_points);

/// Mean reconstruction error on the frame [-1-delta, 1+delta]^2 \ [-1, 1]^2
/// (the boundary of [-1, 1]^2 when delta = 0), `points` samples per delta.
std::vector<double> extrapolation_sweep(const Chart& chart, const TrueChart& truth,
                                        std::span<const double> deltas, std::size_t points,
                                        std::uint64_t seed);

struct RadialMfpt {
  double ground_truth = 0.0;
  double learned = 0.0;
  double relative_error = 0.0;
  std::size_t n_ground_truth = 0;
  std::size_t n_learned = 0;
  bool valid = false;  // both ensembles kept at least one trajectory
};

/// Mean capped passage time over uncensored trajectories of each ensemble.
double mean_radial_time(const TrajectoryEnsemble& ensemble, std::size_t* used = nullptr);
RadialMfpt radial_mfpt(const TrajectoryEnsemble& ground_truth, const TrajectoryEnsemble& learned);

struct Passage {
  int from = -1;
  int to = -1;
  double time = 0.0;
};

/// Dwell-confirmed well-to-well passages of one labelled trajectory. A move
/// into core j counts once `n_dwell` consecutive labels equal j; its time
/// runs from the previous arrival to the start of that dwell.
std::vector<Passage> extract_passages(std::span<const std::int8_t> labels, std::size_t n_dwell,
                                      double dt);

struct InterwellMfpt {
  double tau_01 = 0.0;
  double tau_02 = 0.0;
  std::size_t n_01 = 0;
  std::size_t n_02 = 0;
};
InterwellMfpt interwell_mfpt(const TrajectoryEnsemble& ensemble, const WellSet& wells);

struct InterwellComparison {
  InterwellMfpt ground_truth;
  InterwellMfpt learned;
  double rel_error_01 = 0.0;  // NaN when either side has no passages
  double rel_error_02 = 0.0;
};
InterwellComparison compare_interwell(const InterwellMfpt& ground_truth,
                                      const InterwellMfpt& learned);

/// Kernel-blending landmark simulator with oracle coefficients.
class AtlasModel {
 public:
  /// `bandwidth` <= 0 selects 2 x median nearest-neighbour landmark distance.
  AtlasModel(const LandmarkSet& landmarks, double bandwidth = 0.0);

  struct Blend {
    Vector weights;
    Vector b;
    Vector centroid;
    Matrix frame;      // top-d eigenvectors of the blended Lambda, D x d
    Vector values;     // their eigenvalues
    Matrix projector;  // frame frame^T
  };

  /// Normalized Gaussian weights; nearest landmark if all underflow.
  Vector weights(std::span<const double> x) const;
  Blend blend(std::span<const double> x) const;
  /// centroid + P (x - centroid) of the blend at x.
  Vector project(std::span<const double> x) const;

  double bandwidth() const { return h_; }
  std::size_t latent_dim() const { return d_; }
  std::size_t size() const { return landmarks_.size(); }

 private:
  LandmarkSet landmarks_;
  double h_ = 0.0;
  std::size_t d_ = 2;
};

/// Ambient Euler-Maruyama: x' = x + b dt + U diag(sqrt(lambda)) sqrt(dt) xi with
/// xi the d-dimensional CRN increment, then re-projection onto the blended
/// tangent plane at x'.
TrajectoryEnsemble atlas_simulate(const AtlasModel& model, std::span<const Vector> x0,
                                  const SimConfig& cfg, const EnsembleOptions& options);

struct AtlasMetrics {
  ChartMetrics chart;
  CoefficientMetrics coefficients;
};
/// The same metric definitions with P_theta, b and Lambda replaced by their
/// blended counterparts; the normal residual uses the true tangential drift.
AtlasMetrics atlas_metrics(const AtlasModel& model, const TrueChart& truth, const LatentSde& sde,
                           std::span<const Vector> test_points,
                           std::span<const Vector> eval_points);

}  // namespace geosde
