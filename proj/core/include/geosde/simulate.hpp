#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "geosde/chart.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/rng.hpp"
#include "geosde/surfaces.hpp"

namespace geosde {

struct SimConfig {
  double dt = 0.01;
  double horizon = 2.0;
  std::size_t n_traj = 500;
  double box_lo = -1.0;  // censoring box on the decoded (u, v) components
  double box_hi = 1.0;
  std::uint64_t seed = 0;  // NoiseBank seed

  static SimConfig rotation_defaults();
  static SimConfig mueller_brown_defaults();
  /// round(T / dt); throws if T/dt is not integral within 1e-9 relative.
  std::size_t steps() const;
};

/// One Euler-Maruyama path, flat (steps + 1) x d.
struct Path {
  std::size_t dim = 0;
  std::vector<double> states;
  std::size_t nonfinite_step = 0;  // 0 if the path stayed finite
  std::size_t length() const { return dim == 0 ? 0 : states.size() / dim; }
  std::span<const double> state(std::size_t k) const { return {states.data() + k * dim, dim}; }
};

/// z_{k+1} = z_k + mu(z_k) dt + sigma(z_k) sqrt(dt) dW_k with dW_k drawn from
/// `noise` at (trajectory, k).
Path euler_maruyama(const LatentSde& sde, std::span<const double> z0, const SimConfig& cfg,
                    const NoiseBank& noise, std::uint64_t trajectory);

struct EnsembleOptions {
  double radial_r = 0.0;          // > 0: record first ambient passage to ||x - x0|| >= r
  bool stop_at_radial = false;    // end a trajectory at its radial passage
  const WellSet* wells = nullptr;  // record per-step well labels on decoded (u, v)
  bool keep_paths = false;
  std::size_t jobs = 1;
};

struct TrajectorySummary {
  bool censored = false;
  std::size_t censor_step = 0;
  /// Time of first radial passage, capped at T; < 0 if censored before it.
  double radial_time = -1.0;
  bool reached_radius = false;
  std::vector<std::int8_t> labels;  // -1 at every step when censored
};

struct TrajectoryEnsemble {
  double dt = 0.0;
  std::size_t steps = 0;
  std::vector<TrajectorySummary> summaries;
  std::vector<Path> latent_paths;   // when keep_paths
  std::vector<Path> ambient_paths;  // when keep_paths
  double exit_fraction() const;
};

/// Applies censoring, radial-passage and well-label bookkeeping to one
/// trajectory as its decoded states arrive. Shared by every integrator so
/// the censor predicate is identical across ground truth, learned and
/// baseline ensembles.
class SummaryRecorder {
 public:
  SummaryRecorder(const SimConfig& cfg, const EnsembleOptions& options, std::size_t steps,
                  TrajectorySummary& out);
  /// Returns false if the initial state is already censored.
  bool start(std::span<const double> x0, bool state_finite = true);
  /// State after step k (1-based). Returns false when the trajectory ends.
  bool record(std::size_t k, std::span<const double> x, bool state_finite = true);
  void finish();

 private:
  const SimConfig& cfg_;
  const EnsembleOptions& opt_;
  std::size_t steps_;
  TrajectorySummary& out_;
  Vector x0_;
};

using Decoder = std::function<Vector(std::span<const double>)>;

/// Integrates every initial condition in latent space with CRN noise and
/// applies the censoring predicate to the decoded path. Trajectory i always
/// uses NoiseBank stream i; results are in index order for any `jobs`.
TrajectoryEnsemble simulate_ensemble(const LatentSde& sde, const Decoder& decode,
                                     std::span<const Vector> z0, const SimConfig& cfg,
                                     const EnsembleOptions& options);

/// Ground truth in the true local coordinates.
TrajectoryEnsemble simulate_ground_truth(const TrueChart& chart, const LatentSde& sde,
                                         std::span<const Vector> z0, const SimConfig& cfg,
                                         const EnsembleOptions& options);

/// Learned model from encoded ambient initial conditions z0 = pi_theta(x0),
/// decoded through phi_theta at every step.
TrajectoryEnsemble simulate_learned(const Chart& chart, const LatentSde& model,
                                    std::span<const Vector> x0, const SimConfig& cfg,
                                    const EnsembleOptions& options);

/// N(W0, 0.01 I) clipped to [lo, hi]^2.
std::vector<Vector> mb_initial_conditions(std::size_t n, const WellSet& wells, double lo,
                                          double hi, std::uint64_t seed);

/// Flat little-endian dump: "GEOSDEP1", u64 n_traj, u64 n_steps, u64 d, then
/// the latent paths as doubles. Requires keep_paths.
void write_paths_binary(const std::string& file, const TrajectoryEnsemble& ensemble);

// --- delta-net landmarks -----------------------------------------------------

/// Riemannian metric g(u) at a latent point.
using MetricFn = std::function<Matrix(std::span<const double>)>;

/// Greedy pass: accept a candidate when sqrt(du^T g(ubar) du) > delta to every
/// accepted point, ubar the pair midpoint. `euclid_lower_bound` c > 0 states
/// g >= c^2 I, which lets pairs with c |du| > delta skip the metric.
std::vector<std::size_t> greedy_delta_net(std::span<const Vector> candidates, double delta,
                                          const MetricFn& metric,
                                          double euclid_lower_bound = 0.0);

struct DeltaNetResult {
  std::vector<Vector> points;
  double delta = 0.0;
  bool within_tolerance = false;  // |N - N_target| <= 10% N_target
  std::size_t pool_size = 0;
};

/// Binary search on delta over a pool of max(10000, 100 N) uniform points in
/// [lo, hi]^2 drawn from `pool_seed`.
DeltaNetResult delta_net_landmarks(const TrueChart& chart, double lo, double hi,
                                   std::size_t n_target, std::uint64_t pool_seed);

}  // namespace geosde
