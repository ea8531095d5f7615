#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "geosde/chart_training.hpp"
#include "geosde/dynamics.hpp"
#include "geosde/evaluate.hpp"
#include "geosde/latent_sde.hpp"
#include "geosde/simulate.hpp"
#include "geosde/surfaces.hpp"

namespace geosde {

inline constexpr const char* kSchemaVersion = "geosde.v1";

struct ExperimentConfig {
  SurfaceKind surface = SurfaceKind::kParaboloid;
  DynamicsKind dynamics = DynamicsKind::kRotation;
  std::size_t k_f = 4;
  std::size_t n_landmarks = 50;
  std::vector<Condition> conditions{Condition::kTF};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  double lambda_t = 1.0;
  double lambda_f = 1.0;
  double lambda_c = 0.01;
  TangentForm tangent_form = TangentForm::kExact;

  std::size_t chart_width = 0;  // 0: by ambient dimension
  std::size_t stage1_epochs = 500;
  double stage1_lr = 0.005;
  std::size_t batch_size = 20;
  double warmup_fraction = 0.2;
  double warmup_lr_multiplier = 2.0;

  std::vector<std::size_t> drift_hidden{64, 64};
  std::vector<std::size_t> diffusion_hidden{64, 64};
  std::size_t stage2_epochs = 300;
  double stage2_lr = 0.001;
  std::size_t stage3_epochs = 300;
  double stage3_lr = 0.001;

  std::size_t n_test = 500;
  std::size_t n_eval = 200;
  std::vector<double> extrapolation_deltas{0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  std::size_t extrapolation_points = 500;
  std::size_t sigma_min_grid = 50;
  double atlas_bandwidth = 0.0;

  bool simulate = true;
  double dt = 0.01;
  double horizon = 2.0;
  std::size_t n_traj = 500;
  double box_lo = -1.0;
  double box_hi = 1.0;
  double radial_r = 2.0;

  std::string out_dir = "results";
  std::size_t jobs = 1;

  /// Defaults for a dynamics family (rotation or Mueller-Brown budgets).
  static ExperimentConfig defaults(DynamicsKind dynamics);

  std::size_t ambient_dim() const { return 3 + 2 * k_f; }
  /// Latent training domain: [-1, 1]^2 for rotation, [-0.55, 0.55]^2 for MB.
  double domain_half_width() const;
  SimConfig sim_config(std::uint64_t noise_seed) const;

  bool operator==(const ExperimentConfig&) const = default;
};

using ConfigMap = std::map<std::string, std::string>;

/// `key = value` lines; '#' starts a comment. Throws on malformed lines.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::string& path);
/// Starts from defaults(dynamics in `values`, rotation if absent) and applies
/// every key. Unknown keys throw std::invalid_argument.
ExperimentConfig config_from_map(const ConfigMap& values);
std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config(const std::string& text);
ConfigMap config_to_map(const ExperimentConfig& cfg);

struct ResultRow {
  SurfaceKind surface = SurfaceKind::kParaboloid;
  DynamicsKind dynamics = DynamicsKind::kRotation;
  std::size_t k_f = 0;
  std::size_t n_landmarks = 0;
  Condition condition = Condition::kTF;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | diverged | error
  std::string message;        // JSON only

  std::size_t landmarks = 0;
  double delta = 0.0;
  ChartMetrics chart;
  CoefficientMetrics coefficients;
  double sigma_min = 0.0;
  double stage1_loss = 0.0;
  double stage2_loss = 0.0;
  double stage3_loss = 0.0;
  std::size_t targets_excluded = 0;
  std::vector<double> extrapolation;

  RadialMfpt radial;
  InterwellComparison interwell;
  double exit_fraction_gt = 0.0;
  double exit_fraction_learned = 0.0;

  double wall_seconds = 0.0;  // JSON only: keeps CSV rows deterministic
};

struct LossRecord {
  int stage = 1;
  std::size_t epoch = 0;
  LossTerms terms;  // stages 2/3 fill only `total`
};

struct RunOutput {
  ResultRow row;
  std::vector<LossRecord> losses;
};

/// One (condition, seed) run end to end. Deterministic in (cfg, seed).
RunOutput run_single(const ExperimentConfig& cfg, Condition condition, std::uint64_t seed);

std::vector<std::string> result_columns(std::span<const double> deltas);
std::vector<std::string> result_cells(const ResultRow& row);
std::string format_double(double v);

/// Append-only CSV file. The header is written when the file is new or
/// empty; an existing file with a different header is an error.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::vector<std::string> header);
  void write(const std::vector<std::string>& cells);

 private:
  std::mutex mutex_;
  std::ofstream out_;
  std::size_t width_;
};

/// Runs every (condition, seed) on `cfg.jobs` workers, appending to
/// <out_dir>/results.csv and losses.csv and writing one JSON per run under
/// <out_dir>/runs/. Returns the rows in completion order.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);

/// delta-net landmarks for one seed.
DeltaNetResult experiment_landmarks(const ExperimentConfig& cfg, std::uint64_t seed);

/// Ground-truth ensemble only, with the same initial conditions and noise
/// a full run would use.
TrajectoryEnsemble experiment_ground_truth(const ExperimentConfig& cfg, std::uint64_t seed,
                                           bool keep_paths);

TrueChart make_true_chart(const ExperimentConfig& cfg, std::uint64_t seed);
std::unique_ptr<LatentSde> make_dynamics(DynamicsKind kind);

std::string git_revision();

}  // namespace geosde
