#include "geosde/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace geosde {

namespace {

bool outside(std::span<const double> x, const SimConfig& cfg) {
  if (!all_finite(x)) return true;
  return x[0] < cfg.box_lo || x[0] > cfg.box_hi || x[1] < cfg.box_lo || x[1] > cfg.box_hi;
}

}  // namespace

SimConfig SimConfig::rotation_defaults() { return SimConfig{}; }

SimConfig SimConfig::mueller_brown_defaults() {
  SimConfig c;
  c.dt = 0.005;
  c.horizon = 50.0;
  c.n_traj = 2000;
  return c;
}

std::size_t SimConfig::steps() const {
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw std::invalid_argument("SimConfig: need dt > 0, T >= 0");
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw std::invalid_argument("SimConfig: T / dt is not an integer");
  return static_cast<std::size_t>(rounded);
}

Path euler_maruyama(const LatentSde& sde, std::span<const double> z0, const SimConfig& cfg,
                    const NoiseBank& noise, std::uint64_t trajectory) {
  const std::size_t d = z0.size();
  const std::size_t steps = cfg.steps();
  const double sqdt = std::sqrt(cfg.dt);
  Path p;
  p.dim = d;
  p.states.reserve((steps + 1) * d);
  p.states.insert(p.states.end(), z0.begin(), z0.end());
  Vector z(z0.begin(), z0.end());
  Vector dw(d);
  for (std::size_t k = 0; k < steps; ++k) {
    noise.gaussians(trajectory, k, dw);
    const Vector mu = sde.drift(z);
    const Vector kick = matvec(sde.diffusion(z), dw);
    for (std::size_t i = 0; i < d; ++i) z[i] += mu[i] * cfg.dt + kick[i] * sqdt;
    p.states.insert(p.states.end(), z.begin(), z.end());
    if (p.nonfinite_step == 0 && !all_finite(z)) p.nonfinite_step = k + 1;
  }
  return p;
}

SummaryRecorder::SummaryRecorder(const SimConfig& cfg, const EnsembleOptions& options,
                                 std::size_t steps, TrajectorySummary& out)
    : cfg_(cfg), opt_(options), steps_(steps), out_(out) {}

bool SummaryRecorder::start(std::span<const double> x0, bool state_finite) {
  x0_.assign(x0.begin(), x0.end());
  out_ = TrajectorySummary{};
  if (opt_.wells != nullptr) {
    out_.labels.reserve(steps_ + 1);
    out_.labels.push_back(static_cast<std::int8_t>(opt_.wells->label(x0)));
  }
  out_.censored = !state_finite || outside(x0, cfg_);
  return !out_.censored;
}

bool SummaryRecorder::record(std::size_t k, std::span<const double> x, bool state_finite) {
  if (!state_finite || outside(x, cfg_)) {
    out_.censored = true;
    out_.censor_step = k;
    return false;
  }
  if (opt_.wells != nullptr) out_.labels.push_back(static_cast<std::int8_t>(opt_.wells->label(x)));
  if (opt_.radial_r > 0.0 && !out_.reached_radius) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - x0_[i]) * (x[i] - x0_[i]);
    if (r2 >= opt_.radial_r * opt_.radial_r) {
      out_.reached_radius = true;
      out_.radial_time = static_cast<double>(k) * cfg_.dt;
      if (opt_.stop_at_radial) return false;
    }
  }
  return true;
}

void SummaryRecorder::finish() {
  if (opt_.radial_r > 0.0 && !out_.reached_radius)
    out_.radial_time = out_.censored ? -1.0 : static_cast<double>(steps_) * cfg_.dt;
  if (out_.censored && opt_.wells != nullptr) out_.labels.assign(steps_ + 1, std::int8_t{-1});
}

double TrajectoryEnsemble::exit_fraction() const {
  if (summaries.empty()) return 0.0;
  const auto n = std::count_if(summaries.begin(), summaries.end(),
                               [](const TrajectorySummary& s) { return s.censored; });
  return static_cast<double>(n) / static_cast<double>(summaries.size());
}

namespace {

void run_one(const LatentSde& sde, const Decoder& decode, std::span<const double> z0,
             const SimConfig& cfg, const EnsembleOptions& opt, const NoiseBank& noise,
             std::uint64_t traj, std::size_t steps, TrajectorySummary& out, Path* latent,
             Path* ambient) {
  const std::size_t d = z0.size();
  const double sqdt = std::sqrt(cfg.dt);
  Vector z(z0.begin(), z0.end());
  Vector x = decode(z);
  Vector dw(d);
  if (latent != nullptr) {
    latent->dim = d;
    latent->states.assign(z.begin(), z.end());
    ambient->dim = x.size();
    ambient->states.assign(x.begin(), x.end());
  }
  SummaryRecorder rec(cfg, opt, steps, out);
  bool alive = rec.start(x, all_finite(z));
  for (std::size_t k = 0; k < steps && alive; ++k) {
    noise.gaussians(traj, k, dw);
    const Vector mu = sde.drift(z);
    const Vector kick = matvec(sde.diffusion(z), dw);
    for (std::size_t i = 0; i < d; ++i) z[i] += mu[i] * cfg.dt + kick[i] * sqdt;
    x = decode(z);
    alive = rec.record(k + 1, x, all_finite(z));
    if (latent != nullptr && !out.censored) {
      latent->states.insert(latent->states.end(), z.begin(), z.end());
      ambient->states.insert(ambient->states.end(), x.begin(), x.end());
    }
  }
  rec.finish();
}

}  // namespace

TrajectoryEnsemble simulate_ensemble(const LatentSde& sde, const Decoder& decode,
                                     std::span<const Vector> z0, const SimConfig& cfg,
                                     const EnsembleOptions& options) {
  TrajectoryEnsemble ens;
  ens.dt = cfg.dt;
  ens.steps = cfg.steps();
  const std::size_t n = z0.size();
  ens.summaries.resize(n);
  if (options.keep_paths) {
    ens.latent_paths.resize(n);
    ens.ambient_paths.resize(n);
  }
  const NoiseBank noise(cfg.seed);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      run_one(sde, decode, z0[i], cfg, options, noise, i, ens.steps, ens.summaries[i],
              options.keep_paths ? &ens.latent_paths[i] : nullptr,
              options.keep_paths ? &ens.ambient_paths[i] : nullptr);
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return ens;
}

TrajectoryEnsemble simulate_ground_truth(const TrueChart& chart, const LatentSde& sde,
                                         std::span<const Vector> z0, const SimConfig& cfg,
                                         const EnsembleOptions& options) {
  return simulate_ensemble(
      sde, [&chart](std::span<const double> z) { return chart.decode(z); }, z0, cfg, options);
}

TrajectoryEnsemble simulate_learned(const Chart& chart, const LatentSde& model,
                                    std::span<const Vector> x0, const SimConfig& cfg,
                                    const EnsembleOptions& options) {
  std::vector<Vector> z0;
  z0.reserve(x0.size());
  for (const Vector& x : x0) z0.push_back(chart.encode(x));
  return simulate_ensemble(
      model, [&chart](std::span<const double> z) { return chart.decode(z); }, z0, cfg, options);
}

std::vector<Vector> mb_initial_conditions(std::size_t n, const WellSet& wells, double lo,
                                          double hi, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = wells.centers[0][0] + 0.1 * rng.normal();
    const double v = wells.centers[0][1] + 0.1 * rng.normal();
    out.push_back({std::clamp(u, lo, hi), std::clamp(v, lo, hi)});
  }
  return out;
}

void write_paths_binary(const std::string& file, const TrajectoryEnsemble& ensemble) {
  if (ensemble.latent_paths.size() != ensemble.summaries.size())
    throw std::invalid_argument("write_paths_binary: ensemble was run without keep_paths");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("write_paths_binary: cannot open " + file);
  auto put_u64 = [&out](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  const std::size_t d = ensemble.latent_paths.empty() ? 0 : ensemble.latent_paths.front().dim;
  out.write("GEOSDEP1", 8);
  put_u64(ensemble.latent_paths.size());
  put_u64(ensemble.steps);
  put_u64(d);
  // Censored paths are padded with NaN so every record has steps + 1 states.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const Path& p : ensemble.latent_paths) {
    for (std::size_t k = 0; k < (ensemble.steps + 1) * d; ++k) {
      const double v = k < p.states.size() ? p.states[k] : nan;
      put_u64(std::bit_cast<std::uint64_t>(v));
    }
  }
}

// --- delta-net -------------------------------------------------------------------

std::vector<std::size_t> greedy_delta_net(std::span<const Vector> candidates, double delta,
                                          const MetricFn& metric, double euclid_lower_bound) {
  std::vector<std::size_t> accepted;
  const double d2 = delta * delta;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Vector& c = candidates[i];
    bool ok = true;
    for (std::size_t a : accepted) {
      const Vector& p = candidates[a];
      const Vector du = sub(c, p);
      const double e2 = squared_norm(du);
      if (euclid_lower_bound > 0.0 && euclid_lower_bound * euclid_lower_bound * e2 > d2) continue;
      Vector mid = add(c, p);
      for (auto& m : mid) m *= 0.5;
      if (!(dot(du, matvec(metric(mid), du)) > d2)) {
        ok = false;
        break;
      }
    }
    if (ok) accepted.push_back(i);
  }
  return accepted;
}

DeltaNetResult delta_net_landmarks(const TrueChart& chart, double lo, double hi,
                                   std::size_t n_target, std::uint64_t pool_seed) {
  if (n_target < 2) throw std::invalid_argument("delta_net_landmarks: N_target must be >= 2");
  DeltaNetResult res;
  res.pool_size = std::max<std::size_t>(10000, 100 * n_target);
  CounterRng rng(pool_seed);
  std::vector<Vector> pool(res.pool_size);
  for (auto& p : pool) p = {rng.uniform(lo, hi), rng.uniform(lo, hi)};

  const MetricFn metric = [&chart](std::span<const double> z) { return chart.metric(z); };
  // Monge patches have g >= I.
  auto count_at = [&](double delta) { return greedy_delta_net(pool, delta, metric, 1.0); };

  // Upper bracket: grow until the net is smaller than the target.
  double d_lo = 0.0;
  double d_hi = (hi - lo);
  while (count_at(d_hi).size() > n_target && d_hi < 1e3) d_hi *= 2.0;

  const double tol = 0.1 * static_cast<double>(n_target);
  std::vector<std::size_t> best;
  double best_delta = d_hi;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (d_lo + d_hi);
    std::vector<std::size_t> idx = count_at(mid);
    const double diff = std::abs(static_cast<double>(idx.size()) - static_cast<double>(n_target));
    if (best.empty() || diff < std::abs(static_cast<double>(best.size()) -
                                        static_cast<double>(n_target))) {
      best = idx;
      best_delta = mid;
    }
    if (diff <= tol) break;
    if (idx.size() > n_target) d_lo = mid; else d_hi = mid;
  }
  res.delta = best_delta;
  res.within_tolerance = std::abs(static_cast<double>(best.size()) -
                                  static_cast<double>(n_target)) <= tol;
  for (std::size_t i : best) res.points.push_back(pool[i]);
  return res;
}

}  // namespace geosde
