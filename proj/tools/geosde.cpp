// geosde command-line driver: sweeps, property suite, landmark and
// ground-truth dumps.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geosde/evaluate.hpp"
#include "geosde/experiment.hpp"
#include "properties.hpp"

namespace fs = std::filesystem;
using namespace geosde;

namespace {

struct CommonFlags {
  std::string config;
  std::string seeds;
  std::string out_dir;
  std::string condition;
  std::string surface;
  std::string dynamics;
  std::string kf;
  std::string jobs;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seeds", f.seeds, "seed list, e.g. 0,1,2 or 0-9");
  cmd->add_option("--out-dir", f.out_dir, "output directory (default: $GEOSDE_OUT_DIR or ./results)");
  cmd->add_option("--condition", f.condition, "baseline, T, F, C, T+F, atlas (comma list)");
  cmd->add_option("--surface", f.surface, "paraboloid, hyperbolic_paraboloid, quartic_dome, sinusoidal");
  cmd->add_option("--dynamics", f.dynamics, "rotation or mueller_brown");
  cmd->add_option("--kf", f.kf, "Fourier pairs K_F (D = 3 + 2 K_F)");
  cmd->add_option("--jobs", f.jobs, "worker threads");
  cmd->add_option("--set", f.overrides, "extra key=value override (repeatable)");
}

ExperimentConfig resolve(const CommonFlags& f) {
  ConfigMap values;
  if (const char* env = std::getenv("GEOSDE_OUT_DIR"); env != nullptr && *env != '\0')
    values["out_dir"] = env;
  if (!f.config.empty())
    for (auto& [k, v] : read_config_file(f.config)) values[k] = v;
  const auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) values[key] = v;
  };
  put("seeds", f.seeds);
  put("out_dir", f.out_dir);
  put("condition", f.condition);
  put("surface", f.surface);
  put("dynamics", f.dynamics);
  put("k_f", f.kf);
  put("jobs", f.jobs);
  for (const std::string& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
    for (auto& [k, v] : parse_config_text(kv)) values[k] = v;
  }
  return config_from_map(values);
}

std::string run_stem(const ExperimentConfig& cfg, std::uint64_t seed) {
  return std::string(to_string(cfg.surface)) + "_" + std::string(to_string(cfg.dynamics)) + "_kf" +
         std::to_string(cfg.k_f) + "_s" + std::to_string(seed);
}

int cmd_run(const CommonFlags& flags) {
  const ExperimentConfig cfg = resolve(flags);
  std::printf("geosde run: %s/%s D=%zu N=%zu, %zu condition(s) x %zu seed(s), %zu job(s) -> %s\n",
              std::string(to_string(cfg.surface)).c_str(), std::string(to_string(cfg.dynamics)).c_str(),
              cfg.ambient_dim(), cfg.n_landmarks, cfg.conditions.size(), cfg.seeds.size(), cfg.jobs,
              cfg.out_dir.c_str());
  const auto rows = run_experiment(cfg);
  int failures = 0;
  for (const ResultRow& r : rows) {
    std::printf("  %-8s seed %-4llu %-8s tangent %.3e  E %.3e  E_b %.3e  E_Lambda %.3e  (%.1fs)%s%s\n",
                std::string(to_string(r.condition)).c_str(),
                static_cast<unsigned long long>(r.seed), r.status.c_str(), r.chart.tangent,
                r.chart.fidelity, r.coefficients.e_b, r.coefficients.e_lambda, r.wall_seconds,
                r.message.empty() ? "" : "  ", r.message.c_str());
    if (r.status == "error") ++failures;
  }
  return failures == 0 ? 0 : 1;
}

int cmd_properties(std::uint64_t seed) {
  oracle::PropertyOptions opt;
  opt.seed = seed;
  int failed = 0;
  for (const auto& r : oracle::run_property_suite(opt)) {
    std::printf("%s %-24s worst %.3e  tol %.1e  cases %zu%s%s\n", r.passed ? "PASS" : "FAIL",
                r.name.c_str(), r.worst, r.tolerance, r.cases, r.detail.empty() ? "" : "  at ",
                r.detail.c_str());
    if (!r.passed) ++failed;
  }
  return failed == 0 ? 0 : 1;
}

int cmd_landmarks(const CommonFlags& flags) {
  const ExperimentConfig cfg = resolve(flags);
  fs::create_directories(cfg.out_dir);
  for (std::uint64_t seed : cfg.seeds) {
    const DeltaNetResult net = experiment_landmarks(cfg, seed);
    const TrueChart truth = make_true_chart(cfg, seed);
    const fs::path file = fs::path(cfg.out_dir) / ("landmarks_" + run_stem(cfg, seed) + ".csv");
    std::ofstream out(file);
    out << "schema,index,u,v";
    for (std::size_t k = 0; k < truth.ambient_dim(); ++k) out << ",x" << k;
    out << '\n';
    for (std::size_t i = 0; i < net.points.size(); ++i) {
      out << kSchemaVersion << ',' << i << ',' << format_double(net.points[i][0]) << ','
          << format_double(net.points[i][1]);
      for (double v : truth.decode(net.points[i])) out << ',' << format_double(v);
      out << '\n';
    }
    std::printf("seed %llu: %zu landmarks (target %zu, delta %.6g, pool %zu%s) -> %s\n",
                static_cast<unsigned long long>(seed), net.points.size(), cfg.n_landmarks,
                net.delta, net.pool_size, net.within_tolerance ? "" : ", outside +-10%",
                file.string().c_str());
  }
  return 0;
}

int cmd_simulate(const CommonFlags& flags, bool paths) {
  const ExperimentConfig cfg = resolve(flags);
  fs::create_directories(cfg.out_dir);
  const WellSet wells;
  for (std::uint64_t seed : cfg.seeds) {
    const TrajectoryEnsemble ens = experiment_ground_truth(cfg, seed, paths);
    const fs::path file = fs::path(cfg.out_dir) / ("ground_truth_" + run_stem(cfg, seed) + ".csv");
    std::ofstream out(file);
    out << "schema,trajectory,censored,censor_step,radial_time,reached_radius\n";
    for (std::size_t i = 0; i < ens.summaries.size(); ++i) {
      const auto& s = ens.summaries[i];
      out << kSchemaVersion << ',' << i << ',' << s.censored << ',' << s.censor_step << ','
          << format_double(s.radial_time) << ',' << s.reached_radius << '\n';
    }
    if (paths) write_paths_binary((fs::path(cfg.out_dir) / ("paths_" + run_stem(cfg, seed) + ".bin")).string(), ens);
    std::printf("seed %llu: %zu trajectories, exit fraction %.4f", static_cast<unsigned long long>(seed),
                ens.summaries.size(), ens.exit_fraction());
    if (cfg.dynamics == DynamicsKind::kMuellerBrown) {
      const InterwellMfpt m = interwell_mfpt(ens, wells);
      std::printf(", tau01 %.4g (%zu), tau02 %.4g (%zu)", m.tau_01, m.n_01, m.tau_02, m.n_02);
    } else {
      std::size_t used = 0;
      const double t = mean_radial_time(ens, &used);
      std::printf(", radial MFPT %.4g over %zu", t, used);
    }
    std::printf(" -> %s\n", file.string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometric chart learning and latent SDE estimation"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "train and evaluate every (condition, seed)");
  add_common(run, run_flags);

  std::uint64_t prop_seed = 20240611;
  auto* props = app.add_subcommand("test-properties", "run the invariant property suite");
  props->add_option("--seed", prop_seed, "suite seed");

  CommonFlags lm_flags;
  auto* landmarks = app.add_subcommand("landmarks", "emit the delta-net landmarks only");
  add_common(landmarks, lm_flags);

  CommonFlags sim_flags;
  bool paths = false;
  auto* simulate = app.add_subcommand("simulate", "ground-truth ensembles only");
  add_common(simulate, sim_flags);
  simulate->add_flag("--paths", paths, "also write latent paths (binary)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_flags);
    if (*props) return cmd_properties(prop_seed);
    if (*landmarks) return cmd_landmarks(lm_flags);
    if (*simulate) return cmd_simulate(sim_flags, paths);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "geosde: %s\n", e.what());
    return 2;
  }
  return 0;
}
