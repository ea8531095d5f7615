#include "geosde/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "geosde/rng.hpp"

#ifndef GEOSDE_GIT_REVISION
#define GEOSDE_GIT_REVISION "unknown"
#endif

namespace geosde {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument("config: " + key + ": not an unsigned integer: '" + s + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw std::invalid_argument("config: " + key + ": not a number: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("config: " + key + ": not a boolean: '" + s + "'");
}

// "0,1,5-8" -> {0, 1, 5, 6, 7, 8}
std::vector<std::uint64_t> parse_seed_list(const std::string& key, const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split(s, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_u64(key, item));
      continue;
    }
    const std::uint64_t a = parse_u64(key, trim(item.substr(0, dash)));
    const std::uint64_t b = parse_u64(key, trim(item.substr(dash + 1)));
    if (b < a) throw std::invalid_argument("config: " + key + ": empty range '" + item + "'");
    for (std::uint64_t v = a; v <= b; ++v) out.push_back(v);
  }
  return out;
}

std::string tangent_form_name(TangentForm f) {
  switch (f) {
    case TangentForm::kExact: return "exact";
    case TangentForm::kSimplified: return "simplified";
    case TangentForm::kAuto: return "auto";
  }
  return "auto";
}

TangentForm parse_tangent_form(const std::string& s) {
  if (s == "exact") return TangentForm::kExact;
  if (s == "simplified") return TangentForm::kSimplified;
  if (s == "auto") return TangentForm::kAuto;
  throw std::invalid_argument("config: tangent_form: expected exact|simplified|auto, got '" + s +
                              "'");
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += f(v[i]);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define GEOSDE_SIZE_FIELD(name)                                                         \
  Field {                                                                               \
    #name, [](const ExperimentConfig& c) { return std::to_string(c.name); },            \
        [](ExperimentConfig& c, const std::string& v) {                                 \
          c.name = static_cast<std::size_t>(parse_u64(#name, v));                       \
        }                                                                               \
  }
#define GEOSDE_DOUBLE_FIELD(name)                                                       \
  Field {                                                                               \
    #name, [](const ExperimentConfig& c) { return format_double(c.name); },             \
        [](ExperimentConfig& c, const std::string& v) { c.name = parse_double(#name, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"surface", [](const ExperimentConfig& c) { return std::string(to_string(c.surface)); },
       [](ExperimentConfig& c, const std::string& v) { c.surface = parse_surface(v); }},
      {"dynamics", [](const ExperimentConfig& c) { return std::string(to_string(c.dynamics)); },
       [](ExperimentConfig& c, const std::string& v) { c.dynamics = parse_dynamics(v); }},
      GEOSDE_SIZE_FIELD(k_f),
      GEOSDE_SIZE_FIELD(n_landmarks),
      {"condition",
       [](const ExperimentConfig& c) {
         return join<Condition>(c.conditions,
                                [](const Condition& x) { return std::string(to_string(x)); });
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.conditions.clear();
         for (const auto& s : split(v, ',')) c.conditions.push_back(parse_condition(s));
         if (c.conditions.empty()) throw std::invalid_argument("config: condition: empty list");
       }},
      {"seeds",
       [](const ExperimentConfig& c) {
         return join<std::uint64_t>(c.seeds,
                                    [](const std::uint64_t& s) { return std::to_string(s); });
       },
       [](ExperimentConfig& c, const std::string& v) { c.seeds = parse_seed_list("seeds", v); }},
      GEOSDE_DOUBLE_FIELD(lambda_t),
      GEOSDE_DOUBLE_FIELD(lambda_f),
      GEOSDE_DOUBLE_FIELD(lambda_c),
      {"tangent_form", [](const ExperimentConfig& c) { return tangent_form_name(c.tangent_form); },
       [](ExperimentConfig& c, const std::string& v) { c.tangent_form = parse_tangent_form(v); }},
      GEOSDE_SIZE_FIELD(chart_width),
      GEOSDE_SIZE_FIELD(stage1_epochs),
      GEOSDE_DOUBLE_FIELD(stage1_lr),
      GEOSDE_SIZE_FIELD(batch_size),
      GEOSDE_DOUBLE_FIELD(warmup_fraction),
      GEOSDE_DOUBLE_FIELD(warmup_lr_multiplier),
      {"drift_hidden",
       [](const ExperimentConfig& c) {
         return join<std::size_t>(c.drift_hidden,
                                  [](const std::size_t& s) { return std::to_string(s); });
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.drift_hidden.clear();
         for (const auto& s : split(v, ','))
           c.drift_hidden.push_back(static_cast<std::size_t>(parse_u64("drift_hidden", s)));
       }},
      {"diffusion_hidden",
       [](const ExperimentConfig& c) {
         return join<std::size_t>(c.diffusion_hidden,
                                  [](const std::size_t& s) { return std::to_string(s); });
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.diffusion_hidden.clear();
         for (const auto& s : split(v, ','))
           c.diffusion_hidden.push_back(static_cast<std::size_t>(parse_u64("diffusion_hidden", s)));
       }},
      GEOSDE_SIZE_FIELD(stage2_epochs),
      GEOSDE_DOUBLE_FIELD(stage2_lr),
      GEOSDE_SIZE_FIELD(stage3_epochs),
      GEOSDE_DOUBLE_FIELD(stage3_lr),
      GEOSDE_SIZE_FIELD(n_test),
      GEOSDE_SIZE_FIELD(n_eval),
      {"extrapolation_deltas",
       [](const ExperimentConfig& c) {
         return join<double>(c.extrapolation_deltas, [](const double& d) { return format_double(d); });
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.extrapolation_deltas.clear();
         for (const auto& s : split(v, ','))
           c.extrapolation_deltas.push_back(parse_double("extrapolation_deltas", s));
       }},
      GEOSDE_SIZE_FIELD(extrapolation_points),
      GEOSDE_SIZE_FIELD(sigma_min_grid),
      GEOSDE_DOUBLE_FIELD(atlas_bandwidth),
      {"simulate", [](const ExperimentConfig& c) { return std::string(c.simulate ? "true" : "false"); },
       [](ExperimentConfig& c, const std::string& v) { c.simulate = parse_bool("simulate", v); }},
      GEOSDE_DOUBLE_FIELD(dt),
      GEOSDE_DOUBLE_FIELD(horizon),
      GEOSDE_SIZE_FIELD(n_traj),
      GEOSDE_DOUBLE_FIELD(box_lo),
      GEOSDE_DOUBLE_FIELD(box_hi),
      GEOSDE_DOUBLE_FIELD(radial_r),
      {"out_dir", [](const ExperimentConfig& c) { return c.out_dir; },
       [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; }},
      GEOSDE_SIZE_FIELD(jobs),
  };
  return table;
}

#undef GEOSDE_SIZE_FIELD
#undef GEOSDE_DOUBLE_FIELD

std::string condition_tag(Condition c) {
  std::string s(to_string(c));
  s.erase(std::remove(s.begin(), s.end(), '+'), s.end());
  return s;
}

// Initial conditions and bookkeeping shared by the ground-truth, learned and
// ATLAS ensembles of one seed.
struct SimSetup {
  SimConfig sim;
  WellSet wells;
  EnsembleOptions options;
  std::vector<Vector> z0;
  std::vector<Vector> x0;
};

void prepare_simulation(const ExperimentConfig& cfg, std::uint64_t seed, const TrueChart& truth,
                        SimSetup& s) {
  s.sim = cfg.sim_config(derive_seed(seed, streams::kSimulationNoise));
  s.options = {};
  if (cfg.dynamics == DynamicsKind::kMuellerBrown) {
    const double hw = cfg.domain_half_width();
    s.z0 = mb_initial_conditions(cfg.n_traj, s.wells, -hw, hw,
                                 derive_seed(seed, streams::kInitialConditions));
    s.options.wells = &s.wells;
  } else {
    s.z0.assign(cfg.n_traj, Vector{0.0, 0.0});
    s.options.radial_r = cfg.radial_r;
    s.options.stop_at_radial = true;
  }
  s.x0.clear();
  for (const Vector& z : s.z0) s.x0.push_back(truth.decode(z));
}

void fill_mfpt(const ExperimentConfig& cfg, const SimSetup& setup, const TrajectoryEnsemble& gt,
               const TrajectoryEnsemble& learned, ResultRow& row) {
  row.exit_fraction_gt = gt.exit_fraction();
  row.exit_fraction_learned = learned.exit_fraction();
  if (cfg.dynamics == DynamicsKind::kMuellerBrown) {
    row.interwell = compare_interwell(interwell_mfpt(gt, setup.wells),
                                      interwell_mfpt(learned, setup.wells));
  } else {
    row.radial = radial_mfpt(gt, learned);
  }
}

Mlp init_coefficient_net(const std::vector<std::size_t>& hidden, std::size_t out,
                         std::uint64_t seed) {
  std::vector<std::size_t> widths{2};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  CounterRng rng(seed);
  return Mlp::glorot(std::move(widths), rng);
}

ResultRow blank_row(const ExperimentConfig& cfg, Condition condition, std::uint64_t seed) {
  ResultRow row;
  row.surface = cfg.surface;
  row.dynamics = cfg.dynamics;
  row.k_f = cfg.k_f;
  row.n_landmarks = cfg.n_landmarks;
  row.condition = condition;
  row.seed = seed;
  row.delta = kNaN;
  row.chart = {kNaN, kNaN, kNaN, 0};
  row.coefficients = {kNaN, kNaN, kNaN, 0};
  row.sigma_min = kNaN;
  row.stage1_loss = row.stage2_loss = row.stage3_loss = kNaN;
  row.extrapolation.assign(cfg.extrapolation_deltas.size(), kNaN);
  row.radial = {kNaN, kNaN, kNaN, 0, 0, false};
  row.interwell.ground_truth = {kNaN, kNaN, 0, 0};
  row.interwell.learned = {kNaN, kNaN, 0, 0};
  row.interwell.rel_error_01 = row.interwell.rel_error_02 = kNaN;
  row.exit_fraction_gt = row.exit_fraction_learned = kNaN;
  return row;
}

void note(ResultRow& row, const std::string& msg) {
  if (!row.message.empty()) row.message += "; ";
  row.message += msg;
}

}  // namespace

// --- config ------------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults(DynamicsKind dynamics) {
  ExperimentConfig c;
  c.dynamics = dynamics;
  if (dynamics == DynamicsKind::kMuellerBrown) {
    c.n_landmarks = 200;
    c.stage1_epochs = 4000;
    c.stage2_epochs = 3000;
    c.stage3_epochs = 3000;
    c.drift_hidden = {256, 256, 256};
    const SimConfig s = SimConfig::mueller_brown_defaults();
    c.dt = s.dt;
    c.horizon = s.horizon;
    c.n_traj = s.n_traj;
  }
  return c;
}

double ExperimentConfig::domain_half_width() const {
  return dynamics == DynamicsKind::kMuellerBrown ? 0.55 : 1.0;
}

SimConfig ExperimentConfig::sim_config(std::uint64_t noise_seed) const {
  SimConfig s;
  s.dt = dt;
  s.horizon = horizon;
  s.n_traj = n_traj;
  s.box_lo = box_lo;
  s.box_hi = box_hi;
  s.seed = noise_seed;
  return s;
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ExperimentConfig config_from_map(const ConfigMap& values) {
  DynamicsKind dyn = DynamicsKind::kRotation;
  if (const auto it = values.find("dynamics"); it != values.end()) dyn = parse_dynamics(it->second);
  ExperimentConfig cfg = ExperimentConfig::defaults(dyn);
  for (const auto& [key, value] : values) {
    const auto& table = fields();
    const auto f = std::find_if(table.begin(), table.end(),
                                [&](const Field& fd) { return key == fd.key; });
    if (f == table.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
    f->set(cfg, value);
  }
  if (cfg.seeds.empty()) throw std::invalid_argument("config: seeds: empty list");
  if (cfg.jobs == 0) cfg.jobs = 1;
  return cfg;
}

ConfigMap config_to_map(const ExperimentConfig& cfg) {
  ConfigMap out;
  for (const Field& f : fields()) out[f.key] = f.get(cfg);
  return out;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  return config_from_map(parse_config_text(text));
}

// --- pipeline ----------------------------------------------------------------

TrueChart make_true_chart(const ExperimentConfig& cfg, std::uint64_t seed) {
  return TrueChart(MongeSurface(cfg.surface), FourierEmbedding::from_seed(cfg.k_f, seed));
}

std::unique_ptr<LatentSde> make_dynamics(DynamicsKind kind) {
  if (kind == DynamicsKind::kMuellerBrown) return std::make_unique<MuellerBrownSde>();
  return std::make_unique<RotationSde>();
}

DeltaNetResult experiment_landmarks(const ExperimentConfig& cfg, std::uint64_t seed) {
  const TrueChart truth = make_true_chart(cfg, seed);
  const double hw = cfg.domain_half_width();
  return delta_net_landmarks(truth, -hw, hw, cfg.n_landmarks,
                             derive_seed(seed, streams::kLandmarkPool));
}

TrajectoryEnsemble experiment_ground_truth(const ExperimentConfig& cfg, std::uint64_t seed,
                                           bool keep_paths) {
  const TrueChart truth = make_true_chart(cfg, seed);
  const auto sde = make_dynamics(cfg.dynamics);
  SimSetup setup;
  prepare_simulation(cfg, seed, truth, setup);
  setup.options.keep_paths = keep_paths;
  setup.options.jobs = cfg.jobs;
  return simulate_ground_truth(truth, *sde, setup.z0, setup.sim, setup.options);
}

RunOutput run_single(const ExperimentConfig& cfg, Condition condition, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  ResultRow& row = out.row;
  row = blank_row(cfg, condition, seed);
  try {
    const TrueChart truth = make_true_chart(cfg, seed);
    const auto sde = make_dynamics(cfg.dynamics);
    const double hw = cfg.domain_half_width();

    const DeltaNetResult net = delta_net_landmarks(truth, -hw, hw, cfg.n_landmarks,
                                                   derive_seed(seed, streams::kLandmarkPool));
    const LandmarkSet landmarks = build_landmark_set(truth, *sde, net.points);
    row.landmarks = landmarks.size();
    row.delta = net.delta;
    if (!net.within_tolerance)
      note(row, "delta-net gave " + std::to_string(landmarks.size()) + " landmarks");

    const std::uint64_t eval_seed = derive_seed(seed, streams::kEvaluation);
    const auto test_points = uniform_points(cfg.n_test, -hw, hw, derive_seed(eval_seed, "test"));
    const auto eval_points =
        uniform_points(cfg.n_eval, -hw, hw, derive_seed(eval_seed, "coefficients"));

    SimSetup setup;
    std::optional<TrajectoryEnsemble> gt;
    if (cfg.simulate) {
      prepare_simulation(cfg, seed, truth, setup);
      gt = simulate_ground_truth(truth, *sde, setup.z0, setup.sim, setup.options);
    }

    if (condition == Condition::kAtlas) {
      const AtlasModel atlas(landmarks, cfg.atlas_bandwidth);
      const AtlasMetrics m = atlas_metrics(atlas, truth, *sde, test_points, eval_points);
      row.chart = m.chart;
      row.coefficients = m.coefficients;
      if (gt) {
        const TrajectoryEnsemble learned = atlas_simulate(atlas, setup.x0, setup.sim, setup.options);
        fill_mfpt(cfg, setup, *gt, learned, row);
      }
    } else {
      const PenaltyConfig penalty{cfg.lambda_t, cfg.lambda_f, cfg.lambda_c, condition};
      const std::size_t width =
          cfg.chart_width > 0 ? cfg.chart_width : default_chart_width(cfg.ambient_dim());
      const std::uint64_t weight_seed = derive_seed(seed, streams::kWeights);
      LearnedChart chart =
          init_chart(cfg.ambient_dim(), 2, width, derive_seed(weight_seed, "chart"));
      const Stage1Schedule s1{cfg.stage1_epochs, cfg.stage1_lr, cfg.batch_size,
                              cfg.warmup_fraction, cfg.warmup_lr_multiplier, cfg.tangent_form};
      const StageOneReport r1 =
          train_stage1(chart, landmarks, penalty, s1, derive_seed(seed, streams::kBatching));
      for (std::size_t e = 0; e < r1.epochs.size(); ++e) out.losses.push_back({1, e, r1.epochs[e]});
      if (!r1.epochs.empty()) row.stage1_loss = r1.epochs.back().total;
      if (r1.diverged) {
        row.status = "diverged";
        note(row, r1.message);
      }
      row.sigma_min = sigma_min_diagnostic(chart, truth, -hw, hw, cfg.sigma_min_grid);
      row.chart = chart_metrics(chart, truth, *sde, test_points);
      row.extrapolation = extrapolation_sweep(chart, truth, cfg.extrapolation_deltas,
                                              cfg.extrapolation_points,
                                              derive_seed(eval_seed, "extrapolation"));

      const LatentTargets targets = build_targets(chart, landmarks);
      row.targets_excluded = targets.excluded;
      Mlp drift = init_coefficient_net(cfg.drift_hidden, 2, derive_seed(weight_seed, "drift"));
      Mlp diffusion =
          init_coefficient_net(cfg.diffusion_hidden, 4, derive_seed(weight_seed, "diffusion"));
      const StageReport r2 = train_stage2(drift, targets, {cfg.stage2_epochs, cfg.stage2_lr});
      const StageReport r3 =
          train_stage3(diffusion, targets, {cfg.stage3_epochs, cfg.stage3_lr});
      for (const auto* r : {&r2, &r3}) {
        const int stage = r == &r2 ? 2 : 3;
        for (std::size_t e = 0; e < r->losses.size(); ++e) {
          LossRecord rec{stage, e, {}};
          rec.terms.total = r->losses[e];
          out.losses.push_back(rec);
        }
        if (r->diverged) {
          row.status = "diverged";
          note(row, r->message);
        }
      }
      if (!r2.losses.empty()) row.stage2_loss = r2.losses.back();
      if (!r3.losses.empty()) row.stage3_loss = r3.losses.back();

      const MlpLatentModel model(std::move(drift), std::move(diffusion));
      row.coefficients = coefficient_metrics(chart, model, truth, *sde, eval_points);
      if (gt) {
        const TrajectoryEnsemble learned =
            simulate_learned(chart, model, setup.x0, setup.sim, setup.options);
        fill_mfpt(cfg, setup, *gt, learned, row);
      }
    }
  } catch (const std::exception& e) {
    row.status = "error";
    note(row, e.what());
  }
  row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// --- output ------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> result_columns(std::span<const double> deltas) {
  std::vector<std::string> cols = {
      "schema", "surface", "dynamics", "k_f", "ambient_dim", "n_landmarks", "condition", "seed",
      "status", "landmarks", "delta", "reconstruction", "tangent", "fidelity", "chart_excluded",
      "e_b", "e_lambda", "e_sigma", "coef_excluded", "sigma_min", "stage1_loss", "stage2_loss",
      "stage3_loss", "targets_excluded", "radial_mfpt_gt", "radial_mfpt_learned",
      "radial_rel_error", "radial_n_gt", "radial_n_learned", "tau01_gt", "tau01_learned",
      "tau01_rel_error", "n01_gt", "n01_learned", "tau02_gt", "tau02_learned", "tau02_rel_error",
      "n02_gt", "n02_learned", "exit_fraction_gt", "exit_fraction_learned"};
  for (double d : deltas) {
    char name[48];
    std::snprintf(name, sizeof name, "extrap_%g", d);
    cols.push_back(name);
  }
  return cols;
}

std::vector<std::string> result_cells(const ResultRow& r) {
  const auto u = [](std::size_t v) { return std::to_string(v); };
  const auto f = format_double;
  const InterwellMfpt& g = r.interwell.ground_truth;
  const InterwellMfpt& l = r.interwell.learned;
  std::vector<std::string> cells = {kSchemaVersion,
                                    std::string(to_string(r.surface)),
                                    std::string(to_string(r.dynamics)),
                                    u(r.k_f),
                                    u(3 + 2 * r.k_f),
                                    u(r.n_landmarks),
                                    std::string(to_string(r.condition)),
                                    std::to_string(r.seed),
                                    r.status,
                                    u(r.landmarks),
                                    f(r.delta),
                                    f(r.chart.reconstruction),
                                    f(r.chart.tangent),
                                    f(r.chart.fidelity),
                                    u(r.chart.excluded),
                                    f(r.coefficients.e_b),
                                    f(r.coefficients.e_lambda),
                                    f(r.coefficients.e_sigma),
                                    u(r.coefficients.excluded),
                                    f(r.sigma_min),
                                    f(r.stage1_loss),
                                    f(r.stage2_loss),
                                    f(r.stage3_loss),
                                    u(r.targets_excluded),
                                    f(r.radial.ground_truth),
                                    f(r.radial.learned),
                                    f(r.radial.relative_error),
                                    u(r.radial.n_ground_truth),
                                    u(r.radial.n_learned),
                                    f(g.tau_01),
                                    f(l.tau_01),
                                    f(r.interwell.rel_error_01),
                                    u(g.n_01),
                                    u(l.n_01),
                                    f(g.tau_02),
                                    f(l.tau_02),
                                    f(r.interwell.rel_error_02),
                                    u(g.n_02),
                                    u(l.n_02),
                                    f(r.exit_fraction_gt),
                                    f(r.exit_fraction_learned)};
  for (double e : r.extrapolation) cells.push_back(f(e));
  return cells;
}

CsvWriter::CsvWriter(const std::string& path, std::vector<std::string> header)
    : width_(header.size()) {
  std::string line;
  for (std::size_t i = 0; i < header.size(); ++i) line += (i ? "," : "") + header[i];
  std::string existing;
  {
    std::ifstream in(path);
    if (in) std::getline(in, existing);
  }
  if (!existing.empty() && existing != line)
    throw std::runtime_error(path + ": existing header does not match this schema");
  out_.open(path, std::ios::app);
  if (!out_) throw std::runtime_error("cannot open " + path);
  if (existing.empty()) out_ << line << '\n' << std::flush;
}

void CsvWriter::write(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw std::logic_error("CsvWriter: row width mismatch");
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
  std::lock_guard lock(mutex_);
  out_ << line << '\n' << std::flush;
}

std::string git_revision() { return GEOSDE_GIT_REVISION; }

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir / "runs");
  {
    nlohmann::json meta;
    meta["schema"] = kSchemaVersion;
    meta["git_revision"] = git_revision();
    meta["config"] = config_to_map(cfg);
    std::ofstream(dir / "sweep.json") << meta.dump(2) << '\n';
  }
  CsvWriter results((dir / "results.csv").string(), result_columns(cfg.extrapolation_deltas));
  CsvWriter losses((dir / "losses.csv").string(),
                   {"schema", "surface", "dynamics", "k_f", "condition", "seed", "stage", "epoch",
                    "total", "reconstruction", "tangent", "inverse", "contractive"});

  struct Task {
    Condition condition;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (Condition c : cfg.conditions)
    for (std::uint64_t s : cfg.seeds) tasks.push_back({c, s});

  std::vector<ResultRow> rows;
  std::mutex rows_mutex;
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      RunOutput run = run_single(cfg, tasks[i].condition, tasks[i].seed);
      const ResultRow& r = run.row;
      const std::vector<std::string> prefix = {
          kSchemaVersion, std::string(to_string(r.surface)), std::string(to_string(r.dynamics)),
          std::to_string(r.k_f), std::string(to_string(r.condition)), std::to_string(r.seed)};
      for (const LossRecord& rec : run.losses) {
        std::vector<std::string> cells = prefix;
        cells.push_back(std::to_string(rec.stage));
        cells.push_back(std::to_string(rec.epoch));
        for (double v : {rec.terms.total, rec.terms.reconstruction, rec.terms.tangent,
                         rec.terms.inverse, rec.terms.contractive})
          cells.push_back(format_double(v));
        losses.write(cells);
      }
      results.write(result_cells(r));

      nlohmann::json meta;
      meta["schema"] = kSchemaVersion;
      meta["git_revision"] = git_revision();
      meta["config"] = config_to_map(cfg);
      meta["condition"] = std::string(to_string(r.condition));
      meta["seed"] = r.seed;
      meta["status"] = r.status;
      meta["message"] = r.message;
      meta["wall_seconds"] = r.wall_seconds;
      const auto cols = result_columns(cfg.extrapolation_deltas);
      const auto cells = result_cells(r);
      for (std::size_t k = 0; k < cols.size(); ++k) meta["row"][cols[k]] = cells[k];
      const std::string name = std::string(to_string(r.surface)) + "_" +
                               std::string(to_string(r.dynamics)) + "_kf" +
                               std::to_string(r.k_f) + "_" + condition_tag(r.condition) + "_s" +
                               std::to_string(r.seed) + ".json";
      std::ofstream(dir / "runs" / name) << meta.dump(2) << '\n';

      std::lock_guard lock(rows_mutex);
      rows.push_back(std::move(run.row));
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(cfg.jobs, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

}  // namespace geosde
