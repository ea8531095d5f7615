// Acceptance checks: one PASS/FAIL line per criterion.
//   geosde_acceptance [identities] [rotation] [mueller_brown]
// No argument runs every section. Per-run rows of the training sections go
// to acceptance_<section>.csv in the working directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "geosde/dynamics.hpp"
#include "geosde/evaluate.hpp"
#include "geosde/experiment.hpp"
#include "properties.hpp"

using namespace geosde;

namespace {

int g_failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s  %-44s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

void report_property(const std::string& name, std::initializer_list<oracle::PropertyResult> parts) {
  bool pass = true;
  std::string detail;
  for (const auto& r : parts) {
    pass = pass && r.passed;
    if (!detail.empty()) detail += "; ";
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s worst %.2e (tol %.0e, %zu cases)", r.name.c_str(), r.worst,
                  r.tolerance, r.cases);
    detail += buf;
    if (!r.passed && !r.detail.empty()) detail += " at " + r.detail;
  }
  report(pass, name, detail);
}

void identities() {
  const std::uint64_t seed = oracle::PropertyOptions{}.seed;
  report_property("ito round trip", {oracle::check_ito_round_trip(seed)});
  report_property("tangent loss trace form",
                  {oracle::check_tangent_trace_form(
                      [](const Matrix& j, const Matrix& u) { return tangent_loss_trace(j, u); }, seed)});
  report_property("bias decomposition", {oracle::check_bias_decomposition(seed)});
  report_property("coordinate invariance", {oracle::check_coordinate_invariance(seed)});
  report_property("projector identities and Lipschitz bound",
                  {oracle::check_projector_identities(seed), oracle::check_projector_lipschitz(seed)});
  report_property("quadratic covariation identity", {oracle::check_covariation_identity(seed)});
  report_property("autodiff vs finite differences",
                  {oracle::check_network_autodiff(seed), oracle::check_stage1_gradient(seed)});
  report_property("HVP Hessian contraction", {oracle::check_hessian_contraction(seed)});
  report_property("MFPT mechanics", {oracle::check_mfpt_radial(), oracle::check_mfpt_dwell_scan(),
                                     oracle::check_mfpt_crn(seed)});
}

using Rows = std::map<Condition, std::vector<ResultRow>>;

Rows run_all(const ExperimentConfig& cfg, const std::string& section) {
  const std::string file = "acceptance_" + section + ".csv";
  std::filesystem::remove(file);
  CsvWriter csv(file, result_columns(cfg.extrapolation_deltas));
  Rows rows;
  for (Condition c : cfg.conditions) {
    for (std::uint64_t s : cfg.seeds) {
      const auto t0 = std::chrono::steady_clock::now();
      ResultRow r = run_single(cfg, c, s).row;
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("      %-8s seed %llu  %-8s tangent %.3e  E %.3e  E_b %.3e  E_Lambda %.3e  sigma_min %.3f"
                  "  radial err %.3f  (%.0fs)\n",
                  std::string(to_string(c)).c_str(), static_cast<unsigned long long>(s), r.status.c_str(),
                  r.chart.tangent, r.chart.fidelity, r.coefficients.e_b, r.coefficients.e_lambda,
                  r.sigma_min, r.radial.relative_error, secs);
      std::fflush(stdout);
      csv.write(result_cells(r));
      rows[c].push_back(std::move(r));
    }
  }
  return rows;
}

double median_of(const std::vector<ResultRow>& rows, const std::function<double(const ResultRow&)>& f) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(f(r));
  return median(v);
}

bool all_ok(const std::vector<ResultRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.status == "ok"; });
}

void sigma_min_line(const std::string& name, const std::vector<ResultRow>& tf) {
  double worst = INFINITY;
  for (const auto& r : tf) worst = std::min(worst, std::isnan(r.sigma_min) ? -INFINITY : r.sigma_min);
  report(all_ok(tf) && worst > 0.05, name, fmt("min over T+F models %.3f (> 0.05)", worst));
}

void rotation() {
  ExperimentConfig cfg = ExperimentConfig::defaults(DynamicsKind::kRotation);
  cfg.surface = SurfaceKind::kParaboloid;
  cfg.k_f = 4;
  cfg.n_landmarks = 50;
  cfg.conditions = {Condition::kBaseline, Condition::kT, Condition::kTF};
  cfg.seeds = {0, 1, 2};
  std::printf("      rotation / paraboloid / D=%zu / N=%zu, seeds 0-2\n", cfg.ambient_dim(), cfg.n_landmarks);
  const Rows rows = run_all(cfg, "rotation");
  const auto& base = rows.at(Condition::kBaseline);
  const auto& t = rows.at(Condition::kT);
  const auto& tf = rows.at(Condition::kTF);

  const double tan_base = median_of(base, [](const ResultRow& r) { return r.chart.tangent; });
  const double tan_t = median_of(t, [](const ResultRow& r) { return r.chart.tangent; });
  report(all_ok(base) && all_ok(t) && tan_t <= tan_base / 3.0, "rotation: T tangent <= 1/3 baseline",
         fmt("median T %.3e vs baseline %.3e (ratio %.3f)", tan_t, tan_base, tan_t / tan_base));

  const double eb_base = median_of(base, [](const ResultRow& r) { return r.coefficients.e_b; });
  const double eb_tf = median_of(tf, [](const ResultRow& r) { return r.coefficients.e_b; });
  report(all_ok(tf) && eb_tf < eb_base, "rotation: T+F E_b < baseline",
         fmt("median T+F %.3f vs baseline %.3f", eb_tf, eb_base));

  int wins = 0;
  std::string per_seed;
  for (std::size_t i = 0; i < tf.size(); ++i) {
    const double a = tf[i].radial.relative_error;
    const double b = base[i].radial.relative_error;
    if (tf[i].radial.valid && base[i].radial.valid && a < b) ++wins;
    per_seed += fmt(" s%.0f %.3f/%.3f", static_cast<double>(tf[i].seed), a, b);
  }
  report(wins >= 2, "rotation: radial MFPT T+F < baseline",
         std::to_string(wins) + "/3 seeds (T+F/baseline rel. err.:" + per_seed + ")");

  sigma_min_line("rotation: sigma_min(Dphi) on T+F models", tf);
}

void mueller_brown() {
  const MuellerBrownSde mb;
  const WellSet wells;
  double worst = 0.0;
  for (const auto& c : wells.centers) worst = std::max(worst, norm(mb.gradient(Vector{c[0], c[1]})));
  report(worst <= 1e-2, "MB well-center gradients", fmt("max |grad V| %.2e (<= 1e-2)", worst));

  ExperimentConfig cfg = ExperimentConfig::defaults(DynamicsKind::kMuellerBrown);
  cfg.surface = SurfaceKind::kParaboloid;
  cfg.k_f = 4;
  cfg.n_landmarks = 200;
  cfg.stage1_epochs = 1000;
  cfg.stage2_epochs = 750;
  cfg.stage3_epochs = 750;
  cfg.n_traj = 500;
  cfg.simulate = false;
  cfg.conditions = {Condition::kTF};
  cfg.seeds = {0, 1, 2};
  std::printf("      mueller_brown / paraboloid / D=%zu / N=%zu, 1000/750/750 epochs, seeds 0-2\n",
              cfg.ambient_dim(), cfg.n_landmarks);
  const Rows rows = run_all(cfg, "mueller_brown");
  const auto& tf = rows.at(Condition::kTF);
  const double tan = median_of(tf, [](const ResultRow& r) { return r.chart.tangent; });
  const double e = median_of(tf, [](const ResultRow& r) { return r.chart.fidelity; });
  report(all_ok(tf) && tan < 1e-2 && e < 1e-1, "MB reduced budget: T+F tangent and E",
         fmt("median tangent %.3e (< 1e-2), median E %.3e (< 1e-1)", tan, e));
  sigma_min_line("MB: sigma_min(Dphi) on T+F models", tf);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> sections(argv + 1, argv + argc);
  if (sections.empty()) sections = {"identities", "rotation", "mueller_brown"};
  for (const std::string& s : sections) {
    if (s == "identities") identities();
    else if (s == "rotation") rotation();
    else if (s == "mueller_brown") mueller_brown();
    else {
      std::fprintf(stderr, "unknown section %s\n", s.c_str());
      return 2;
    }
  }
  std::printf("%d failure(s)\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
