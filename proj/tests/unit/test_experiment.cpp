#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "geosde/experiment.hpp"

using namespace geosde;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg = ExperimentConfig::defaults(DynamicsKind::kRotation);
  cfg.k_f = 1;
  cfg.n_landmarks = 12;
  cfg.stage1_epochs = 5;
  cfg.stage2_epochs = 5;
  cfg.stage3_epochs = 5;
  cfg.chart_width = 8;
  cfg.drift_hidden = {8};
  cfg.diffusion_hidden = {8};
  cfg.n_test = 20;
  cfg.n_eval = 20;
  cfg.extrapolation_points = 20;
  cfg.sigma_min_grid = 5;
  cfg.n_traj = 10;
  cfg.horizon = 0.2;
  cfg.seeds = {0};
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("geosde_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config defaults per dynamics") {
  const auto rot = ExperimentConfig::defaults(DynamicsKind::kRotation);
  CHECK(rot.n_landmarks == 50);
  CHECK(rot.stage1_epochs == 500);
  CHECK(rot.ambient_dim() == 11);
  CHECK(rot.domain_half_width() == 1.0);
  const auto mb = ExperimentConfig::defaults(DynamicsKind::kMuellerBrown);
  CHECK(mb.n_landmarks == 200);
  CHECK(mb.stage1_epochs == 4000);
  CHECK(mb.stage2_epochs == 3000);
  CHECK(mb.drift_hidden == std::vector<std::size_t>{256, 256, 256});
  CHECK(mb.domain_half_width() == 0.55);
  CHECK(mb.box_hi == 1.0);
}

TEST_CASE("config text round trip") {
  ExperimentConfig cfg = tiny_config();
  cfg.conditions = {Condition::kBaseline, Condition::kTF, Condition::kAtlas};
  cfg.lambda_c = 0.125;
  cfg.extrapolation_deltas = {0.1, 0.3};
  cfg.out_dir = "some/dir";
  CHECK(parse_config(serialize_config(cfg)) == cfg);
  CHECK(config_from_map(config_to_map(cfg)) == cfg);
}

TEST_CASE("config parsing") {
  const auto cfg = parse_config("# comment\nseeds = 0-3\ncondition = baseline, T+F\n  k_f = 100  \n");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(cfg.conditions == std::vector<Condition>{Condition::kBaseline, Condition::kTF});
  CHECK(cfg.ambient_dim() == 203);
  CHECK_THROWS_AS(parse_config("no_such_key = 1\n"), std::invalid_argument);
  CHECK_THROWS(parse_config("stage1_epochs = many\n"));
  CHECK_THROWS(parse_config("just a line\n"));
  // MB defaults apply before explicit keys.
  const auto mb = parse_config("dynamics = mueller_brown\nstage1_epochs = 1000\n");
  CHECK(mb.stage1_epochs == 1000);
  CHECK(mb.stage2_epochs == 3000);
}

TEST_CASE("format_double") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("result columns") {
  const std::vector<double> deltas{0.05, 0.1};
  const auto cols = result_columns(deltas);
  CHECK(cols.front() == "schema");
  CHECK(std::find(cols.begin(), cols.end(), "extrap_0.05") != cols.end());
  ResultRow row;
  row.extrapolation = {1.0, 2.0};
  const auto cells = result_cells(row);
  CHECK(cells.size() == cols.size());
  CHECK(cells.front() == kSchemaVersion);
}

TEST_CASE("runs are deterministic") {
  const ExperimentConfig cfg = tiny_config();
  const RunOutput a = run_single(cfg, Condition::kTF, 3);
  const RunOutput b = run_single(cfg, Condition::kTF, 3);
  CHECK(a.row.status == "ok");
  CHECK(result_cells(a.row) == result_cells(b.row));
  CHECK(a.losses.size() == b.losses.size());
  CHECK(std::isfinite(a.row.chart.tangent));
  CHECK(std::isfinite(a.row.radial.relative_error));
  const RunOutput c = run_single(cfg, Condition::kTF, 4);
  CHECK(result_cells(a.row) != result_cells(c.row));
}

TEST_CASE("baseline ignores configured penalty weights") {
  ExperimentConfig cfg = tiny_config();
  const RunOutput a = run_single(cfg, Condition::kBaseline, 1);
  cfg.lambda_t = 7.0;
  cfg.lambda_f = 3.0;
  const RunOutput b = run_single(cfg, Condition::kBaseline, 1);
  CHECK(a.row.chart.tangent == b.row.chart.tangent);
  CHECK(a.row.stage1_loss == b.row.stage1_loss);
}

TEST_CASE("atlas rows leave learned-only fields empty") {
  const RunOutput r = run_single(tiny_config(), Condition::kAtlas, 0);
  CHECK(r.row.status == "ok");
  CHECK(std::isnan(r.row.coefficients.e_sigma));
  for (double e : r.row.extrapolation) CHECK(std::isnan(e));
}

TEST_CASE("sweep outputs") {
  ExperimentConfig cfg = tiny_config();
  cfg.conditions = {Condition::kBaseline, Condition::kTF};
  cfg.seeds = {0, 1};
  cfg.jobs = 2;
  cfg.out_dir = scratch("sweep").string();
  const auto rows = run_experiment(cfg);
  CHECK(rows.size() == 4);
  const std::string csv = slurp(fs::path(cfg.out_dir) / "results.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(csv.rfind("schema,", 0) == 0);
  CHECK(fs::exists(fs::path(cfg.out_dir) / "losses.csv"));
  const auto sweep = nlohmann::json::parse(slurp(fs::path(cfg.out_dir) / "sweep.json"));
  CHECK(sweep.contains("config"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "runs" / "paraboloid_rotation_kf1_TF_s1.json"));

  // Rows are identical whatever the worker count.
  ExperimentConfig serial = cfg;
  serial.jobs = 1;
  serial.out_dir = scratch("serial").string();
  run_experiment(serial);
  auto lines = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string l; std::getline(ss, l);) out.push_back(l);
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(lines(csv) == lines(slurp(fs::path(serial.out_dir) / "results.csv")));
  fs::remove_all(cfg.out_dir);
  fs::remove_all(serial.out_dir);
}

TEST_CASE("csv writer refuses a mismatched header") {
  const fs::path dir = scratch("csv");
  const std::string file = (dir / "x.csv").string();
  {
    CsvWriter w(file, {"a", "b"});
    w.write({"1", "2"});
    CHECK_THROWS(w.write({"1"}));
  }
  { CsvWriter again(file, {"a", "b"}); }
  CHECK_THROWS(CsvWriter(file, {"a", "c"}));
  CHECK(slurp(file) == "a,b\n1,2\n");
  fs::remove_all(dir);
}

TEST_CASE("landmarks and ground truth helpers") {
  const ExperimentConfig cfg = tiny_config();
  const auto net = experiment_landmarks(cfg, 0);
  CHECK(net.points.size() >= 10);
  const auto gt = experiment_ground_truth(cfg, 0, false);
  CHECK(gt.summaries.size() == cfg.n_traj);
  CHECK(make_true_chart(cfg, 0).ambient_dim() == 5);
  CHECK_FALSE(git_revision().empty());
}
