#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "velcd/error.hpp"
#include "velcd/harness.hpp"

using namespace velcd;
namespace fs = std::filesystem;

namespace {

AudrcRow row(bool correct, double conf, std::string id, double weight = 1.0) {
  return AudrcRow{correct, conf, weight, std::move(id)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunConfig quick_config() {
  RunConfig c;
  c.family = Family::VAnm;
  c.gof.arch = VelocityArch{{16, 16}};
  c.gof.max_iters = 200;
  return c;
}

}  // namespace

TEST_CASE("AUDRC hand-enumerated examples") {
  CHECK(compute_audrc({row(true, 0.3, "a"), row(true, 0.1, "b"), row(true, 0.9, "c")}) == 1.0);
  CHECK(compute_audrc({row(true, 2.0, "a"), row(false, 1.0, "b")}) == 0.75);
  CHECK(compute_audrc({row(false, 2.0, "a"), row(true, 1.0, "b")}) == 0.25);
  try {
    compute_audrc({});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyInput);
  }
}

TEST_CASE("AUDRC depends only on the confidence ordering") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<AudrcRow> rows, mapped;
  for (int i = 0; i < 40; ++i) {
    const double c = u(rng);
    rows.push_back(row(u(rng) < 0.6, c, "d" + std::to_string(i)));
    mapped.push_back(row(rows.back().correct, std::exp(3 * c) - 7, rows.back().id));
  }
  CHECK(compute_audrc(rows) == compute_audrc(mapped));
}

TEST_CASE("AUDRC with constant confidence follows id order") {
  std::vector<AudrcRow> rows{row(false, 1, "c"), row(true, 1, "a"), row(true, 1, "b")};
  // Order a, b, c: prefix accuracies 1, 1, 2/3.
  CHECK(compute_audrc(rows) == doctest::Approx((1 + 1 + 2.0 / 3.0) / 3));
}

TEST_CASE("weighted AUDRC") {
  std::vector<AudrcRow> rows{row(true, 2, "a", 3.0), row(false, 1, "b", 1.0)};
  CHECK(compute_audrc(rows, true) == doctest::Approx((1.0 + 0.75) / 2));
  CHECK(compute_audrc(rows, false) == 0.75);
}

TEST_CASE("single dataset benchmark") {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::AnmGauss);
  spec.n = 100;
  spec.n_datasets = 1;
  RunConfig cfg = quick_config();
  cfg.estimator = ScoreSource::Analytic;
  const MetricsReport r = run_benchmark(spec, cfg);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].ok());
  CHECK(r.rows[0].decision == Direction::XtoY);
  CHECK(r.accuracy == 1.0);
  CHECK(r.audrc == 1.0);
}

TEST_CASE("failed datasets are excluded from the metrics") {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::AnmGauss);
  spec.n = 80;
  std::vector<DataPair> data;
  for (std::size_t i = 0; i < 5; ++i) data.push_back(generate_dataset(spec, i));
  std::fill(data[2].ys.begin(), data[2].ys.end(), 1.0);
  const MetricsReport r = run_benchmark(data, quick_config());
  CHECK(r.n_datasets == 5);
  CHECK(r.n_errors == 1);
  CHECK(r.n_scored == 4);
  CHECK_FALSE(r.rows[2].ok());
  CHECK(r.rows[2].error.find("DegenerateVariance") != std::string::npos);
  CHECK(r.excessive_failures());
  int correct = 0;
  for (const auto& row : r.rows)
    if (row.ok() && row.truth == row.decision) ++correct;
  CHECK(r.accuracy == doctest::Approx(correct / 4.0));
}

TEST_CASE("analytic scores identify ANM-Gauss pairs") {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::AnmGauss);
  spec.n = 100;
  spec.n_datasets = 20;
  RunConfig cfg = quick_config();
  cfg.estimator = ScoreSource::Analytic;
  const MetricsReport r = run_benchmark(spec, cfg);
  CHECK(r.n_errors == 0);
  CHECK(r.accuracy == 1.0);
}

TEST_CASE("reports do not depend on the worker count") {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::Lsnm);
  spec.n = 120;
  spec.n_datasets = 6;
  spec.master_seed = 9;
  RunConfig cfg = quick_config();
  cfg.family = Family::VNn;
  cfg.gof.max_iters = 60;
  cfg.workers = 1;
  const std::string one = to_json(run_benchmark(spec, cfg), cfg);
  cfg.workers = 8;
  const std::string eight = to_json(run_benchmark(spec, cfg), cfg);
  CHECK(one == eight);
}

TEST_CASE("report files") {
  const fs::path dir = fs::temp_directory_path() / "velcd_test_report";
  fs::remove_all(dir);
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::AnmGauss);
  spec.n = 60;
  spec.n_datasets = 2;
  RunConfig cfg = quick_config();
  cfg.gof.max_iters = 20;
  const MetricsReport r = run_benchmark(spec, cfg);
  write_report(r, cfg, dir);
  const std::string json = slurp(dir / "report.json");
  CHECK(json.find("\"audrc\"") != std::string::npos);
  CHECK(json.find("\"workers\"") == std::string::npos);
  const std::string csv = slurp(dir / "results.csv");
  CHECK(csv.rfind("id,truth,decision,confidence,loss_xy,loss_yx", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("benchmark directories round trip") {
  const fs::path dir = fs::temp_directory_path() / "velcd_test_bench";
  fs::remove_all(dir);
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::Sigmoid);
  spec.n = 50;
  spec.n_datasets = 3;
  const auto ids = write_benchmark(spec, dir);
  CHECK(ids.size() == 3);
  CHECK(fs::exists(dir / "manifest.json"));
  const auto loaded = load_directory(dir);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const DataPair p = generate_dataset(spec, i);
    CHECK(loaded[i].id == ids[i]);
    CHECK(loaded[i].xs == p.xs);
    CHECK(loaded[i].ys == p.ys);
    CHECK(loaded[i].truth == Direction::XtoY);
  }
}

TEST_CASE("score evaluation") {
  ScoreEvalConfig cfg;
  cfg.ns = {60};
  cfg.seeds = 3;
  cfg.estimators = {ScoreSource::Analytic, ScoreSource::Stein, ScoreSource::Kde};
  cfg.analytic.mc_draws = 2000;
  const auto rows = score_eval(cfg);
  CHECK(rows.size() == 9);
  for (const auto& r : rows) {
    if (r.estimator == ScoreSource::Analytic) {
      CHECK(r.mse.cause_marg == 0.0);
      CHECK(r.mse.joint_x == 0.0);
      CHECK(r.mse.joint_y == 0.0);
      CHECK(r.mse.effect_marg == 0.0);
    } else {
      CHECK(r.mse.cause_marg > 0.0);
    }
  }
  const fs::path p = fs::temp_directory_path() / "velcd_test_scores_eval.csv";
  write_score_eval_csv(rows, p);
  CHECK(slurp(p).rfind("n,estimator,statistic,mse_cause_marg,mse_joint_x,mse_joint_y,mse_effect_marg", 0) == 0);
}

TEST_CASE("curves follow the fitted velocity") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0, 1);
  DataPair p;
  for (int i = 0; i < 200; ++i) {
    const double x = z(rng);
    p.xs.push_back(3 * x + 1);
    p.ys.push_back(2 * x + 0.5 * z(rng));
  }
  const PreparedData data = prepare(p, EstimatorSpec::stein(), {});
  FitResult fit = discover_prepared(data, Family::BLin, {}, 0);
  // Force a constant slope of 0.5 in standardized units.
  fit.decision = Direction::XtoY;
  fit.model_xy.theta = {0.5, 0, 0};
  const auto pts = compute_curves(data, fit, 3, 11);
  CHECK(pts.size() == 33);
  const double ratio = data.affine.sd_y / data.affine.sd_x;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (pts[k].curve_id != pts[k - 1].curve_id) continue;
    CHECK((pts[k].y - pts[k - 1].y) / (pts[k].x - pts[k - 1].x) == doctest::Approx(0.5 * ratio));
  }
}
