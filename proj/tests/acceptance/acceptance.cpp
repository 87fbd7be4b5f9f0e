// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "velcd/error.hpp"
#include "velcd/flow.hpp"
#include "velcd/harness.hpp"

using namespace velcd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Analytic scores, V-ANM, 20 ANM-Gauss datasets of 100 points.
Outcome oracle_certainty() {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::AnmGauss);
  spec.n = 100;
  spec.n_datasets = 20;
  RunConfig cfg;
  cfg.estimator = ScoreSource::Analytic;
  cfg.family = Family::VAnm;
  const MetricsReport r = run_benchmark(spec, cfg);
  double min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& row : r.rows)
    if (row.ok()) min_ratio = std::min(min_ratio, row.loss_yx / row.loss_xy);
  const bool pass = r.n_errors == 0 && r.accuracy == 1.0 && min_ratio >= 10.0;
  return {pass, fmt("accuracy=%.3f min(loss_yx/loss_xy)=%.3g errors=%zu", r.accuracy, min_ratio,
                    r.n_errors)};
}

// 2. Oracle scores and the true velocity zero the residual.
Outcome continuity_identity() {
  double worst = 0;
  for (BenchFamily f : {BenchFamily::AnmGauss, BenchFamily::LsnmGauss}) {
    BenchmarkSpec spec = BenchmarkSpec::defaults(f);
    spec.n = 1000;
    for (std::size_t seed = 0; seed < 10; ++seed) {
      spec.master_seed = seed;
      const auto d = generate_gaussian_oracle(spec, 0);
      const ScoreField s = analytic_forward_scores(d.pair, *d.mechanism);
      for (std::size_t i = 0; i < d.pair.size(); ++i) {
        const double x = d.pair.xs[i], y = d.pair.ys[i];
        const double r = s.sx_marg[i] - d.mechanism->velocity_dy(y, x) -
                         (s.sx_joint[i] + d.mechanism->velocity(y, x) * s.sy_joint[i]);
        worst = std::max(worst, std::abs(r));
      }
    }
  }
  return {worst < 1e-6, fmt("max |residual|=%.3g", worst)};
}

// 3. Stein cause-marginal MSE bands at n = 100 and 1000.
Outcome stein_trend() {
  ScoreEvalConfig cfg;
  cfg.family = BenchFamily::AnmGauss;
  cfg.ns = {100, 1000};
  cfg.seeds = 20;
  cfg.estimators = {ScoreSource::Stein};
  double m100 = NAN, m1000 = NAN;
  for (const auto& row : score_eval(cfg)) {
    if (row.statistic != "median") continue;
    (row.n == 100 ? m100 : m1000) = row.mse.cause_marg;
  }
  const bool pass = m100 >= 0.15 && m100 <= 0.45 && m1000 >= 0.02 && m1000 <= 0.15 && m1000 < m100;
  return {pass, fmt("median MSE n=100: %.4f, n=1000: %.4f", m100, m1000)};
}

// 4. Stein scores, V-ANM, 50 ANM-Gauss datasets of 1000 points.
Outcome estimated_discovery() {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::AnmGauss);
  spec.n = 1000;
  spec.n_datasets = 50;
  RunConfig cfg;
  cfg.estimator = ScoreSource::Stein;
  cfg.family = Family::VAnm;
  const MetricsReport r = run_benchmark(spec, cfg);
  const bool pass = r.n_errors == 0 && r.accuracy >= 0.6 && r.audrc >= 0.7;
  return {pass, fmt("accuracy=%.3f audrc=%.3f errors=%zu", r.accuracy, r.audrc, r.n_errors)};
}

// 5. Integrated ANM and LSNM flows against their closed forms.
Outcome flow_oracles() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2, 2);
  double worst_anm = 0, worst_lsnm = 0, worst_prop = 0;
  for (BenchFamily f : {BenchFamily::AnmGauss, BenchFamily::LsnmGauss}) {
    BenchmarkSpec spec = BenchmarkSpec::defaults(f);
    spec.n = 2;
    for (std::size_t k = 0; k < 100; ++k) {
      const auto d = generate_gaussian_oracle(spec, k);  // a fresh theta per probe
      const MechanismOracle& m = *d.mechanism;
      const VelocityFn v = [&m](double y, double x) { return m.velocity(y, x); };
      const double y = u(rng), a = u(rng), b = u(rng), c = u(rng);
      const double flow = integrate_flow(v, y, a, b);
      if (f == BenchFamily::AnmGauss) {
        const auto& anm = dynamic_cast<const AnmMechanism&>(m);
        worst_anm = std::max(worst_anm, std::abs(flow - (y + anm.m(b) - anm.m(a))));
      } else {
        const auto& l = dynamic_cast<const LsnmMechanism&>(m);
        const auto pa = l.parts(a), pb = l.parts(b);
        // e^{h} is the scale s
        worst_lsnm = std::max(worst_lsnm, std::abs(flow - (pb.m + pb.s / pa.s * (y - pa.m))));
      }
      worst_prop = std::max(worst_prop, std::abs(integrate_flow(v, flow, b, c) - integrate_flow(v, y, a, c)));
      worst_prop = std::max(worst_prop, std::abs(integrate_flow(v, flow, b, a) - y));
    }
  }
  const bool pass = worst_anm < 1e-6 && worst_lsnm < 1e-6 && worst_prop < 1e-6;
  return {pass, fmt("max error ANM=%.3g LSNM=%.3g composition/inverse=%.3g", worst_anm, worst_lsnm,
                    worst_prop)};
}

// 6. Finite-difference checks of d/dtheta and d/dy for every family.
Outcome gradient_integrity() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2, 2);
  std::normal_distribution<double> z(0, 0.5);
  const double h = 1e-5, tol = 1e-4;
  auto close = [&](double a, double b) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)) + 1e-8;
  };
  int failures = 0, probes = 0;
  for (Family f : {Family::BLin, Family::BQuad, Family::BLinExp, Family::BQuadExp, Family::VAnm,
                   Family::VLsnm, Family::VNn}) {
    for (int k = 0; k < 100; ++k, ++probes) {
      VelocityModel m = make_model(f, {}, rng());
      if (is_basis(f))
        for (auto& t : m.theta) t = z(rng);
      const double x = u(rng), y = u(rng);
      const auto val = eval_velocity(m, y, x);
      const auto g = eval_velocity_grad(m, y, x);
      bool ok = close(val.dvdy, (eval_velocity(m, y + h, x).v - eval_velocity(m, y - h, x).v) / (2 * h));
      const auto j = std::uniform_int_distribution<std::size_t>(0, m.theta.size() - 1)(rng);
      const double t0 = m.theta[j];
      m.theta[j] = t0 + h;
      const auto up = eval_velocity(m, y, x);
      m.theta[j] = t0 - h;
      const auto dn = eval_velocity(m, y, x);
      m.theta[j] = t0;
      ok = ok && close(g.dv[j], (up.v - dn.v) / (2 * h));
      ok = ok && close(g.ddvdy[j], (up.dvdy - dn.dvdy) / (2 * h));
      if (!ok) ++failures;
    }
  }
  return {failures == 0, fmt("%d of %d probes failed", failures, probes)};
}

// 7. Jointly Gaussian linear data is flagged as low confidence.
Outcome non_identifiable() {
  double worst = 0;
  int flagged = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0, 1);
    const double beta = 0.5 + 0.15 * static_cast<double>(seed);
    DataPair p;
    for (int i = 0; i < 1000; ++i) {
      const double x = z(rng);
      p.xs.push_back(x);
      p.ys.push_back(beta * x + z(rng));
    }
    const LinearGaussianMechanism m(beta, 1.0);
    AnalyticConfig ac;
    ac.seed = seed;
    const FitResult r = discover(p, EstimatorSpec::analytic_with(m, ac), Family::BLin, {}, {}, seed);
    worst = std::max({worst, r.loss_xy, r.loss_yx});
    if (r.low_confidence) ++flagged;
  }
  return {worst < 1e-3 && flagged == 10, fmt("max loss=%.3g flagged=%d/10", worst, flagged)};
}

// 8. AUDRC examples.
Outcome audrc_examples() {
  const double all = compute_audrc({{true, 0.5, 1, "a"}, {true, 0.2, 1, "b"}, {true, 0.9, 1, "c"}});
  const double hi_right = compute_audrc({{true, 2, 1, "a"}, {false, 1, 1, "b"}});
  const double hi_wrong = compute_audrc({{false, 2, 1, "a"}, {true, 1, 1, "b"}});
  return {all == 1.0 && hi_right == 0.75 && hi_wrong == 0.25,
          fmt("%.17g / %.17g / %.17g", all, hi_right, hi_wrong)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// 9. report.json is byte-identical across worker counts.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "velcd_acceptance_determinism";
  fs::remove_all(root);
  struct Case {
    BenchFamily bench;
    ScoreSource est;
    Family fam;
  };
  int mismatches = 0, runs = 0;
  for (const Case& c : {Case{BenchFamily::AnmGauss, ScoreSource::Stein, Family::VAnm},
                        Case{BenchFamily::Lsnm, ScoreSource::Kde, Family::VNn},
                        Case{BenchFamily::Sigmoid, ScoreSource::Stein, Family::BQuadExp}}) {
    BenchmarkSpec spec = BenchmarkSpec::defaults(c.bench);
    spec.n = 300;
    spec.n_datasets = 6;
    spec.master_seed = 2024;
    RunConfig cfg;
    cfg.estimator = c.est;
    cfg.family = c.fam;
    cfg.gof.max_iters = 300;
    std::string first;
    for (std::size_t workers : {1, 3, 8}) {
      cfg.workers = workers;
      const fs::path dir = root / (std::to_string(runs++));
      write_report(run_benchmark(spec, cfg), cfg, dir);
      const std::string now = slurp(dir / "report.json");
      if (first.empty()) first = now;
      else if (now != first) ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%d of %d reruns differ", mismatches, runs - 3)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion all[] = {
      {1, "oracle-score certainty", oracle_certainty},
      {2, "continuity-identity zero", continuity_identity},
      {3, "Stein sample-size trend", stein_trend},
      {4, "estimated-score discovery", estimated_discovery},
      {5, "flow-oracle equivalence", flow_oracles},
      {6, "gradient integrity", gradient_integrity},
      {7, "non-identifiable flag", non_identifiable},
      {8, "AUDRC unit correctness", audrc_examples},
      {9, "determinism", determinism},
  };
  // Optional arguments select criteria by number.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
