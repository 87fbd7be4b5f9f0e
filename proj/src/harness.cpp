#include "velcd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <thread>

#include <json.hpp>

#include "velcd/error.hpp"
#include "velcd/format.hpp"
#include "velcd/stats.hpp"

namespace velcd {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

double compute_audrc(std::vector<AudrcRow> rows, bool weighted) {
  if (rows.empty()) fail(ErrorCode::EmptyInput, "AUDRC needs at least one row");
  std::stable_sort(rows.begin(), rows.end(), [](const AudrcRow& a, const AudrcRow& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.id < b.id;
  });
  double hit = 0, total = 0, sum = 0;
  for (const auto& r : rows) {
    const double w = weighted ? r.weight : 1.0;
    require(w >= 0.0 && std::isfinite(w), "row weights must be finite and non-negative");
    hit += r.correct ? w : 0.0;
    total += w;
    sum += total > 0 ? hit / total : 0.0;
  }
  return sum / static_cast<double>(rows.size());
}

void validate(const RunConfig& c) {
  validate(c.gof);
  require(c.workers >= 1, "workers must be >= 1");
  require(c.preprocess.trim_fraction >= 0.0 && c.preprocess.trim_fraction < 0.5,
          "trim fraction must lie in [0, 0.5)");
  require(!c.preprocess.subsample_to || *c.preprocess.subsample_to >= 2,
          "subsample size must be >= 2");
}

namespace {

template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) fn(i);
    });
  for (auto& t : pool) t.join();
}

EstimatorSpec estimator_for(const RunConfig& c, const MechanismOracle* oracle, std::uint64_t seed) {
  switch (c.estimator) {
    case ScoreSource::Stein: return EstimatorSpec::stein();
    case ScoreSource::Kde: return EstimatorSpec::kde();
    case ScoreSource::Analytic: {
      if (!oracle) fail(ErrorCode::NonInvertibleMechanism, "ANALYTIC scores need a generated Gaussian-noise dataset");
      AnalyticConfig a = c.analytic;
      a.seed = derive_seed(seed, 3);
      return EstimatorSpec::analytic_with(*oracle, a);
    }
  }
  return {};
}

}  // namespace

ResultRow run_one(const DataPair& pair, const RunConfig& config, std::size_t index,
                  const MechanismOracle* oracle) {
  ResultRow row;
  row.id = pair.id.empty() ? "dataset-" + std::to_string(index) : pair.id;
  row.truth = pair.truth;
  row.weight = pair.weight;
  const std::uint64_t seed = derive_seed(config.seed, index);
  try {
    PreprocessConfig pre = config.preprocess;
    pre.rng_seed = derive_seed(seed, 1);
    const PreparedData data = prepare(pair, estimator_for(config, oracle, seed), pre);
    const FitResult fit = discover_prepared(data, config.family, config.gof, derive_seed(seed, 2));
    row.decision = fit.decision;
    row.confidence = fit.confidence;
    row.loss_xy = fit.loss_xy;
    row.loss_yx = fit.loss_yx;
    row.tie = fit.tie;
    row.low_confidence = fit.low_confidence;
    row.n_used = fit.n_used;
  } catch (const Error& e) {
    row.error = e.what();
  } catch (const std::exception& e) {
    row.error = std::string("internal: ") + e.what();
  }
  return row;
}

MetricsReport aggregate(std::vector<ResultRow> rows, bool weighted) {
  MetricsReport rep;
  rep.weighted = weighted;
  rep.n_datasets = rows.size();
  std::vector<AudrcRow> scored;
  double hit = 0, whit = 0, wsum = 0;
  for (const auto& r : rows) {
    if (!r.ok()) {
      ++rep.n_errors;
      continue;
    }
    if (!r.truth) continue;
    const bool correct = r.decision == *r.truth;
    scored.push_back({correct, r.confidence, r.weight, r.id});
    hit += correct;
    whit += correct ? r.weight : 0.0;
    wsum += r.weight;
  }
  rep.n_scored = scored.size();
  if (!scored.empty()) {
    rep.accuracy = hit / static_cast<double>(scored.size());
    rep.weighted_accuracy = wsum > 0 ? whit / wsum : 0.0;
    rep.audrc = compute_audrc(scored, weighted);
  }
  rep.rows = std::move(rows);
  return rep;
}

MetricsReport run_benchmark(const BenchmarkSpec& spec, const RunConfig& config) {
  validate(spec);
  validate(config);
  if (config.estimator == ScoreSource::Analytic)
    require(has_gaussian_oracle(spec.family), "ANALYTIC scores need anm-gauss or lsnm-gauss data");
  std::vector<ResultRow> rows(spec.n_datasets);
  parallel_for(spec.n_datasets, config.workers, [&](std::size_t i) {
    try {
      const SyntheticDataset ds = generate_synthetic(spec, i);
      rows[i] = run_one(ds.pair, config, i, ds.mechanism.get());
    } catch (const Error& e) {
      rows[i].id = std::string(to_string(spec.family)) + "-" + std::to_string(i);
      rows[i].error = e.what();
    }
  });
  return aggregate(std::move(rows), config.weighted);
}

MetricsReport run_benchmark(const std::vector<DataPair>& data, const RunConfig& config) {
  validate(config);
  require(config.estimator != ScoreSource::Analytic, "ANALYTIC scores need generated data");
  std::vector<ResultRow> rows(data.size());
  parallel_for(data.size(), config.workers,
               [&](std::size_t i) { rows[i] = run_one(data[i], config, i); });
  return aggregate(std::move(rows), config.weighted);
}

namespace {

ojson config_json(const RunConfig& c) {
  ojson j;
  j["estimator"] = to_string(c.estimator);
  j["family"] = display_name(c.family);
  j["seed"] = c.seed;
  j["iters"] = c.gof.max_iters;
  j["lr"] = c.gof.base_lr;
  j["penalty_weight"] = c.gof.penalty_weight;
  j["trim"] = c.preprocess.trim_fraction;
  if (c.preprocess.subsample_to) j["subsample_to"] = *c.preprocess.subsample_to;
  else j["subsample_to"] = nullptr;
  j["standardize"] = c.preprocess.standardize;
  j["weighted"] = c.weighted;
  return j;
}

}  // namespace

std::string to_json(const MetricsReport& r, const RunConfig& config) {
  ojson j;
  j["config"] = config_json(config);
  j["accuracy"] = r.accuracy;
  j["weighted_accuracy"] = r.weighted_accuracy;
  j["audrc"] = r.audrc;
  j["weighted"] = r.weighted;
  j["n_datasets"] = r.n_datasets;
  j["n_scored"] = r.n_scored;
  j["n_errors"] = r.n_errors;
  ojson rows = ojson::array();
  for (const auto& row : r.rows) {
    ojson o;
    o["id"] = row.id;
    o["truth"] = row.truth ? ojson(to_string(*row.truth)) : ojson(nullptr);
    if (row.ok()) {
      o["decision"] = to_string(row.decision);
      o["confidence"] = row.confidence;
      o["loss_xy"] = row.loss_xy;
      o["loss_yx"] = row.loss_yx;
      o["tie"] = row.tie;
      o["low_confidence"] = row.low_confidence;
      o["n_used"] = row.n_used;
    } else {
      o["error"] = row.error;
    }
    o["weight"] = row.weight;
    rows.push_back(std::move(o));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

}  // namespace

void write_results_csv(const MetricsReport& r, const fs::path& path) {
  auto out = open_out(path);
  out << "id,truth,decision,confidence,loss_xy,loss_yx,weight,tie,low_confidence,n_used,error\n";
  for (const auto& row : r.rows) {
    out << csv_field(row.id) << ',' << (row.truth ? to_string(*row.truth) : "") << ',';
    if (row.ok())
      out << to_string(row.decision) << ',' << fmt17(row.confidence) << ',' << fmt17(row.loss_xy)
          << ',' << fmt17(row.loss_yx);
    else
      out << ",,,";
    out << ',' << fmt17(row.weight) << ',' << (row.ok() ? (row.tie ? "1" : "0") : "") << ','
        << (row.ok() ? (row.low_confidence ? "1" : "0") : "") << ','
        << (row.ok() ? std::to_string(row.n_used) : "") << ',' << csv_field(row.error) << '\n';
  }
}

void write_report(const MetricsReport& r, const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  open_out(dir / "report.json") << to_json(r, config);
  write_results_csv(r, dir / "results.csv");
}

std::vector<std::string> write_benchmark(const BenchmarkSpec& spec, const fs::path& dir,
                                         std::size_t workers) {
  validate(spec);
  fs::create_directories(dir);
  std::vector<DataPair> pairs(spec.n_datasets);
  std::vector<std::string> errors(spec.n_datasets);
  parallel_for(spec.n_datasets, workers, [&](std::size_t i) {
    try {
      pairs[i] = generate_dataset(spec, i);
      write_pair(pairs[i], dir / (pairs[i].id + ".csv"));
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) fail(ErrorCode::IntegrationFailure, "dataset " + std::to_string(i) + ": " + errors[i]);

  ojson m;
  m["family"] = to_string(spec.family);
  m["n_datasets"] = spec.n_datasets;
  m["n"] = spec.n;
  m["sigma_theta"] = spec.sigma_theta;
  m["sigma_y"] = spec.sigma_y;
  m["master_seed"] = spec.master_seed;
  ojson list = ojson::array();
  std::vector<std::string> ids;
  for (const auto& p : pairs) {
    ojson d;
    d["id"] = p.id;
    d["file"] = p.id + ".csv";
    d["seed"] = p.seed.value_or(0);
    d["truth"] = to_string(p.truth.value_or(Direction::XtoY));
    list.push_back(std::move(d));
    ids.push_back(p.id);
  }
  m["datasets"] = std::move(list);
  open_out(dir / "manifest.json") << m.dump(2) << "\n";
  return ids;
}

std::vector<DataPair> load_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    ojson m;
    try {
      m = ojson::parse(in);
      for (const auto& d : m.at("datasets")) files.push_back(dir / d.at("file").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, manifest.string() + ": " + e.what());
    }
  } else {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) fail(ErrorCode::EmptyInput, "no datasets in " + dir.string());
  std::vector<DataPair> out;
  for (const auto& f : files) out.push_back(read_pair(f));
  return out;
}

// ---- score evaluation

namespace {

double mse(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && !a.empty(), "score fields differ in length");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

ScoreMse score_mse(const ScorePair& est, const ScorePair& ora) {
  return {mse(est.forward.sx_marg, ora.forward.sx_marg),
          mse(est.forward.sx_joint, ora.forward.sx_joint),
          mse(est.forward.sy_joint, ora.forward.sy_joint),
          mse(est.reverse.sx_marg, ora.reverse.sx_marg)};
}

std::vector<ScoreEvalRow> score_eval(const ScoreEvalConfig& c) {
  require(has_gaussian_oracle(c.family), "score evaluation needs anm-gauss or lsnm-gauss");
  require(c.seeds >= 1, "need at least one seed");
  std::vector<ScoreEvalRow> out;
  for (std::size_t n : c.ns) {
    BenchmarkSpec spec = BenchmarkSpec::defaults(c.family);
    spec.n = n;
    spec.n_datasets = c.seeds;
    spec.master_seed = c.master_seed;
    // per dataset, per estimator
    std::vector<std::vector<ScoreMse>> res(c.seeds, std::vector<ScoreMse>(c.estimators.size()));
    parallel_for(c.seeds, c.workers, [&](std::size_t i) {
      const SyntheticDataset ds = generate_gaussian_oracle(spec, i);
      AnalyticConfig a = c.analytic;
      a.seed = derive_seed(*ds.pair.seed, 3);
      const ScorePair oracle = analytic_gaussian_scores(ds.pair, *ds.mechanism, a);
      for (std::size_t e = 0; e < c.estimators.size(); ++e) {
        ScorePair est;
        switch (c.estimators[e]) {
          case ScoreSource::Stein: est = stein_score_pair(ds.pair); break;
          case ScoreSource::Kde: est = kde_score_pair(ds.pair); break;
          case ScoreSource::Analytic: est = oracle; break;
        }
        res[i][e] = score_mse(est, oracle);
      }
    });
    for (std::size_t e = 0; e < c.estimators.size(); ++e) {
      auto column = [&](double ScoreMse::*field) {
        std::vector<double> v;
        for (const auto& r : res) v.push_back(r[e].*field);
        return v;
      };
      const auto cm = column(&ScoreMse::cause_marg), jx = column(&ScoreMse::joint_x),
                 jy = column(&ScoreMse::joint_y), em = column(&ScoreMse::effect_marg);
      for (auto [name, p] : {std::pair{"median", 0.5}, {"q1", 0.25}, {"q3", 0.75}}) {
        ScoreEvalRow row;
        row.n = n;
        row.estimator = c.estimators[e];
        row.statistic = name;
        row.mse = {quantile(cm, p), quantile(jx, p), quantile(jy, p), quantile(em, p)};
        out.push_back(row);
      }
    }
  }
  return out;
}

void write_score_eval_csv(const std::vector<ScoreEvalRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  out << "n,estimator,statistic,mse_cause_marg,mse_joint_x,mse_joint_y,mse_effect_marg\n";
  for (const auto& r : rows)
    out << r.n << ',' << to_string(r.estimator) << ',' << r.statistic << ','
        << fmt17(r.mse.cause_marg) << ',' << fmt17(r.mse.joint_x) << ',' << fmt17(r.mse.joint_y)
        << ',' << fmt17(r.mse.effect_marg) << '\n';
}

// ---- curves

std::vector<CurvePoint> compute_curves(const PreparedData& data, const FitResult& fit,
                                       std::size_t n_curves, std::size_t grid_points,
                                       const IntegratorConfig& integrator) {
  require(n_curves >= 1, "need at least one curve");
  require(grid_points >= 2, "need at least two grid points");
  const bool xy = fit.decision == Direction::XtoY;
  const VelocityFn v = as_function(xy ? fit.model_xy : fit.model_yx);
  const std::vector<double>& cause = xy ? data.pair.xs : data.pair.ys;
  const std::vector<double>& effect = xy ? data.pair.ys : data.pair.xs;
  const Affine& a = data.affine;
  const double c_mean = xy ? a.mean_x : a.mean_y, c_sd = xy ? a.sd_x : a.sd_y;
  const double e_mean = xy ? a.mean_y : a.mean_x, e_sd = xy ? a.sd_y : a.sd_x;

  std::vector<std::size_t> order(cause.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return cause[i] < cause[j]; });
  const double lo = cause[order.front()], hi = cause[order.back()];
  std::vector<double> grid(grid_points);
  for (std::size_t k = 0; k < grid_points; ++k)
    grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid_points - 1);

  std::vector<CurvePoint> out;
  for (std::size_t c = 0; c < n_curves; ++c) {
    const double q = (static_cast<double>(c) + 0.5) / static_cast<double>(n_curves);
    const std::size_t i = order[std::min(order.size() - 1, static_cast<std::size_t>(q * static_cast<double>(order.size())))];
    for (const auto& [u, w] : causal_curve(v, effect[i], cause[i], grid, integrator)) {
      const double cu = c_mean + c_sd * u, ew = e_mean + e_sd * w;
      out.push_back({c, xy ? cu : ew, xy ? ew : cu});
    }
  }
  return out;
}

void write_curves_csv(const std::vector<CurvePoint>& points, const fs::path& path) {
  auto out = open_out(path);
  out << "curve_id,x,y\n";
  for (const auto& p : points) out << p.curve_id << ',' << fmt17(p.x) << ',' << fmt17(p.y) << '\n';
}

}  // namespace velcd
