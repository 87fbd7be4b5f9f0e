#include "velcd/velcd.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>

#include "velcd/error.hpp"
#include "velcd/harness.hpp"

using namespace velcd;
namespace fs = std::filesystem;

struct velcd_dataset {
  DataPair pair;
};

struct velcd_config {
  RunConfig run;
  std::optional<BenchFamily> bench_family;
  std::size_t datasets = 100;
  std::size_t n = 5000;
  std::optional<double> sigma_theta, sigma_y;
  std::string data_dir, tuebingen_dir, out;
  TuebingenFilter tuebingen_filter = TuebingenFilter::Standard;
  bool weighted_set = false;
  std::size_t curves = 10;
  std::size_t grid_points = 200;
  ScoreEvalConfig score;
};

struct velcd_fit {
  FitResult result;
};

namespace {

thread_local std::string g_last_error;

velcd_status status_of(ErrorCode c) { return static_cast<velcd_status>(static_cast<int>(c) + 1); }

template <class Fn>
velcd_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = std::string("internal: ") + e.what();
    return VELCD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal: unknown exception";
    return VELCD_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (...) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) fail(ErrorCode::InvalidArgument, key + ": not a number: '" + v + "'");
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    fail(ErrorCode::InvalidArgument, key + ": not a non-negative integer: '" + v + "'");
  try {
    return std::stoull(v);
  } catch (...) {
    fail(ErrorCode::InvalidArgument, key + ": out of range: '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail(ErrorCode::InvalidArgument, key + ": not a boolean: '" + v + "'");
}

ScoreSource to_source(const std::string& key, const std::string& v) {
  auto s = parse_score_source(v);
  if (!s) fail(ErrorCode::InvalidArgument, key + ": unknown estimator '" + v + "'");
  return *s;
}

template <class T, class Fn>
std::vector<T> split(const std::string& v, Fn&& conv) {
  std::vector<T> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(conv(item));
  return out;
}

void set_key(velcd_config& c, const std::string& key, const std::string& v) {
  if (key == "estimator") {
    c.run.estimator = to_source(key, v);
  } else if (key == "family") {
    auto f = parse_family(v);
    if (!f) fail(ErrorCode::InvalidArgument, "family: unknown velocity family '" + v + "'");
    c.run.family = *f;
  } else if (key == "seed") {
    c.run.seed = to_uint(key, v);
    c.score.master_seed = c.run.seed;
  } else if (key == "trim") {
    c.run.preprocess.trim_fraction = to_double(key, v);
  } else if (key == "subsample_to") {
    if (v == "none" || v.empty()) c.run.preprocess.subsample_to.reset();
    else c.run.preprocess.subsample_to = to_uint(key, v);
  } else if (key == "standardize") {
    c.run.preprocess.standardize = to_bool(key, v);
  } else if (key == "penalty_weight") {
    c.run.gof.penalty_weight = to_double(key, v);
  } else if (key == "lr") {
    c.run.gof.base_lr = to_double(key, v);
  } else if (key == "iters") {
    c.run.gof.max_iters = static_cast<int>(to_uint(key, v));
  } else if (key == "workers") {
    c.run.workers = to_uint(key, v);
    c.score.workers = c.run.workers;
  } else if (key == "weighted") {
    c.run.weighted = to_bool(key, v);
    c.weighted_set = true;
  } else if (key == "bench_family") {
    auto f = parse_bench_family(v);
    if (!f) fail(ErrorCode::InvalidArgument, "bench_family: unknown benchmark family '" + v + "'");
    c.bench_family = *f;
    c.score.family = *f;
  } else if (key == "datasets") {
    c.datasets = to_uint(key, v);
  } else if (key == "n") {
    c.n = to_uint(key, v);
  } else if (key == "sigma_theta") {
    c.sigma_theta = to_double(key, v);
  } else if (key == "sigma_y") {
    c.sigma_y = to_double(key, v);
  } else if (key == "data_dir") {
    c.data_dir = v;
  } else if (key == "tuebingen_dir") {
    c.tuebingen_dir = v;
  } else if (key == "tuebingen_filter") {
    if (v == "standard") c.tuebingen_filter = TuebingenFilter::Standard;
    else if (v == "continuous") c.tuebingen_filter = TuebingenFilter::ContinuousOnly;
    else fail(ErrorCode::InvalidArgument, "tuebingen_filter: expected standard or continuous");
  } else if (key == "out") {
    c.out = v;
  } else if (key == "curves") {
    c.curves = to_uint(key, v);
  } else if (key == "grid_points") {
    c.grid_points = to_uint(key, v);
  } else if (key == "score_ns") {
    c.score.ns = split<std::size_t>(v, [&](const std::string& s) { return to_uint(key, s); });
  } else if (key == "score_seeds") {
    c.score.seeds = to_uint(key, v);
  } else if (key == "score_estimators") {
    c.score.estimators = split<ScoreSource>(v, [&](const std::string& s) { return to_source(key, s); });
  } else {
    fail(ErrorCode::InvalidArgument, "unknown configuration key '" + key + "'");
  }
}

BenchmarkSpec bench_spec(const velcd_config& c) {
  require(c.bench_family.has_value(), "bench_family is not set");
  BenchmarkSpec s = BenchmarkSpec::defaults(*c.bench_family);
  s.n_datasets = c.datasets;
  s.n = c.n;
  if (c.sigma_theta) s.sigma_theta = *c.sigma_theta;
  if (c.sigma_y) s.sigma_y = *c.sigma_y;
  s.master_seed = c.run.seed;
  return s;
}

EstimatorSpec plain_estimator(ScoreSource s) {
  if (s == ScoreSource::Analytic)
    fail(ErrorCode::InvalidArgument, "ANALYTIC scores are available for generated benchmarks only");
  return s == ScoreSource::Kde ? EstimatorSpec::kde() : EstimatorSpec::stein();
}

}  // namespace

extern "C" {

const char* velcd_last_error(void) { return g_last_error.c_str(); }

const char* velcd_status_name(velcd_status s) {
  if (s == VELCD_OK) return "Ok";
  if (s == VELCD_ERR_INTERNAL) return "Internal";
  if (s >= 1 && s <= 18) return to_string(static_cast<ErrorCode>(s - 1));
  return "Unknown";
}

void velcd_string_free(char* s) { std::free(s); }

velcd_status velcd_dataset_create(const double* xs, const double* ys, size_t n, velcd_dataset** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    require(n == 0 || (xs && ys), "null data pointer");
    auto ds = std::make_unique<velcd_dataset>();
    ds->pair.xs.assign(xs, xs + n);
    ds->pair.ys.assign(ys, ys + n);
    validate(ds->pair);
    *out = ds.release();
    return VELCD_OK;
  });
}

velcd_status velcd_dataset_load_csv(const char* path, velcd_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    auto ds = std::make_unique<velcd_dataset>();
    ds->pair = read_pair(path);
    *out = ds.release();
    return VELCD_OK;
  });
}

velcd_status velcd_dataset_set_truth(velcd_dataset* ds, int truth) {
  return guarded([&] {
    require(ds != nullptr, "null dataset");
    require(truth >= -1 && truth <= 1, "truth must be -1, 0 or 1");
    if (truth == 0) ds->pair.truth.reset();
    else ds->pair.truth = truth > 0 ? Direction::XtoY : Direction::YtoX;
    return VELCD_OK;
  });
}

size_t velcd_dataset_size(const velcd_dataset* ds) { return ds ? ds->pair.size() : 0; }
void velcd_dataset_free(velcd_dataset* ds) { delete ds; }

velcd_status velcd_config_create(velcd_config** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new velcd_config();
    return VELCD_OK;
  });
}

velcd_status velcd_config_set(velcd_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "null argument");
    set_key(*cfg, key, value);
    return VELCD_OK;
  });
}

void velcd_config_free(velcd_config* cfg) { delete cfg; }

velcd_status velcd_discover(const velcd_dataset* ds, const velcd_config* cfg, velcd_fit** out) {
  return guarded([&] {
    require(ds && cfg && out, "null argument");
    validate(cfg->run);
    PreprocessConfig pre = cfg->run.preprocess;
    pre.rng_seed = derive_seed(cfg->run.seed, 1);
    auto fit = std::make_unique<velcd_fit>();
    fit->result = discover(ds->pair, plain_estimator(cfg->run.estimator), cfg->run.family,
                           cfg->run.gof, pre, derive_seed(cfg->run.seed, 2));
    *out = fit.release();
    return VELCD_OK;
  });
}

double velcd_fit_loss_xy(const velcd_fit* f) { return f ? f->result.loss_xy : NAN; }
double velcd_fit_loss_yx(const velcd_fit* f) { return f ? f->result.loss_yx : NAN; }
int velcd_fit_decision(const velcd_fit* f) {
  return f ? (f->result.decision == Direction::XtoY ? 1 : -1) : 0;
}
double velcd_fit_confidence(const velcd_fit* f) { return f ? f->result.confidence : NAN; }
int velcd_fit_low_confidence(const velcd_fit* f) { return f ? f->result.low_confidence : 0; }

velcd_status velcd_fit_to_json(const velcd_fit* f, int include_models, char** out) {
  return guarded([&] {
    require(f && out, "null argument");
    *out = dup_string(to_json(f->result, include_models != 0));
    return VELCD_OK;
  });
}

void velcd_fit_free(velcd_fit* f) { delete f; }

velcd_status velcd_benchmark_generate(const velcd_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    require(!cfg->out.empty(), "out directory is not set");
    write_benchmark(bench_spec(*cfg), cfg->out, cfg->run.workers);
    return VELCD_OK;
  });
}

velcd_status velcd_benchmark_run(const velcd_config* cfg, char** report_json) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    RunConfig run = cfg->run;
    MetricsReport rep;
    if (cfg->bench_family) {
      rep = run_benchmark(bench_spec(*cfg), run);
    } else if (!cfg->data_dir.empty()) {
      rep = run_benchmark(load_directory(cfg->data_dir), run);
    } else if (!cfg->tuebingen_dir.empty()) {
      if (!cfg->weighted_set) run.weighted = true;
      rep = run_benchmark(load_tuebingen(cfg->tuebingen_dir, cfg->tuebingen_filter), run);
    } else {
      fail(ErrorCode::InvalidArgument, "no benchmark source: set bench_family, data_dir or tuebingen_dir");
    }
    if (!cfg->out.empty()) write_report(rep, run, cfg->out);
    if (report_json) *report_json = dup_string(to_json(rep, run));
    if (rep.excessive_failures()) {
      g_last_error = std::to_string(rep.n_errors) + " of " + std::to_string(rep.n_datasets) +
                     " datasets failed";
      return VELCD_ERR_EXCESSIVE_FAILURES;
    }
    return VELCD_OK;
  });
}

velcd_status velcd_curves(const velcd_dataset* ds, const velcd_config* cfg) {
  return guarded([&] {
    require(ds && cfg, "null argument");
    require(!cfg->out.empty(), "out directory is not set");
    validate(cfg->run);
    PreprocessConfig pre = cfg->run.preprocess;
    pre.rng_seed = derive_seed(cfg->run.seed, 1);
    const PreparedData data = prepare(ds->pair, plain_estimator(cfg->run.estimator), pre);
    const FitResult fit =
        discover_prepared(data, cfg->run.family, cfg->run.gof, derive_seed(cfg->run.seed, 2));
    write_curves_csv(compute_curves(data, fit, cfg->curves, cfg->grid_points),
                     fs::path(cfg->out) / "curves.csv");
    return VELCD_OK;
  });
}

velcd_status velcd_score_eval(const velcd_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    require(!cfg->out.empty(), "out directory is not set");
    write_score_eval_csv(score_eval(cfg->score), fs::path(cfg->out) / "scores.csv");
    return VELCD_OK;
  });
}

velcd_status velcd_compute_audrc(const int* correct, const double* confidence,
                                 const double* weights, size_t n, double* out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    require(n == 0 || (correct && confidence), "null input arrays");
    std::vector<AudrcRow> rows(n);
    const int width = static_cast<int>(std::to_string(n).size());
    for (size_t i = 0; i < n; ++i) {
      std::string id = std::to_string(i);
      rows[i] = {correct[i] != 0, confidence[i], weights ? weights[i] : 1.0,
                 std::string(static_cast<std::size_t>(width) - id.size(), '0') + id};
    }
    *out = compute_audrc(std::move(rows), weights != nullptr);
    return VELCD_OK;
  });
}

}  // extern "C"
