#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "velcd/velcd.h"

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kExcessive = 4 };

int exit_code(velcd_status s) {
  switch (s) {
    case VELCD_OK: return kOk;
    case VELCD_ERR_INVALID_ARGUMENT:
    case VELCD_ERR_UNSUPPORTED_ORDER: return kConfig;
    case VELCD_ERR_EXCESSIVE_FAILURES: return kExcessive;
    case VELCD_ERR_INTERNAL: return kInternal;
    default: return kData;
  }
}

int report(velcd_status s) {
  if (s != VELCD_OK)
    std::fprintf(stderr, "velcd: %s\n", velcd_last_error());
  return exit_code(s);
}

struct Config {
  velcd_config* cfg = nullptr;
  Config() { velcd_config_create(&cfg); }
  ~Config() { velcd_config_free(cfg); }
  velcd_status set(const std::string& k, const std::string& v) {
    return velcd_config_set(cfg, k.c_str(), v.c_str());
  }
};

// Flag values as strings, forwarded to velcd_config_set when given.
struct Flags {
  std::map<std::string, std::string> values;
  std::optional<bool> weighted;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }

  velcd_status apply(Config& c) const {
    for (const auto& [k, v] : values)
      if (auto s = c.set(k, v); s != VELCD_OK) return s;
    if (weighted) return c.set("weighted", *weighted ? "1" : "0");
    return VELCD_OK;
  }
};

void fit_flags(CLI::App* app, Flags& f) {
  f.add(app, "--estimator", "estimator", "Score estimator: stein, kde or analytic");
  f.add(app, "--family", "family", "Velocity family: b-lin, b-quad, b-lin-exp, b-quad-exp, v-anm, v-lsnm, v-nn");
  f.add(app, "--seed", "seed", "Master seed");
  f.add(app, "--trim", "trim", "Fraction of marginal extremes dropped from the loss");
  f.add(app, "--subsample-to", "subsample_to", "Subsample each dataset to this many points");
  f.add(app, "--penalty-weight", "penalty_weight", "Weight of the curve-smoothness penalty");
  f.add(app, "--lr", "lr", "Base learning rate for basis families");
  f.add(app, "--iters", "iters", "Maximum Adam iterations");
  f.add(app, "--workers", "workers", "Worker threads");
  f.add(app, "--out", "out", "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal-velocity discovery for cause-effect pairs"};
  app.require_subcommand(1);

  Flags discover_f, gen_f, run_f, curves_f, score_f;
  std::string discover_in, curves_in;

  auto* discover = app.add_subcommand("discover", "Infer the direction of one pair (CSV x,y)");
  discover->add_option("input", discover_in, "Dataset CSV")->required();
  fit_flags(discover, discover_f);

  auto* bench = app.add_subcommand("benchmark", "Synthetic benchmarks");
  bench->require_subcommand(1);
  auto* gen = bench->add_subcommand("generate", "Write benchmark datasets and a manifest");
  gen_f.add(gen, "--family", "bench_family", "velocity, sigmoid, anm, lsnm, anm-gauss, lsnm-gauss");
  gen_f.add(gen, "--n", "n", "Points per dataset");
  gen_f.add(gen, "--datasets", "datasets", "Number of datasets");
  gen_f.add(gen, "--seed", "seed", "Master seed");
  gen_f.add(gen, "--sigma-theta", "sigma_theta", "Mechanism parameter scale");
  gen_f.add(gen, "--sigma-y", "sigma_y", "Noise scale");
  gen_f.add(gen, "--workers", "workers", "Worker threads");
  gen_f.add(gen, "--out", "out", "Output directory");

  auto* run = bench->add_subcommand("run", "Run discovery over a benchmark and report metrics");
  fit_flags(run, run_f);
  run_f.add(run, "--bench", "bench_family", "Generate datasets of this family on the fly");
  run_f.add(run, "--n", "n", "Points per generated dataset");
  run_f.add(run, "--datasets", "datasets", "Number of generated datasets");
  run_f.add(run, "--sigma-theta", "sigma_theta", "Mechanism parameter scale");
  run_f.add(run, "--sigma-y", "sigma_y", "Noise scale");
  run_f.add(run, "--data", "data_dir", "Directory of dataset CSVs");
  run_f.add(run, "--tuebingen", "tuebingen_dir", "Directory with pairmeta.txt and pairNNNN.txt");
  run_f.add(run, "--tuebingen-filter", "tuebingen_filter", "standard or continuous");
  auto weighted_opt = [&](Flags& f, CLI::App* a) {
    a->add_flag_function("--weighted", [&f](std::int64_t) { f.weighted = true; }, "Weight datasets in metrics");
    a->add_flag_function("--unweighted", [&f](std::int64_t) { f.weighted = false; }, "Unit dataset weights");
  };
  weighted_opt(run_f, run);

  auto* curves = app.add_subcommand("curves", "Fit one pair and trace causal curves");
  curves->add_option("input", curves_in, "Dataset CSV")->required();
  fit_flags(curves, curves_f);
  curves_f.add(curves, "--curves", "curves", "Number of curves");
  curves_f.add(curves, "--grid-points", "grid_points", "Grid points per curve");

  auto* score = app.add_subcommand("score-eval", "Score-estimation error against analytic oracles");
  score_f.add(score, "--family", "bench_family", "anm-gauss or lsnm-gauss");
  score_f.add(score, "--n", "score_ns", "Comma-separated sample sizes");
  score_f.add(score, "--datasets", "score_seeds", "Datasets per sample size");
  score_f.add(score, "--estimator", "score_estimators", "Comma-separated estimators");
  score_f.add(score, "--seed", "seed", "Master seed");
  score_f.add(score, "--workers", "workers", "Worker threads");
  score_f.add(score, "--out", "out", "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  Config c;
  if (discover->parsed()) {
    if (auto s = discover_f.apply(c); s != VELCD_OK) return report(s);
    velcd_dataset* ds = nullptr;
    if (auto s = velcd_dataset_load_csv(discover_in.c_str(), &ds); s != VELCD_OK) return report(s);
    velcd_fit* fit = nullptr;
    const velcd_status s = velcd_discover(ds, c.cfg, &fit);
    velcd_dataset_free(ds);
    if (s != VELCD_OK) return report(s);
    char* json = nullptr;
    const velcd_status js = velcd_fit_to_json(fit, discover_f.values.count("out") ? 1 : 0, &json);
    velcd_fit_free(fit);
    if (js != VELCD_OK) return report(js);
    std::printf("%s\n", json);
    if (auto it = discover_f.values.find("out"); it != discover_f.values.end()) {
      std::error_code ec;
      std::filesystem::create_directories(it->second, ec);
      const std::string path = it->second + "/result.json";
      if (FILE* fh = std::fopen(path.c_str(), "w")) {
        std::fprintf(fh, "%s\n", json);
        std::fclose(fh);
      } else {
        std::fprintf(stderr, "velcd: IoError: cannot write %s\n", path.c_str());
        velcd_string_free(json);
        return kData;
      }
    }
    velcd_string_free(json);
    return kOk;
  }
  if (gen->parsed()) {
    if (auto s = gen_f.apply(c); s != VELCD_OK) return report(s);
    return report(velcd_benchmark_generate(c.cfg));
  }
  if (run->parsed()) {
    if (auto s = run_f.apply(c); s != VELCD_OK) return report(s);
    char* json = nullptr;
    const velcd_status s = velcd_benchmark_run(c.cfg, &json);
    if (json) {
      if (!run_f.values.count("out")) std::printf("%s", json);
      velcd_string_free(json);
    }
    return report(s);
  }
  if (curves->parsed()) {
    if (auto s = curves_f.apply(c); s != VELCD_OK) return report(s);
    velcd_dataset* ds = nullptr;
    if (auto s = velcd_dataset_load_csv(curves_in.c_str(), &ds); s != VELCD_OK) return report(s);
    const velcd_status s = velcd_curves(ds, c.cfg);
    velcd_dataset_free(ds);
    return report(s);
  }
  if (score->parsed()) {
    if (auto s = score_f.apply(c); s != VELCD_OK) return report(s);
    return report(velcd_score_eval(c.cfg));
  }
  return kConfig;
}
