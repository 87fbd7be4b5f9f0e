#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "velcd/dataset.hpp"
#include "velcd/flow.hpp"
#include "velcd/gof.hpp"
#include "velcd/synth.hpp"

namespace velcd {

struct AudrcRow {
  bool correct = false;
  double confidence = 0;
  double weight = 1;
  std::string id;
};

/// Rows ranked by confidence (descending, ties by id); mean over k of the
/// accuracy of the top-k rows. Throws EmptyInput on an empty list.
double compute_audrc(std::vector<AudrcRow> rows, bool weighted = false);

struct RunConfig {
  ScoreSource estimator = ScoreSource::Stein;
  Family family = Family::VAnm;
  GofConfig gof;
  PreprocessConfig preprocess;
  AnalyticConfig analytic;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool weighted = false;  // AUDRC and headline accuracy use dataset weights
};

void validate(const RunConfig& config);

struct ResultRow {
  std::string id;
  std::optional<Direction> truth;
  Direction decision = Direction::XtoY;
  double confidence = 0;
  double loss_xy = 0;
  double loss_yx = 0;
  double weight = 1;
  bool tie = false;
  bool low_confidence = false;
  std::size_t n_used = 0;
  std::string error;  // empty when the dataset was processed

  bool ok() const { return error.empty(); }
};

struct MetricsReport {
  double accuracy = 0;
  double weighted_accuracy = 0;
  double audrc = 0;
  bool weighted = false;
  std::size_t n_datasets = 0;
  std::size_t n_scored = 0;  // rows entering the metrics
  std::size_t n_errors = 0;
  std::vector<ResultRow> rows;

  bool excessive_failures() const { return n_errors * 10 > n_datasets; }
};

/// Discovery on one dataset; the oracle is needed for ANALYTIC scores only.
ResultRow run_one(const DataPair& pair, const RunConfig& config, std::size_t index,
                  const MechanismOracle* oracle = nullptr);

// Datasets generated on the fly from the spec.
MetricsReport run_benchmark(const BenchmarkSpec& spec, const RunConfig& config);
MetricsReport run_benchmark(const std::vector<DataPair>& data, const RunConfig& config);

MetricsReport aggregate(std::vector<ResultRow> rows, bool weighted);

std::string to_json(const MetricsReport& report, const RunConfig& config);
// report.json and results.csv
void write_report(const MetricsReport& report, const RunConfig& config,
                  const std::filesystem::path& dir);
void write_results_csv(const MetricsReport& report, const std::filesystem::path& path);

// CSVs plus manifest.json; returns the dataset ids.
std::vector<std::string> write_benchmark(const BenchmarkSpec& spec,
                                         const std::filesystem::path& dir,
                                         std::size_t workers = 1);
// manifest.json order when present, otherwise every *.csv by name.
std::vector<DataPair> load_directory(const std::filesystem::path& dir);

struct ScoreEvalConfig {
  BenchFamily family = BenchFamily::AnmGauss;
  std::vector<std::size_t> ns{100, 1000};
  std::size_t seeds = 20;
  std::vector<ScoreSource> estimators{ScoreSource::Stein};
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  AnalyticConfig analytic;
};

struct ScoreMse {
  double cause_marg = 0;
  double joint_x = 0;
  double joint_y = 0;
  double effect_marg = 0;
};

struct ScoreEvalRow {
  std::size_t n = 0;
  ScoreSource estimator = ScoreSource::Stein;
  std::string statistic;  // median, q1, q3
  ScoreMse mse;
};

// Per-dataset errors of an estimate against the oracle, raw data scale.
ScoreMse score_mse(const ScorePair& estimate, const ScorePair& oracle);
std::vector<ScoreEvalRow> score_eval(const ScoreEvalConfig& config);
void write_score_eval_csv(const std::vector<ScoreEvalRow>& rows, const std::filesystem::path& path);

struct CurvePoint {
  std::size_t curve_id = 0;
  double x = 0;
  double y = 0;
};

/// Causal curves of the fitted model in the decided direction, started from
/// n_curves observations at evenly spaced cause quantiles and traced over a
/// grid spanning the observed cause range. Data coordinates.
std::vector<CurvePoint> compute_curves(const PreparedData& data, const FitResult& fit,
                                       std::size_t n_curves, std::size_t grid_points,
                                       const IntegratorConfig& integrator = {});
void write_curves_csv(const std::vector<CurvePoint>& points, const std::filesystem::path& path);

}  // namespace velcd
