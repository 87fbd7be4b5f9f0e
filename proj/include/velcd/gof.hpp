#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "velcd/dataset.hpp"
#include "velcd/scores.hpp"
#include "velcd/velocity.hpp"

namespace velcd {

struct GofConfig {
  int max_iters = 2000;
  double base_lr = 0.1;  // basis families: base_lr / ln(#params)
  double mlp_lr = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double penalty_weight = 1e-3;
  int penalty_order = 2;
  // Early stop when the objective improves by less than tol (relative) over
  // plateau_window iterations.
  double tol = 1e-9;
  int plateau_window = 100;
  bool absolute_residuals = false;
  VelocityArch arch;
  // low_confidence is raised when both losses are below low_conf_abs or the
  // gap is below low_conf_rel times the larger loss.
  double low_conf_abs = 1e-3;
  double low_conf_rel = 1e-2;
};

void validate(const GofConfig& config);

double learning_rate(Family family, const GofConfig& config);

/// Continuity-identity violation at point i:
/// s_x(x_i) - dv/dy - [s_x(x_i, y_i) + v s_y(x_i, y_i)].
double residual(const VelocityModel& model, const ScoreField& score, const DataPair& pair,
                std::size_t i);

/// Mean over points of (dv/dx + v dv/dy)^2, the squared second derivative of
/// the causal curve. Only order 2 is supported.
double penalty(const VelocityModel& model, std::span<const double> xs,
               std::span<const double> ys, int order = 2);

/// Mean squared (or absolute) residual over points with keep[i] set.
double gof_loss(const VelocityModel& model, const ScoreField& score, const DataPair& pair,
                const std::vector<bool>& keep = {}, bool absolute = false);

/// Objective over the kept points with an analytic gradient; the pieces the
/// optimizer and the gradient checks share.
class GofObjective {
 public:
  GofObjective(const DataPair& pair, const ScoreField& score, const std::vector<bool>& keep,
               Family family, const GofConfig& config);

  struct Value {
    double loss;     // data term
    double penalty;  // unweighted
    double total;    // loss + penalty_weight * penalty
  };

  Value evaluate(std::span<const double> theta);
  // Value plus gradient of `total` (overwrites grad).
  Value evaluate(std::span<const double> theta, std::span<double> grad);

  std::size_t points() const { return static_cast<std::size_t>(xs_.size()); }

 private:
  Value run(std::span<const double> theta, std::span<double>* grad);

  Eigen::VectorXd xs_, ys_, a_, syj_;  // a = s_x(x) - s_x(x, y)
  VelocityEvaluator eval_;
  GofConfig cfg_;
};

struct DirectionFit {
  VelocityModel model;
  double loss = 0;     // unpenalized, on kept points
  double penalty = 0;
  int iterations = 0;
  std::vector<double> trace_loss;
  std::vector<double> trace_penalty;
};

/// Full-batch Adam on loss + penalty_weight * penalty from init_params(seed).
/// Throws NonFiniteLoss naming the iteration.
DirectionFit fit_direction(const DataPair& pair, const ScoreField& score, Family family,
                           const GofConfig& config, std::uint64_t seed,
                           const std::vector<bool>& keep = {});

struct FitResult {
  double loss_xy = 0;
  double loss_yx = 0;
  VelocityModel model_xy;
  VelocityModel model_yx;
  Direction decision = Direction::XtoY;
  double confidence = 0;
  bool tie = false;
  bool low_confidence = false;
  std::size_t n_used = 0;
  std::vector<double> trace_xy, trace_yx;
  std::vector<double> trace_penalty_xy, trace_penalty_yx;
};

FitResult decide(DirectionFit xy, DirectionFit yx, const GofConfig& config);

struct EstimatorSpec {
  ScoreSource source = ScoreSource::Stein;
  KernelConfig kernel = KernelConfig::stein();
  const MechanismOracle* oracle = nullptr;  // required for Analytic
  AnalyticConfig analytic;

  static EstimatorSpec stein() { return {}; }
  static EstimatorSpec kde() { return {ScoreSource::Kde, KernelConfig::kde(), nullptr, {}}; }
  static EstimatorSpec analytic_with(const MechanismOracle& o, AnalyticConfig c = {}) {
    return {ScoreSource::Analytic, {}, &o, c};
  }
};

struct PreparedData {
  DataPair pair;  // after subsampling and standardization
  Affine affine;
  ScorePair scores;
  std::vector<bool> keep;
};

// subsample -> standardize -> estimate scores on all points -> trim mask.
PreparedData prepare(const DataPair& pair, const EstimatorSpec& estimator,
                     const PreprocessConfig& preprocess);

FitResult discover(const DataPair& pair, const EstimatorSpec& estimator, Family family,
                   const GofConfig& config, const PreprocessConfig& preprocess,
                   std::uint64_t seed);

FitResult discover_prepared(const PreparedData& data, Family family, const GofConfig& config,
                            std::uint64_t seed);

std::string to_json(const FitResult& result, bool include_models = true);
// iteration, loss, penalty
void write_trace_csv(const std::vector<double>& loss, const std::vector<double>& penalty,
                     const std::filesystem::path& path);

}  // namespace velcd
