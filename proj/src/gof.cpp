#include "velcd/gof.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "velcd/error.hpp"
#include "velcd/format.hpp"

namespace velcd {

using Eigen::VectorXd;

void validate(const GofConfig& c) {
  require(c.max_iters >= 0, "max_iters must be non-negative");
  require(c.base_lr > 0.0 && c.mlp_lr > 0.0, "learning rates must be positive");
  require(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0,
          "Adam betas must lie in [0, 1)");
  require(c.adam_eps > 0.0, "Adam epsilon must be positive");
  require(c.penalty_weight >= 0.0, "penalty weight must be non-negative");
  require(c.penalty_order >= 2, "penalty order must be >= 2");
  require(c.plateau_window >= 1, "plateau window must be positive");
}

double learning_rate(Family family, const GofConfig& config) {
  if (!is_basis(family)) return config.mlp_lr;
  return config.base_lr / std::log(static_cast<double>(param_count(family, config.arch)));
}

double residual(const VelocityModel& model, const ScoreField& score, const DataPair& pair,
                std::size_t i) {
  if (i >= pair.size() || i >= score.size())
    fail(ErrorCode::IndexOutOfRange, "residual index " + std::to_string(i));
  const auto [v, dvdy] = eval_velocity(model, pair.ys[i], pair.xs[i]);
  return score.sx_marg[i] - dvdy - (score.sx_joint[i] + v * score.sy_joint[i]);
}

double penalty(const VelocityModel& model, std::span<const double> xs,
               std::span<const double> ys, int order) {
  if (order != 2) fail(ErrorCode::UnsupportedOrder, "penalty order " + std::to_string(order));
  require(xs.size() == ys.size() && !xs.empty(), "penalty needs matching non-empty inputs");
  VelocityEvaluator ev(model.family, model.arch);
  const auto n = static_cast<Eigen::Index>(xs.size());
  ev.forward(model.theta, Eigen::Map<const VectorXd>(ys.data(), n),
             Eigen::Map<const VectorXd>(xs.data(), n), true);
  return (ev.dvdx().array() + ev.v().array() * ev.dvdy().array()).square().mean();
}

double gof_loss(const VelocityModel& model, const ScoreField& score, const DataPair& pair,
                const std::vector<bool>& keep, bool absolute) {
  GofConfig cfg;
  cfg.arch = model.arch;
  cfg.absolute_residuals = absolute;
  cfg.penalty_weight = 0.0;
  GofObjective obj(pair, score, keep, model.family, cfg);
  return obj.evaluate(model.theta).loss;
}

GofObjective::GofObjective(const DataPair& pair, const ScoreField& score,
                           const std::vector<bool>& keep, Family family,
                           const GofConfig& config)
    : eval_(family, config.arch), cfg_(config) {
  require(score.size() == pair.size() && score.sx_joint.size() == pair.size() &&
              score.sy_joint.size() == pair.size(),
          "score field and dataset differ in length");
  require(keep.empty() || keep.size() == pair.size(), "keep mask length mismatch");
  if (cfg_.penalty_order != 2)
    fail(ErrorCode::UnsupportedOrder, "penalty order " + std::to_string(cfg_.penalty_order));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pair.size(); ++i)
    if (keep.empty() || keep[i]) idx.push_back(i);
  if (idx.empty()) fail(ErrorCode::EmptyResult, "no points left to fit");
  const auto m = static_cast<Eigen::Index>(idx.size());
  xs_.resize(m);
  ys_.resize(m);
  a_.resize(m);
  syj_.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const std::size_t i = idx[static_cast<std::size_t>(k)];
    xs_(k) = pair.xs[i];
    ys_(k) = pair.ys[i];
    a_(k) = score.sx_marg[i] - score.sx_joint[i];
    syj_(k) = score.sy_joint[i];
  }
}

GofObjective::Value GofObjective::evaluate(std::span<const double> theta) {
  return run(theta, nullptr);
}

GofObjective::Value GofObjective::evaluate(std::span<const double> theta,
                                           std::span<double> grad) {
  return run(theta, &grad);
}

GofObjective::Value GofObjective::run(std::span<const double> theta, std::span<double>* grad) {
  const bool with_penalty = cfg_.penalty_weight > 0.0 || grad == nullptr;
  eval_.forward(theta, ys_, xs_, with_penalty);
  const double n = static_cast<double>(xs_.size());
  const VectorXd& v = eval_.v();
  const VectorXd& dvdy = eval_.dvdy();
  const VectorXd r = a_ - dvdy - v.cwiseProduct(syj_);

  Value out{};
  out.loss = cfg_.absolute_residuals ? r.cwiseAbs().mean() : r.squaredNorm() / n;
  VectorXd q;
  if (with_penalty) {
    q = eval_.dvdx() + v.cwiseProduct(dvdy);
    out.penalty = q.squaredNorm() / n;
  }
  out.total = out.loss + cfg_.penalty_weight * out.penalty;
  if (!grad) return out;

  std::fill(grad->begin(), grad->end(), 0.0);
  const VectorXd dr = cfg_.absolute_residuals ? VectorXd(r.array().sign() / n)
                                              : VectorXd(2.0 / n * r);
  // d r / d theta = -d(dvdy) - syj d(v)
  VectorXd seed_v = -dr.cwiseProduct(syj_);
  VectorXd seed_dy = -dr;
  if (cfg_.penalty_weight > 0.0) {
    const VectorXd dq = 2.0 * cfg_.penalty_weight / n * q;
    seed_v += dq.cwiseProduct(dvdy);
    seed_dy += dq.cwiseProduct(v);
    eval_.backward(seed_v, seed_dy, &dq, *grad);
  } else {
    eval_.backward(seed_v, seed_dy, nullptr, *grad);
  }
  return out;
}

DirectionFit fit_direction(const DataPair& pair, const ScoreField& score, Family family,
                           const GofConfig& config, std::uint64_t seed,
                           const std::vector<bool>& keep) {
  validate(config);
  GofObjective obj(pair, score, keep, family, config);
  DirectionFit fit;
  fit.model = make_model(family, config.arch, seed);
  std::vector<double>& theta = fit.model.theta;
  const std::size_t p = theta.size();
  std::vector<double> grad(p), m1(p, 0.0), m2(p, 0.0);
  const double lr = learning_rate(family, config);
  std::vector<double> objective;

  auto check = [](const GofObjective::Value& val, int it) {
    if (!std::isfinite(val.total))
      fail(ErrorCode::NonFiniteLoss, "objective became non-finite at iteration " + std::to_string(it));
  };

  double b1t = 1.0, b2t = 1.0;
  int it = 0;
  for (; it < config.max_iters; ++it) {
    const auto val = obj.evaluate(theta, grad);
    check(val, it);
    fit.trace_loss.push_back(val.loss);
    fit.trace_penalty.push_back(val.penalty);
    objective.push_back(val.total);
    const auto w = static_cast<std::size_t>(config.plateau_window);
    if (objective.size() > w) {
      const double before = objective[objective.size() - 1 - w];
      if (before - val.total < config.tol * std::abs(before)) break;
    }

    b1t *= config.adam_beta1;
    b2t *= config.adam_beta2;
    for (std::size_t k = 0; k < p; ++k) {
      m1[k] = config.adam_beta1 * m1[k] + (1.0 - config.adam_beta1) * grad[k];
      m2[k] = config.adam_beta2 * m2[k] + (1.0 - config.adam_beta2) * grad[k] * grad[k];
      const double mhat = m1[k] / (1.0 - b1t);
      const double vhat = m2[k] / (1.0 - b2t);
      theta[k] -= lr * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  }
  fit.iterations = it;

  const auto final_val = obj.evaluate(theta);
  check(final_val, it);
  fit.loss = final_val.loss;
  fit.penalty = final_val.penalty;
  if (fit.trace_loss.empty() || it == config.max_iters) {
    fit.trace_loss.push_back(final_val.loss);
    fit.trace_penalty.push_back(final_val.penalty);
  }
  return fit;
}

FitResult decide(DirectionFit xy, DirectionFit yx, const GofConfig& config) {
  FitResult r;
  r.loss_xy = xy.loss;
  r.loss_yx = yx.loss;
  r.decision = r.loss_xy <= r.loss_yx ? Direction::XtoY : Direction::YtoX;
  r.tie = r.loss_xy == r.loss_yx;
  r.confidence = std::abs(r.loss_xy - r.loss_yx);
  const double worst = std::max(r.loss_xy, r.loss_yx);
  r.low_confidence = worst <= config.low_conf_abs || r.confidence <= config.low_conf_rel * worst;
  r.model_xy = std::move(xy.model);
  r.model_yx = std::move(yx.model);
  r.trace_xy = std::move(xy.trace_loss);
  r.trace_yx = std::move(yx.trace_loss);
  r.trace_penalty_xy = std::move(xy.trace_penalty);
  r.trace_penalty_yx = std::move(yx.trace_penalty);
  return r;
}

PreparedData prepare(const DataPair& input, const EstimatorSpec& estimator,
                     const PreprocessConfig& pre) {
  validate(input);
  DataPair raw = pre.subsample_to ? subsample(input, *pre.subsample_to, pre.rng_seed) : input;

  PreparedData out;
  if (pre.standardize) {
    auto s = standardize(raw);
    out.pair = std::move(s.pair);
    out.affine = s.affine;
  } else {
    out.pair = raw;
  }

  switch (estimator.source) {
    case ScoreSource::Stein: out.scores = stein_score_pair(out.pair, estimator.kernel); break;
    case ScoreSource::Kde: out.scores = kde_score_pair(out.pair, estimator.kernel); break;
    case ScoreSource::Analytic: {
      if (!estimator.oracle)
        fail(ErrorCode::NonInvertibleMechanism, "analytic scores need a mechanism oracle");
      out.scores = rescale_to_standardized(
          analytic_gaussian_scores(raw, *estimator.oracle, estimator.analytic), out.affine);
      break;
    }
  }
  out.keep = trim_mask(out.pair, pre.trim_fraction);
  if (std::count(out.keep.begin(), out.keep.end(), true) < 2)
    fail(ErrorCode::EmptyResult, "trimming left fewer than two points");
  return out;
}

FitResult discover_prepared(const PreparedData& data, Family family, const GofConfig& config,
                            std::uint64_t seed) {
  auto tagged = [&](Direction d, auto&& fn) -> DirectionFit {
    try {
      return fn();
    } catch (const Error& e) {
      std::string msg = e.what();
      const std::string code = to_string(e.code());
      if (msg.rfind(code + ": ", 0) == 0) msg.erase(0, code.size() + 2);
      throw Error(e.code(), std::string("direction ") + to_string(d) + ": " + msg);
    }
  };
  DirectionFit xy = tagged(Direction::XtoY, [&] {
    return fit_direction(data.pair, data.scores.forward, family, config, seed, data.keep);
  });
  const DataPair rev = swapped(data.pair);
  DirectionFit yx = tagged(Direction::YtoX, [&] {
    return fit_direction(rev, data.scores.reverse, family, config, seed, data.keep);
  });
  FitResult r = decide(std::move(xy), std::move(yx), config);
  r.n_used = static_cast<std::size_t>(std::count(data.keep.begin(), data.keep.end(), true));
  return r;
}

FitResult discover(const DataPair& pair, const EstimatorSpec& estimator, Family family,
                   const GofConfig& config, const PreprocessConfig& preprocess,
                   std::uint64_t seed) {
  return discover_prepared(prepare(pair, estimator, preprocess), family, config, seed);
}

std::string to_json(const FitResult& r, bool include_models) {
  nlohmann::ordered_json j;
  j["loss_xy"] = r.loss_xy;
  j["loss_yx"] = r.loss_yx;
  j["decision"] = to_string(r.decision);
  j["confidence"] = r.confidence;
  j["tie"] = r.tie;
  j["low_confidence"] = r.low_confidence;
  j["n_used"] = r.n_used;
  if (include_models) {
    j["model_xy"] = nlohmann::ordered_json::parse(to_json(r.model_xy));
    j["model_yx"] = nlohmann::ordered_json::parse(to_json(r.model_yx));
  }
  return j.dump(2);
}

void write_trace_csv(const std::vector<double>& loss, const std::vector<double>& penalty,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "iteration,loss,penalty\n";
  for (std::size_t i = 0; i < loss.size(); ++i)
    out << i << ',' << fmt17(loss[i]) << ',' << fmt17(i < penalty.size() ? penalty[i] : 0.0)
        << '\n';
}

}  // namespace velcd
