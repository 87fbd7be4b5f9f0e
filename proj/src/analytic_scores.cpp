#include <cmath>
#include <functional>
#include <random>

#include "velcd/error.hpp"
#include "velcd/scores.hpp"

namespace velcd {

ScoreField analytic_forward_scores(const DataPair& pair, const MechanismOracle& oracle) {
  validate(pair);
  if (!oracle.invertible())
    fail(ErrorCode::NonInvertibleMechanism, "mechanism has no closed-form inverse");
  const double var = oracle.sigma_y() * oracle.sigma_y();
  ScoreField f;
  f.source = ScoreSource::Analytic;
  const std::size_t n = pair.size();
  f.sx_marg.resize(n);
  f.sx_joint.resize(n);
  f.sy_joint.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = pair.xs[i];
    const InverseDerivs d = oracle.inverse(x, pair.ys[i]);
    // log p(x,y) = log N(x) + log p_eps(f^{-1}) + log d_y f^{-1},  p_eps' / p_eps = -e / var
    const double noise_score = -d.inv / var;
    f.sx_marg[i] = -x;
    f.sx_joint[i] = -x + noise_score * d.d_x + d.d_xy / d.d_y;
    f.sy_joint[i] = noise_score * d.d_y + d.d_yy / d.d_y;
  }
  return f;
}

namespace {

double log_sum_exp(const Eigen::ArrayXd& a) {
  const double m = a.maxCoeff();
  return m + std::log((a - m).exp().sum());
}

}  // namespace

std::vector<double> analytic_effect_marginal(std::span<const double> ys,
                                             const MechanismOracle& oracle,
                                             const AnalyticConfig& config) {
  if (!oracle.invertible())
    fail(ErrorCode::NonInvertibleMechanism, "mechanism has no closed-form inverse");
  require(config.mc_draws >= 1, "need at least one Monte Carlo draw");
  require(config.fd_step > 0.0, "finite-difference step must be positive");
  const auto m = static_cast<Eigen::Index>(config.mc_draws);
  const double sigma = oracle.sigma_y();

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> xs(static_cast<std::size_t>(m));
  for (double& x : xs) x = normal(rng);

  std::vector<double> loc(xs.size()), scale(xs.size());
  const bool affine = oracle.location_scale(xs, loc, scale);

  // log p(y) up to a constant: log sum_k p(y | x_k)
  std::function<double(double)> log_py;
  Eigen::ArrayXd L, inv_s, logc;
  if (affine) {
    L = Eigen::Map<const Eigen::ArrayXd>(loc.data(), m);
    const Eigen::ArrayXd S = Eigen::Map<const Eigen::ArrayXd>(scale.data(), m).abs();
    inv_s = 1.0 / (sigma * S);
    logc = -S.log();
    log_py = [&](double y) {
      const Eigen::ArrayXd t = (y - L) * inv_s;
      return log_sum_exp(logc - 0.5 * t.square());
    };
  } else {
    log_py = [&](double y) {
      Eigen::ArrayXd lp(m);
      for (Eigen::Index k = 0; k < m; ++k) {
        const InverseDerivs d = oracle.inverse(xs[static_cast<std::size_t>(k)], y);
        const double t = d.inv / sigma;
        lp(k) = -0.5 * t * t + std::log(std::abs(d.d_y));
      }
      return log_sum_exp(lp);
    };
  }

  const double h = config.fd_step;
  std::vector<double> out(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i)
    out[i] = (log_py(ys[i] + h) - log_py(ys[i] - h)) / (2.0 * h);
  return out;
}

ScorePair analytic_gaussian_scores(const DataPair& pair, const MechanismOracle& oracle,
                                   const AnalyticConfig& config) {
  ScoreField fwd = analytic_forward_scores(pair, oracle);
  ScoreField rev = swap_roles(fwd, analytic_effect_marginal(pair.ys, oracle, config));
  return {std::move(fwd), std::move(rev)};
}

}  // namespace velcd
