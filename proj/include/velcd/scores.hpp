#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "velcd/dataset.hpp"

namespace velcd {

enum class ScoreSource { Stein, Kde, Analytic };

const char* to_string(ScoreSource s) noexcept;  // "STEIN", "KDE", "ANALYTIC"
std::optional<ScoreSource> parse_score_source(std::string_view s);

/// Score values at the n sample points, oriented for one candidate direction:
/// sx_marg = d/dx log p(x), sx_joint = d/dx log p(x,y), sy_joint = d/dy log p(x,y)
/// where x is the candidate cause.
struct ScoreField {
  std::vector<double> sx_marg;
  std::vector<double> sx_joint;
  std::vector<double> sy_joint;
  ScoreSource source = ScoreSource::Stein;

  std::size_t size() const { return sx_marg.size(); }
};

/// Both orientations of one dataset. `reverse` treats y as the candidate
/// cause: its sx_marg is d/dy log p(y) and its joint partials are swapped.
struct ScorePair {
  ScoreField forward;
  ScoreField reverse;
};

ScoreField swap_roles(const ScoreField& forward, std::vector<double> sy_marg);

// Scores estimated on standardized coordinates, mapped from raw-scale scores:
// d/dx' = sd_x d/dx for x' = (x - mean_x) / sd_x.
ScorePair rescale_to_standardized(const ScorePair& raw, const Affine& affine);

enum class KernelFamily { Gaussian, Laplace };
enum class BandwidthRule { Explicit, MedianHeuristic, Silverman };

struct KernelConfig {
  KernelFamily family = KernelFamily::Gaussian;
  BandwidthRule rule = BandwidthRule::MedianHeuristic;
  double lengthscale = 1.0;     // used when rule == Explicit
  double regularization = 0.1;  // Stein ridge term lambda
  std::optional<double> kde_epsilon;  // defaults to n^-2

  static KernelConfig stein() { return {}; }
  static KernelConfig kde() {
    return {KernelFamily::Laplace, BandwidthRule::Silverman, 1.0, 0.1, std::nullopt};
  }
};

// Rows of `points` are observations.
double median_heuristic(const Eigen::MatrixXd& points);

/// Stein gradient estimator at the sample points with the Gaussian kernel
/// k(a,b) = exp(-|a-b|^2 / (2 sigma^2)):  S = -(K + lambda I)^{-1} B,
/// B_{i,d} = sum_j dk(z_i, z_j)/dz_{j,d}. Returns n x d.
Eigen::MatrixXd stein_gradient(const Eigen::MatrixXd& points, double sigma, double lambda);

// Per-dimension Silverman bandwidths 0.9 min(sd, IQR/1.34) n^(-1/5).
Eigen::VectorXd silverman_bandwidths(const Eigen::MatrixXd& points);

/// grad p / (p + eps) for the product-Laplace KDE built on `centers`,
/// evaluated at each row of `queries`. The kernel's gradient at zero offset
/// is taken as 0.
Eigen::MatrixXd kde_score_at(const Eigen::MatrixXd& centers, const Eigen::VectorXd& h,
                             double eps, const Eigen::MatrixXd& queries);

ScoreField stein_scores(const DataPair& pair, const KernelConfig& config = KernelConfig::stein());
ScoreField kde_scores(const DataPair& pair, const KernelConfig& config = KernelConfig::kde());

// Both orientations; the joint estimate is shared between them.
ScorePair stein_score_pair(const DataPair& pair, const KernelConfig& config = KernelConfig::stein());
ScorePair kde_score_pair(const DataPair& pair, const KernelConfig& config = KernelConfig::kde());

/// f_x^{-1}(y) and its partial derivatives.
struct InverseDerivs {
  double inv = 0;
  double d_x = 0;
  double d_y = 0;
  double d_xy = 0;
  double d_yy = 0;
};

/// A mechanism y = f_x(eps) with X ~ N(0,1) and eps ~ N(0, sigma_y^2), plus
/// its closed-form inverse and causal velocity.
class MechanismOracle {
 public:
  virtual ~MechanismOracle() = default;

  virtual double sigma_y() const = 0;
  virtual bool invertible() const { return true; }
  virtual double mechanism(double x, double eps) const = 0;
  virtual InverseDerivs inverse(double x, double y) const = 0;
  virtual double velocity(double y, double x) const = 0;
  virtual double velocity_dy(double y, double x) const = 0;

  /// When f_x^{-1}(y) = (y - loc(x)) / scale(x), fills both and returns true.
  virtual bool location_scale(std::span<const double> xs, std::span<double> loc,
                              std::span<double> scale) const {
    (void)xs, (void)loc, (void)scale;
    return false;
  }
};

struct AnalyticConfig {
  std::size_t mc_draws = 100000;  // for the effect marginal
  double fd_step = 1e-3;
  std::uint64_t seed = 0;
};

/// Closed-form scores of the cause marginal and the joint, and a Monte Carlo
/// estimate of the effect marginal score d/dy log p(y), p(y) = E_x p(y|x).
/// Throws NonInvertibleMechanism if the oracle has no inverse.
ScorePair analytic_gaussian_scores(const DataPair& pair, const MechanismOracle& oracle,
                                   const AnalyticConfig& config = {});
ScoreField analytic_forward_scores(const DataPair& pair, const MechanismOracle& oracle);
std::vector<double> analytic_effect_marginal(std::span<const double> ys,
                                             const MechanismOracle& oracle,
                                             const AnalyticConfig& config);

// Columns x, y, sx_marg, sx_joint, sy_joint, source.
void write_score_field(const ScoreField& field, const DataPair& pair,
                       const std::filesystem::path& path);
ScoreField read_score_field(const std::filesystem::path& path, DataPair* pair_out = nullptr);

}  // namespace velcd
