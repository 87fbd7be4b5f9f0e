#include "velcd/scores.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "velcd/error.hpp"
#include "velcd/format.hpp"
#include "velcd/stats.hpp"

namespace velcd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(ScoreSource s) noexcept {
  switch (s) {
    case ScoreSource::Stein: return "STEIN";
    case ScoreSource::Kde: return "KDE";
    case ScoreSource::Analytic: return "ANALYTIC";
  }
  return "?";
}

std::optional<ScoreSource> parse_score_source(std::string_view s) {
  if (s == "STEIN" || s == "stein") return ScoreSource::Stein;
  if (s == "KDE" || s == "kde") return ScoreSource::Kde;
  if (s == "ANALYTIC" || s == "analytic") return ScoreSource::Analytic;
  return std::nullopt;
}

ScoreField swap_roles(const ScoreField& forward, std::vector<double> sy_marg) {
  return ScoreField{std::move(sy_marg), forward.sy_joint, forward.sx_joint, forward.source};
}

ScorePair rescale_to_standardized(const ScorePair& raw, const Affine& a) {
  ScorePair out = raw;
  auto scale = [](std::vector<double>& v, double s) {
    for (double& e : v) e *= s;
  };
  scale(out.forward.sx_marg, a.sd_x);
  scale(out.forward.sx_joint, a.sd_x);
  scale(out.forward.sy_joint, a.sd_y);
  scale(out.reverse.sx_marg, a.sd_y);
  scale(out.reverse.sx_joint, a.sd_y);
  scale(out.reverse.sy_joint, a.sd_x);
  return out;
}

namespace {

MatrixXd column(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MatrixXd joint_points(const DataPair& pair) {
  MatrixXd z(static_cast<Eigen::Index>(pair.size()), 2);
  for (std::size_t i = 0; i < pair.size(); ++i) {
    z(static_cast<Eigen::Index>(i), 0) = pair.xs[i];
    z(static_cast<Eigen::Index>(i), 1) = pair.ys[i];
  }
  return z;
}

std::vector<double> to_vec(const MatrixXd& m, Eigen::Index col) {
  return std::vector<double>(m.col(col).data(), m.col(col).data() + m.rows());
}

void check_finite(const MatrixXd& s, const char* what) {
  if (!s.allFinite()) fail(ErrorCode::SingularSystem, std::string(what) + " produced non-finite scores");
}

}  // namespace

double median_heuristic(const MatrixXd& points) {
  const Eigen::Index n = points.rows();
  require(n >= 2, "median heuristic needs at least two points");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      dist.push_back((points.row(i) - points.row(j)).norm());
  // Median of the pairwise distances, averaging the middle pair when even.
  const std::size_t m = dist.size();
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(m / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double med = *mid;
  if (m % 2 == 0) med = 0.5 * (med + *std::max_element(dist.begin(), mid));
  if (!(med > 0.0)) fail(ErrorCode::AllPointsIdentical, "median pairwise distance is zero");
  return med;
}

MatrixXd stein_gradient(const MatrixXd& points, double sigma, double lambda) {
  require(sigma > 0.0, "Stein lengthscale must be positive");
  require(lambda > 0.0, "Stein regularization must be positive");
  const Eigen::Index n = points.rows();
  const VectorXd sq = points.rowwise().squaredNorm();
  MatrixXd K = -2.0 * points * points.transpose();
  K.colwise() += sq;
  K.rowwise() += sq.transpose();
  K = (-K.array().max(0.0) / (2.0 * sigma * sigma)).exp().matrix();

  // sum_j dk(z_i, z_j)/dz_j = sum_j k_ij (z_i - z_j) / sigma^2
  const VectorXd rowsum = K.rowwise().sum();
  const MatrixXd B = (rowsum.asDiagonal() * points - K * points) / (sigma * sigma);

  for (double lam : {lambda, 10.0 * lambda}) {
    MatrixXd A = K;
    A.diagonal().array() += lam;
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) continue;
    MatrixXd S = -llt.solve(B);
    if (S.allFinite()) return S;
  }
  fail(ErrorCode::SingularSystem, "Cholesky factorization of K + lambda I failed (n=" +
                                      std::to_string(n) + ")");
}

VectorXd silverman_bandwidths(const MatrixXd& points) {
  const Eigen::Index n = points.rows();
  require(n >= 2, "bandwidth selection needs at least two points");
  VectorXd h(points.cols());
  for (Eigen::Index d = 0; d < points.cols(); ++d) {
    std::vector<double> col = to_vec(points, d);
    const double mean = points.col(d).mean();
    const double sd =
        std::sqrt((points.col(d).array() - mean).square().sum() / static_cast<double>(n - 1));
    const double iqr = quantile(col, 0.75) - quantile(col, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    if (!(spread > 0.0)) fail(ErrorCode::AllPointsIdentical, "constant coordinate in KDE bandwidth");
    h(d) = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  }
  return h;
}

MatrixXd kde_score_at(const MatrixXd& centers, const VectorXd& h, double eps,
                      const MatrixXd& queries) {
  require(centers.cols() == h.size() && queries.cols() == h.size(), "KDE dimension mismatch");
  require((h.array() > 0.0).all(), "KDE bandwidths must be positive");
  const Eigen::Index n = centers.rows();
  const Eigen::Index dim = centers.cols();
  const double norm = static_cast<double>(n) * (2.0 * h.array()).prod();
  MatrixXd out(queries.rows(), dim);
  VectorXd w(n);
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    w.setZero();
    for (Eigen::Index d = 0; d < dim; ++d)
      w.array() -= (centers.col(d).array() - queries(q, d)).abs() / h(d);
    w = w.array().exp().matrix();
    const double p = w.sum() / norm;
    for (Eigen::Index d = 0; d < dim; ++d) {
      // d/dz exp(-|z - c| / h) = -sign(z - c) / h * exp(...); sign(0) = 0
      const auto sgn = (queries(q, d) - centers.col(d).array()).sign();
      const double grad = -(sgn * w.array()).sum() / (h(d) * norm);
      out(q, d) = grad / (p + eps);
    }
  }
  return out;
}

namespace {

MatrixXd stein_on(const MatrixXd& pts, const KernelConfig& cfg) {
  require(cfg.family == KernelFamily::Gaussian, "the Stein estimator uses the Gaussian kernel");
  const double sigma =
      cfg.rule == BandwidthRule::Explicit ? cfg.lengthscale : median_heuristic(pts);
  auto s = stein_gradient(pts, sigma, cfg.regularization);
  check_finite(s, "Stein estimator");
  return s;
}

MatrixXd kde_on(const MatrixXd& pts, const KernelConfig& cfg) {
  require(cfg.family == KernelFamily::Laplace, "the KDE score estimator uses the Laplace kernel");
  const double n = static_cast<double>(pts.rows());
  const VectorXd h = cfg.rule == BandwidthRule::Explicit
                         ? VectorXd::Constant(pts.cols(), cfg.lengthscale)
                         : silverman_bandwidths(pts);
  const double eps = cfg.kde_epsilon.value_or(1.0 / (n * n));
  auto s = kde_score_at(pts, h, eps, pts);
  check_finite(s, "KDE estimator");
  return s;
}

template <typename Estimator>
ScorePair score_pair(const DataPair& pair, const KernelConfig& cfg, ScoreSource src,
                     Estimator&& est) {
  validate(pair);
  const MatrixXd joint = est(joint_points(pair), cfg);
  const MatrixXd mx = est(column(pair.xs), cfg);
  const MatrixXd my = est(column(pair.ys), cfg);
  ScoreField fwd{to_vec(mx, 0), to_vec(joint, 0), to_vec(joint, 1), src};
  ScoreField rev = swap_roles(fwd, to_vec(my, 0));
  return {std::move(fwd), std::move(rev)};
}

template <typename Estimator>
ScoreField forward_field(const DataPair& pair, const KernelConfig& cfg, ScoreSource src,
                         Estimator&& est) {
  validate(pair);
  const MatrixXd joint = est(joint_points(pair), cfg);
  const MatrixXd mx = est(column(pair.xs), cfg);
  return ScoreField{to_vec(mx, 0), to_vec(joint, 0), to_vec(joint, 1), src};
}

}  // namespace

ScoreField stein_scores(const DataPair& pair, const KernelConfig& config) {
  return forward_field(pair, config, ScoreSource::Stein, stein_on);
}

ScoreField kde_scores(const DataPair& pair, const KernelConfig& config) {
  return forward_field(pair, config, ScoreSource::Kde, kde_on);
}

ScorePair stein_score_pair(const DataPair& pair, const KernelConfig& config) {
  return score_pair(pair, config, ScoreSource::Stein, stein_on);
}

ScorePair kde_score_pair(const DataPair& pair, const KernelConfig& config) {
  return score_pair(pair, config, ScoreSource::Kde, kde_on);
}

void write_score_field(const ScoreField& field, const DataPair& pair,
                       const std::filesystem::path& path) {
  require(field.size() == pair.size(), "score field and dataset differ in length");
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "x,y,sx_marg,sx_joint,sy_joint,source\n";
  for (std::size_t i = 0; i < pair.size(); ++i) {
    out << fmt17(pair.xs[i]) << ',' << fmt17(pair.ys[i]) << ',' << fmt17(field.sx_marg[i])
        << ',' << fmt17(field.sx_joint[i]) << ',' << fmt17(field.sy_joint[i]) << ','
        << to_string(field.source) << '\n';
  }
}

ScoreField read_score_field(const std::filesystem::path& path, DataPair* pair_out) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  ScoreField f;
  DataPair pair;
  std::string line;
  std::size_t lineno = 0;
  std::optional<ScoreSource> src;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double x, y, a, b, c;
    std::string tag;
    if (!(row >> x >> y >> a >> b >> c >> tag) || !(src = parse_score_source(tag)))
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) +
                                      ": malformed score row");
    pair.xs.push_back(x);
    pair.ys.push_back(y);
    f.sx_marg.push_back(a);
    f.sx_joint.push_back(b);
    f.sy_joint.push_back(c);
    f.source = *src;
  }
  if (pair_out) *pair_out = std::move(pair);
  return f;
}

}  // namespace velcd
