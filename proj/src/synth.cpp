#include "velcd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "velcd/error.hpp"
#include "velcd/flow.hpp"

namespace velcd {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 over a mix of both words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

constexpr double kShortSegment = 0.05;
constexpr double kQuadTol = 1e-10;
constexpr double kQuadMaxErr = 1e-6;

MlpArch scalar_net(int depth) { return MlpArch{1, std::vector<int>(static_cast<std::size_t>(depth), 64)}; }

std::vector<double> net_params(const MlpArch& arch, std::uint64_t seed, double sd, bool zero) {
  if (zero) return std::vector<double>(arch.param_count(), 0.0);
  return mlp_random_params(arch, seed, sd, false, true);
}

}  // namespace

TmiMap::TmiMap(MlpArch arch, std::vector<double> params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  require(arch_.input_dim == 1, "TMI network takes a scalar input");
  require(params_.size() == arch_.param_count(), "TMI parameter count mismatch");
}

TmiMap TmiMap::sample(std::uint64_t seed, double param_sd) {
  const MlpArch arch = scalar_net(3);
  return TmiMap(arch, mlp_random_params(arch, seed, param_sd, false, true));
}

double TmiMap::integrand(double u) const {
  return softplus(mlp_eval(arch_, params_, std::span<const double>(&u, 1)));
}

namespace {

double segment(const TmiMap& t, double a, double b) {
  if (a == b) return 0.0;
  double err = 0.0;
  const double lo = std::min(a, b), hi = std::max(a, b);
  // Short pieces get a single Kronrod panel: the integrand is smooth, and the
  // relative tolerance is unreachable there once the error hits roundoff.
  const unsigned depth = hi - lo > kShortSegment ? 15 : 0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      [&t](double u) { return t.integrand(u); }, lo, hi, depth, kQuadTol, &err);
  if (!std::isfinite(val) || err > kQuadMaxErr) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "TMI integral over [%g, %g] has error %g", lo, hi, err);
    fail(ErrorCode::QuadratureFailure, buf);
  }
  return a < b ? val : -val;
}

}  // namespace

double TmiMap::apply(double x) const {
  require(std::isfinite(x), "TMI input must be finite");
  return segment(*this, 0.0, x);
}

std::vector<double> TmiMap::apply_many(std::span<const double> xs) const {
  for (double x : xs) require(std::isfinite(x), "TMI input must be finite");
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  const auto first_pos = static_cast<std::size_t>(
      std::partition_point(order.begin(), order.end(), [&](std::size_t i) { return xs[i] < 0.0; }) -
      order.begin());

  std::vector<double> out(xs.size());
  double at = 0.0, acc = 0.0;
  for (std::size_t k = first_pos; k < order.size(); ++k) {
    acc += segment(*this, at, xs[order[k]]);
    at = xs[order[k]];
    out[order[k]] = acc;
  }
  at = 0.0;
  acc = 0.0;
  for (std::size_t k = first_pos; k-- > 0;) {
    acc += segment(*this, at, xs[order[k]]);
    at = xs[order[k]];
    out[order[k]] = acc;
  }
  return out;
}

const char* to_string(BenchFamily f) noexcept {
  switch (f) {
    case BenchFamily::Velocity: return "velocity";
    case BenchFamily::Sigmoid: return "sigmoid";
    case BenchFamily::Anm: return "anm";
    case BenchFamily::Lsnm: return "lsnm";
    case BenchFamily::AnmGauss: return "anm-gauss";
    case BenchFamily::LsnmGauss: return "lsnm-gauss";
  }
  return "?";
}

std::optional<BenchFamily> parse_bench_family(std::string_view s) {
  std::string t(s);
  for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::replace(t.begin(), t.end(), '_', '-');
  for (auto f : {BenchFamily::Velocity, BenchFamily::Sigmoid, BenchFamily::Anm, BenchFamily::Lsnm,
                 BenchFamily::AnmGauss, BenchFamily::LsnmGauss})
    if (t == to_string(f)) return f;
  return std::nullopt;
}

bool has_gaussian_oracle(BenchFamily f) noexcept {
  return f == BenchFamily::AnmGauss || f == BenchFamily::LsnmGauss;
}

BenchmarkSpec BenchmarkSpec::defaults(BenchFamily family) {
  BenchmarkSpec s;
  s.family = family;
  switch (family) {
    case BenchFamily::Velocity: s.sigma_theta = 1.0; s.sigma_y = 1.0; break;
    case BenchFamily::Sigmoid: s.sigma_theta = 0.2; s.sigma_y = 3.0; break;
    default: s.sigma_theta = 0.2; s.sigma_y = 0.2; break;
  }
  return s;
}

void validate(const BenchmarkSpec& spec) {
  require(spec.sigma_theta > 0.0 && std::isfinite(spec.sigma_theta), "sigma_theta must be positive");
  require(spec.sigma_y > 0.0 && std::isfinite(spec.sigma_y), "sigma_y must be positive");
  require(spec.n >= 2, "datasets need at least 2 points");
  require(spec.n_datasets >= 1, "need at least one dataset");
  if (spec.velocity_theta) require(spec.velocity_theta->size() == 6, "velocity theta has 6 entries");
}

// ---- ANM

AnmMechanism::AnmMechanism(MlpArch arch, std::vector<double> m_params, double sigma_y)
    : arch_(std::move(arch)), m_(std::move(m_params)), sigma_y_(sigma_y) {
  require(m_.size() == arch_.param_count(), "ANM parameter count mismatch");
}

double AnmMechanism::m(double x) const { return mlp_eval(arch_, m_, std::span<const double>(&x, 1)); }

double AnmMechanism::mechanism(double x, double eps) const { return m(x) + eps; }

InverseDerivs AnmMechanism::inverse(double x, double y) const {
  const ValueSlope f = mlp_eval_d1(arch_, m_, x);
  return {y - f.value, -f.slope, 1.0, 0.0, 0.0};
}

double AnmMechanism::velocity(double, double x) const { return mlp_eval_d1(arch_, m_, x).slope; }
double AnmMechanism::velocity_dy(double, double) const { return 0.0; }

bool AnmMechanism::location_scale(std::span<const double> xs, std::span<double> loc,
                                  std::span<double> scale) const {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    loc[i] = m(xs[i]);
    scale[i] = 1.0;
  }
  return true;
}

// ---- LSNM

LsnmMechanism::LsnmMechanism(MlpArch arch, std::vector<double> m_params,
                             std::vector<double> h_params, double sigma_y)
    : arch_(std::move(arch)), m_(std::move(m_params)), h_(std::move(h_params)), sigma_y_(sigma_y) {
  require(m_.size() == arch_.param_count() && h_.size() == arch_.param_count(),
          "LSNM parameter count mismatch");
}

LsnmMechanism::Parts LsnmMechanism::parts(double x) const {
  const ValueSlope m = mlp_eval_d1(arch_, m_, x);
  const ValueSlope h = mlp_eval_d1(arch_, h_, x);
  const double e = std::exp(-h.value * h.value);
  return {m.value, m.slope, e + 0.2, -2.0 * h.value * h.slope * e};
}

double LsnmMechanism::mechanism(double x, double eps) const {
  const Parts p = parts(x);
  return p.m + p.s * eps;
}

InverseDerivs LsnmMechanism::inverse(double x, double y) const {
  const Parts p = parts(x);
  const double r = y - p.m;
  InverseDerivs d;
  d.inv = r / p.s;
  d.d_x = -p.dm / p.s - r * p.ds / (p.s * p.s);
  d.d_y = 1.0 / p.s;
  d.d_xy = -p.ds / (p.s * p.s);
  d.d_yy = 0.0;
  return d;
}

double LsnmMechanism::velocity(double y, double x) const {
  const Parts p = parts(x);
  return p.dm + p.ds / p.s * (y - p.m);
}

double LsnmMechanism::velocity_dy(double, double x) const {
  const Parts p = parts(x);
  return p.ds / p.s;
}

bool LsnmMechanism::location_scale(std::span<const double> xs, std::span<double> loc,
                                   std::span<double> scale) const {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Parts p = parts(xs[i]);
    loc[i] = p.m;
    scale[i] = p.s;
  }
  return true;
}

// ---- linear Gaussian

InverseDerivs LinearGaussianMechanism::inverse(double x, double y) const {
  return {y - beta_ * x, -beta_, 1.0, 0.0, 0.0};
}

bool LinearGaussianMechanism::location_scale(std::span<const double> xs, std::span<double> loc,
                                             std::span<double> scale) const {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    loc[i] = beta_ * xs[i];
    scale[i] = 1.0;
  }
  return true;
}

// ---- periodic velocity

PeriodicVelocityMechanism::PeriodicVelocityMechanism(std::vector<double> theta, double sigma_y)
    : theta_(std::move(theta)), sigma_y_(sigma_y) {
  require(theta_.size() == 6, "velocity theta has 6 entries");
}

double PeriodicVelocityMechanism::velocity(double y, double x) const {
  const auto& t = theta_;
  return t[0] + t[1] * std::sin(x) + t[2] * std::sin(y) + t[3] * std::cos(x) + t[4] * std::cos(y) +
         t[5] * std::sin(x + y);
}

double PeriodicVelocityMechanism::velocity_dy(double y, double x) const {
  const auto& t = theta_;
  return t[2] * std::cos(y) - t[4] * std::sin(y) + t[5] * std::cos(x + y);
}

double PeriodicVelocityMechanism::mechanism(double x, double eps) const {
  return integrate_flow([this](double y, double u) { return velocity(y, u); }, eps, 0.0, x);
}

InverseDerivs PeriodicVelocityMechanism::inverse(double, double) const {
  fail(ErrorCode::NonInvertibleMechanism, "velocity-family mechanism has no closed-form inverse");
}

// ---- sigmoid

double probit_of_sigmoid(double t) {
  t = std::clamp(t, -700.0, 700.0);
  // Phi^{-1}(p) = -sqrt(2) erfc^{-1}(2p); use the small tail for accuracy.
  const double tail = 1.0 / (1.0 + std::exp(std::abs(t)));  // sigmoid(-|t|)
  const double q = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * tail);
  return t > 0.0 ? -q : q;
}

SigmoidMechanism::SigmoidMechanism(MlpArch arch, std::vector<double> a, std::vector<double> b,
                                   std::vector<double> c, std::vector<double> d, double sigma_y)
    : arch_(std::move(arch)),
      a_(std::move(a)),
      b_(std::move(b)),
      c_(std::move(c)),
      d_(std::move(d)),
      sigma_y_(sigma_y) {
  const std::size_t p = arch_.param_count();
  require(a_.size() == p && b_.size() == p && c_.size() == p && d_.size() == p,
          "sigmoid parameter count mismatch");
}

double SigmoidMechanism::mechanism(double x, double eps) const {
  const std::span<const double> in(&x, 1);
  const double a = mlp_eval(arch_, a_, in);
  const double b = mlp_eval(arch_, b_, in);
  const double c = mlp_eval(arch_, c_, in);
  const double d = mlp_eval(arch_, d_, in);
  return c + std::exp(-d * d) * probit_of_sigmoid(a + std::exp(-b * b) * eps);
}

InverseDerivs SigmoidMechanism::inverse(double, double) const {
  fail(ErrorCode::NonInvertibleMechanism, "sigmoid mechanism has no oracle inverse");
}

namespace {

// log Phi(z) - log Phi(-z)
double logit_of_phi(double z) {
  const double lp = std::log(0.5 * std::erfc(-z / std::sqrt(2.0)));
  const double lq = std::log(0.5 * std::erfc(z / std::sqrt(2.0)));
  return lp - lq;
}

}  // namespace

double SigmoidMechanism::velocity(double y, double x) const {
  // Recover eps at (x, y), then differentiate the mechanism in x.
  const std::span<const double> in(&x, 1);
  const double a = mlp_eval(arch_, a_, in);
  const double b = mlp_eval(arch_, b_, in);
  const double c = mlp_eval(arch_, c_, in);
  const double d = mlp_eval(arch_, d_, in);
  const double eps = (logit_of_phi((y - c) / std::exp(-d * d)) - a) / std::exp(-b * b);
  const double h = 1e-5;
  return (mechanism(x + h, eps) - mechanism(x - h, eps)) / (2.0 * h);
}

double SigmoidMechanism::velocity_dy(double y, double x) const {
  const double h = 1e-5;
  return (velocity(y + h, x) - velocity(y - h, x)) / (2.0 * h);
}

// ---- generation

namespace {

enum Tag : std::uint64_t { kNoise = 1, kTmiX = 2, kTmiEps = 3, kMech = 4 };

std::string dataset_id(BenchFamily f, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%05zu", to_string(f), index);
  return buf;
}

std::shared_ptr<const MechanismOracle> make_mechanism(const BenchmarkSpec& spec, std::uint64_t seed) {
  const double sd = spec.sigma_theta;
  const bool zero = spec.zero_mechanism;
  switch (spec.family) {
    case BenchFamily::Anm:
    case BenchFamily::AnmGauss: {
      const MlpArch arch = scalar_net(3);
      return std::make_shared<AnmMechanism>(arch, net_params(arch, derive_seed(seed, 0), sd, zero),
                                            spec.sigma_y);
    }
    case BenchFamily::Lsnm:
    case BenchFamily::LsnmGauss: {
      const MlpArch arch = scalar_net(2);
      return std::make_shared<LsnmMechanism>(arch, net_params(arch, derive_seed(seed, 0), sd, zero),
                                             net_params(arch, derive_seed(seed, 1), sd, zero),
                                             spec.sigma_y);
    }
    case BenchFamily::Sigmoid: {
      const MlpArch arch = scalar_net(2);
      return std::make_shared<SigmoidMechanism>(
          arch, net_params(arch, derive_seed(seed, 0), sd, zero),
          net_params(arch, derive_seed(seed, 1), sd, zero),
          net_params(arch, derive_seed(seed, 2), sd, zero),
          net_params(arch, derive_seed(seed, 3), sd, zero), spec.sigma_y);
    }
    case BenchFamily::Velocity: {
      std::vector<double> theta(6, 0.0);
      if (spec.velocity_theta) {
        theta = *spec.velocity_theta;
      } else if (!zero) {
        std::mt19937_64 rng(derive_seed(seed, 0));
        std::normal_distribution<double> normal(0.0, sd);
        for (double& t : theta) t = normal(rng);
      }
      return std::make_shared<PeriodicVelocityMechanism>(std::move(theta), spec.sigma_y);
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown benchmark family");
}

}  // namespace

SyntheticDataset generate_synthetic(const BenchmarkSpec& spec, std::size_t index) {
  validate(spec);
  const std::uint64_t seed = derive_seed(spec.master_seed, index);
  const std::size_t n = spec.n;

  std::vector<double> xi_x(n), xi_y(n);
  {
    std::mt19937_64 rng(derive_seed(seed, kNoise));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : xi_x) v = normal(rng);
    for (double& v : xi_y) v = normal(rng);
  }

  std::vector<double> xs, eps;
  if (has_gaussian_oracle(spec.family)) {
    xs = xi_x;
    eps = xi_y;
  } else {
    xs = TmiMap::sample(derive_seed(seed, kTmiX)).apply_many(xi_x);
    eps = TmiMap::sample(derive_seed(seed, kTmiEps)).apply_many(xi_y);
  }
  for (double& e : eps) e *= spec.sigma_y;

  auto mech = make_mechanism(spec, derive_seed(seed, kMech));
  std::vector<double> ys(n);
  std::size_t failed = 0;
  std::string first_error;
  for (std::size_t i = 0; i < n; ++i) {
    try {
      ys[i] = mech->mechanism(xs[i], eps[i]);
    } catch (const Error& e) {
      if (spec.family != BenchFamily::Velocity) throw;
      if (failed++ == 0) first_error = "point " + std::to_string(i) + ": " + e.what();
    }
  }
  if (failed)
    fail(ErrorCode::IntegrationFailure, std::to_string(failed) + " trajectories failed; " + first_error);

  SyntheticDataset out;
  out.pair.xs = std::move(xs);
  out.pair.ys = std::move(ys);
  out.pair.truth = Direction::XtoY;
  out.pair.id = dataset_id(spec.family, index);
  out.pair.seed = seed;
  out.mechanism = std::move(mech);
  return out;
}

DataPair generate_dataset(const BenchmarkSpec& spec, std::size_t index) {
  return generate_synthetic(spec, index).pair;
}

SyntheticDataset generate_gaussian_oracle(const BenchmarkSpec& spec, std::size_t index) {
  require(has_gaussian_oracle(spec.family), "analytic oracles exist for anm-gauss and lsnm-gauss only");
  return generate_synthetic(spec, index);
}

}  // namespace velcd
