#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "velcd/dataset.hpp"
#include "velcd/mlp.hpp"
#include "velcd/scores.hpp"

namespace velcd {

// Derive an independent stream seed from (seed, tag).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Strictly increasing noise transform T(x) = int_0^x softplus(f(u)) du with
/// f a random tanh network (3 hidden layers of 64, parameters ~ N(0, 0.3^2)).
class TmiMap {
 public:
  static TmiMap sample(std::uint64_t seed, double param_sd = 0.3);
  TmiMap(MlpArch arch, std::vector<double> params);

  double integrand(double u) const;
  double apply(double x) const;
  // Same as apply() element-wise, integrating once along the sorted inputs.
  std::vector<double> apply_many(std::span<const double> xs) const;

  const MlpArch& arch() const { return arch_; }
  std::vector<double>& params() { return params_; }

 private:
  MlpArch arch_;
  std::vector<double> params_;
};

enum class BenchFamily { Velocity, Sigmoid, Anm, Lsnm, AnmGauss, LsnmGauss };

const char* to_string(BenchFamily f) noexcept;  // "velocity", "sigmoid", "anm", ...
std::optional<BenchFamily> parse_bench_family(std::string_view s);
bool has_gaussian_oracle(BenchFamily f) noexcept;

struct BenchmarkSpec {
  BenchFamily family = BenchFamily::AnmGauss;
  std::size_t n_datasets = 100;
  std::size_t n = 5000;
  double sigma_theta = 0.2;
  double sigma_y = 0.2;
  std::uint64_t master_seed = 0;

  // Test hooks: zero all mechanism parameters; fix the Velocity-family theta.
  bool zero_mechanism = false;
  std::optional<std::vector<double>> velocity_theta;

  // Parameter scales of the published settings for each family.
  static BenchmarkSpec defaults(BenchFamily family);
};

void validate(const BenchmarkSpec& spec);

// y = m(x) + eps
class AnmMechanism final : public MechanismOracle {
 public:
  AnmMechanism(MlpArch arch, std::vector<double> m_params, double sigma_y);

  double sigma_y() const override { return sigma_y_; }
  double mechanism(double x, double eps) const override;
  InverseDerivs inverse(double x, double y) const override;
  double velocity(double y, double x) const override;
  double velocity_dy(double y, double x) const override;
  bool location_scale(std::span<const double> xs, std::span<double> loc,
                      std::span<double> scale) const override;

  double m(double x) const;

 private:
  MlpArch arch_;
  std::vector<double> m_;
  double sigma_y_;
};

// y = m(x) + s(x) eps with s(x) = exp(-h(x)^2) + 0.2
class LsnmMechanism final : public MechanismOracle {
 public:
  LsnmMechanism(MlpArch arch, std::vector<double> m_params, std::vector<double> h_params,
                double sigma_y);

  double sigma_y() const override { return sigma_y_; }
  double mechanism(double x, double eps) const override;
  InverseDerivs inverse(double x, double y) const override;
  double velocity(double y, double x) const override;
  double velocity_dy(double y, double x) const override;
  bool location_scale(std::span<const double> xs, std::span<double> loc,
                      std::span<double> scale) const override;

  struct Parts {
    double m, dm, s, ds;
  };
  Parts parts(double x) const;

 private:
  MlpArch arch_;
  std::vector<double> m_, h_;
  double sigma_y_;
};

// y = beta x + eps: the jointly Gaussian, non-identifiable case.
class LinearGaussianMechanism final : public MechanismOracle {
 public:
  LinearGaussianMechanism(double beta, double sigma_y) : beta_(beta), sigma_y_(sigma_y) {}

  double sigma_y() const override { return sigma_y_; }
  double mechanism(double x, double eps) const override { return beta_ * x + eps; }
  InverseDerivs inverse(double x, double y) const override;
  double velocity(double, double) const override { return beta_; }
  double velocity_dy(double, double) const override { return 0.0; }
  bool location_scale(std::span<const double> xs, std::span<double> loc,
                      std::span<double> scale) const override;

 private:
  double beta_, sigma_y_;
};

// y = phi_{0,x}(eps) for v(y,u) = theta . (1, sin u, sin y, cos u, cos y, sin(u+y)).
class PeriodicVelocityMechanism final : public MechanismOracle {
 public:
  explicit PeriodicVelocityMechanism(std::vector<double> theta, double sigma_y);

  double sigma_y() const override { return sigma_y_; }
  bool invertible() const override { return false; }
  double mechanism(double x, double eps) const override;
  InverseDerivs inverse(double x, double y) const override;
  double velocity(double y, double x) const override;
  double velocity_dy(double y, double x) const override;

 private:
  std::vector<double> theta_;
  double sigma_y_;
};

// y = c(x) + exp(-d(x)^2) Phi^{-1}(sigmoid(a(x) + exp(-b(x)^2) eps))
class SigmoidMechanism final : public MechanismOracle {
 public:
  SigmoidMechanism(MlpArch arch, std::vector<double> a, std::vector<double> b,
                   std::vector<double> c, std::vector<double> d, double sigma_y);

  double sigma_y() const override { return sigma_y_; }
  bool invertible() const override { return false; }
  double mechanism(double x, double eps) const override;
  InverseDerivs inverse(double x, double y) const override;
  double velocity(double y, double x) const override;
  double velocity_dy(double y, double x) const override;

  std::vector<double>& b_params() { return b_; }

 private:
  MlpArch arch_;
  std::vector<double> a_, b_, c_, d_;
  double sigma_y_;
};

// Phi^{-1}(sigmoid(t)) without overflow for large |t|.
double probit_of_sigmoid(double t);

struct SyntheticDataset {
  DataPair pair;
  std::shared_ptr<const MechanismOracle> mechanism;
};

/// Fully determined by (spec.master_seed, index). Truth is always XtoY.
SyntheticDataset generate_synthetic(const BenchmarkSpec& spec, std::size_t index);
DataPair generate_dataset(const BenchmarkSpec& spec, std::size_t index);
// Gaussian-noise families only (ANM-Gauss, LSNM-Gauss).
SyntheticDataset generate_gaussian_oracle(const BenchmarkSpec& spec, std::size_t index);

}  // namespace velcd
