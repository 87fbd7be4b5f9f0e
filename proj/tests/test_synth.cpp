#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "velcd/error.hpp"
#include "velcd/synth.hpp"

using namespace velcd;

namespace {

double corr(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Pointwise continuity-identity residual of the true velocity under the
// closed-form scores of X ~ N(0,1), eps ~ N(0, sigma^2).
double oracle_residual(const MechanismOracle& m, double x, double y) {
  const InverseDerivs d = m.inverse(x, y);
  const double s2 = m.sigma_y() * m.sigma_y();
  const double sx = -x;
  const double sxj = -x - d.inv / s2 * d.d_x + d.d_xy / d.d_y;
  const double syj = -d.inv / s2 * d.d_y + d.d_yy / d.d_y;
  return sx - m.velocity_dy(y, x) - (sxj + m.velocity(y, x) * syj);
}

}  // namespace

TEST_CASE("TMI maps") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-4, 4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TmiMap t = TmiMap::sample(seed);
    CHECK(t.apply(0.0) == 0.0);
    for (int k = 0; k < 20; ++k) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      if (a < b) CHECK(t.apply(a) < t.apply(b));
    }
  }
  const MlpArch arch{1, {64, 64, 64}};
  const TmiMap zero(arch, std::vector<double>(arch.param_count(), 0.0));
  for (double x : {-3.0, -0.5, 0.0, 1.0, 2.5})
    CHECK(zero.apply(x) == doctest::Approx(x * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("TMI batch agrees with pointwise quadrature") {
  const TmiMap t = TmiMap::sample(9);
  const std::vector<double> xs{1.5, -2.0, 0.0, 0.3, -0.1, 3.0, 1.5};
  const auto many = t.apply_many(xs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(many[i] - t.apply(xs[i])) < 1e-9);
}

TEST_CASE("family defaults") {
  auto v = BenchmarkSpec::defaults(BenchFamily::Velocity);
  CHECK(v.sigma_theta == 1.0);
  CHECK(v.sigma_y == 1.0);
  auto s = BenchmarkSpec::defaults(BenchFamily::Sigmoid);
  CHECK(s.sigma_theta == 0.2);
  CHECK(s.sigma_y == 3.0);
  for (BenchFamily f : {BenchFamily::Anm, BenchFamily::Lsnm, BenchFamily::AnmGauss,
                        BenchFamily::LsnmGauss}) {
    CHECK(BenchmarkSpec::defaults(f).sigma_theta == 0.2);
    CHECK(BenchmarkSpec::defaults(f).sigma_y == 0.2);
    CHECK(parse_bench_family(to_string(f)) == f);
  }
  BenchmarkSpec bad;
  bad.sigma_y = 0;
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("null ANM mechanism leaves y independent of x") {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::Anm);
  spec.n = 5000;
  spec.zero_mechanism = true;
  const DataPair p = generate_dataset(spec, 0);
  CHECK(std::abs(corr(p.xs, p.ys)) < 0.05);
  CHECK(p.truth == Direction::XtoY);
}

TEST_CASE("constant-velocity family shifts the noise by x") {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::Velocity);
  spec.n = 200;
  spec.velocity_theta = std::vector<double>{1, 0, 0, 0, 0, 0};
  spec.zero_mechanism = false;
  const auto d = generate_synthetic(spec, 3);
  for (double x : {-2.0, 0.5, 3.0})
    for (double e : {-1.0, 0.2})
      CHECK(std::abs(d.mechanism->mechanism(x, e) - (x + e)) < 1e-6);
  // With theta = 0 the same draws give y = eps directly.
  BenchmarkSpec null = spec;
  null.velocity_theta.reset();
  null.zero_mechanism = true;
  const DataPair z = generate_dataset(null, 3);
  REQUIRE(z.xs == d.pair.xs);
  for (std::size_t i = 0; i < z.size(); ++i)
    CHECK(std::abs(d.pair.ys[i] - (z.ys[i] + z.xs[i])) < 1e-6);
}

TEST_CASE("sigmoid mechanism with b = 0 and zero noise") {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::Sigmoid);
  spec.n = 10;
  const auto d = generate_synthetic(spec, 1);
  auto m = std::dynamic_pointer_cast<const SigmoidMechanism>(d.mechanism);
  REQUIRE(m);
  SigmoidMechanism stub = *m;
  for (auto& b : stub.b_params()) b = 0.0;
  const auto again = std::dynamic_pointer_cast<const SigmoidMechanism>(generate_synthetic(spec, 1).mechanism);
  SigmoidMechanism stub2 = *again;
  for (auto& b : stub2.b_params()) b = 0.0;
  for (double x : {-2.0, 0.0, 1.3}) {
    const double y = stub.mechanism(x, 0.0);
    CHECK(std::isfinite(y));
    CHECK(y == stub2.mechanism(x, 0.0));
    CHECK(y == stub.mechanism(x, 0.0));
  }
}

TEST_CASE("probit of sigmoid stays finite") {
  CHECK(probit_of_sigmoid(0.0) == doctest::Approx(0.0));
  for (double t : {-800.0, -50.0, 50.0, 800.0}) CHECK(std::isfinite(probit_of_sigmoid(t)));
  CHECK(probit_of_sigmoid(-50.0) < probit_of_sigmoid(-40.0));
  CHECK(probit_of_sigmoid(3.0) == doctest::Approx(-probit_of_sigmoid(-3.0)).epsilon(1e-12));
}

TEST_CASE("Gaussian oracle inverses") {
  for (BenchFamily f : {BenchFamily::AnmGauss, BenchFamily::LsnmGauss}) {
    BenchmarkSpec spec = BenchmarkSpec::defaults(f);
    spec.n = 30;
    const auto d = generate_gaussian_oracle(spec, 2);
    const auto& m = *d.mechanism;
    const double h = 1e-5;
    for (std::size_t i = 0; i < d.pair.size(); ++i) {
      const double x = d.pair.xs[i], y = d.pair.ys[i];
      const InverseDerivs inv = m.inverse(x, y);
      CHECK(std::abs(m.mechanism(x, inv.inv) - y) < 1e-10);
      const auto at = [&](double a, double b) { return m.inverse(a, b).inv; };
      CHECK(inv.d_x == doctest::Approx((at(x + h, y) - at(x - h, y)) / (2 * h)).epsilon(1e-6));
      CHECK(inv.d_y == doctest::Approx((at(x, y + h) - at(x, y - h)) / (2 * h)).epsilon(1e-6));
      CHECK(inv.d_yy == 0.0);
    }
    if (f == BenchFamily::AnmGauss) {
      const auto& a = dynamic_cast<const AnmMechanism&>(m);
      const InverseDerivs inv = m.inverse(0.4, 1.0);
      CHECK(inv.inv == doctest::Approx(1.0 - a.m(0.4)));
      CHECK(inv.d_y == 1.0);
      CHECK(inv.d_xy == 0.0);
    } else {
      const auto& l = dynamic_cast<const LsnmMechanism&>(m);
      const auto parts = l.parts(0.4);
      CHECK(m.inverse(0.4, 1.0).d_y == doctest::Approx(1.0 / parts.s));
      CHECK(parts.s > 0.2);
    }
  }
}

TEST_CASE("true velocities satisfy the continuity identity") {
  for (BenchFamily f : {BenchFamily::AnmGauss, BenchFamily::LsnmGauss}) {
    BenchmarkSpec spec = BenchmarkSpec::defaults(f);
    spec.n = 200;
    for (std::size_t idx = 0; idx < 3; ++idx) {
      const auto d = generate_gaussian_oracle(spec, idx);
      double worst = 0;
      for (std::size_t i = 0; i < d.pair.size(); ++i)
        worst = std::max(worst, std::abs(oracle_residual(*d.mechanism, d.pair.xs[i], d.pair.ys[i])));
      CHECK(worst < 1e-8);
    }
  }
}

TEST_CASE("generation is deterministic and index-addressed") {
  for (BenchFamily f : {BenchFamily::Velocity, BenchFamily::Sigmoid, BenchFamily::Anm,
                        BenchFamily::Lsnm, BenchFamily::AnmGauss, BenchFamily::LsnmGauss}) {
    INFO(to_string(f));
    BenchmarkSpec spec = BenchmarkSpec::defaults(f);
    spec.n = 100;
    spec.master_seed = 77;
    const DataPair a = generate_dataset(spec, 4), b = generate_dataset(spec, 4);
    CHECK(a.xs == b.xs);
    CHECK(a.ys == b.ys);
    const DataPair c = generate_dataset(spec, 5);
    CHECK(a.xs != c.xs);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::isfinite(a.xs[i]));
      CHECK(std::isfinite(a.ys[i]));
    }
  }
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("TMI marginals have no ties") {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::Lsnm);
  spec.n = 2000;
  DataPair p = generate_dataset(spec, 0);
  std::sort(p.xs.begin(), p.xs.end());
  CHECK(std::adjacent_find(p.xs.begin(), p.xs.end()) == p.xs.end());
}

TEST_CASE("Gaussian oracles only for Gaussian families") {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::Anm);
  spec.n = 10;
  CHECK_THROWS_AS(generate_gaussian_oracle(spec, 0), Error);
  CHECK(has_gaussian_oracle(BenchFamily::LsnmGauss));
  CHECK_FALSE(has_gaussian_oracle(BenchFamily::Lsnm));
}
