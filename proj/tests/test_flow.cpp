#include <doctest.h>

#include <cmath>
#include <random>

#include "velcd/error.hpp"
#include "velcd/flow.hpp"
#include "velcd/synth.hpp"

using namespace velcd;

namespace {

IntegratorConfig tight() {
  IntegratorConfig c;
  c.rtol = 1e-10;
  c.atol = 1e-10;
  return c;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("ANM flow of m(x) = x^2") {
  const VelocityFn v = [](double, double x) { return 2 * x; };
  for (double y : {-1.0, 0.0, 3.5}) CHECK(integrate_flow(v, y, 0, 2) == doctest::Approx(y + 4));
}

TEST_CASE("flow identity") {
  const VelocityFn v = [](double y, double x) { return std::sin(x * y) + 3; };
  CHECK(integrate_flow(v, 1.234, 0.7, 0.7) == 1.234);
}

TEST_CASE("LSNM flow with m = 0 and h(x) = x") {
  const VelocityFn v = [](double y, double) { return y; };
  for (double y : {-2.0, 0.5, 1.0})
    CHECK(std::abs(integrate_flow(v, y, 0, 1, tight()) - std::exp(1.0) * y) < 1e-8);
  // Backward in time undoes it.
  CHECK(std::abs(integrate_flow(v, std::exp(1.0), 1, 0, tight()) - 1.0) < 1e-8);
}

TEST_CASE("causal curves") {
  const VelocityFn c = [](double, double) { return 0.75; };
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(-1 + 0.3 * i);
  const auto line = causal_curve(c, 2.0, -1.0, grid);
  REQUIRE(line.size() == grid.size());
  for (const auto& [x, y] : line) CHECK(y == doctest::Approx(2.0 + 0.75 * (x + 1.0)));

  const auto single = causal_curve(c, 2.0, 0.4, {0.4});
  REQUIRE(single.size() == 1);
  CHECK(single[0].first == 0.4);
  CHECK(single[0].second == 2.0);

  const VelocityFn s = [](double, double x) { return std::sin(x); };
  std::vector<double> g2;
  for (int i = 0; i <= 60; ++i) g2.push_back(-3 + 0.1 * i);
  const double x0 = -3, y0 = 0.5;
  double worst = 0;
  for (const auto& [x, y] : causal_curve(s, y0, x0, g2))
    worst = std::max(worst, std::abs(y - (y0 + std::cos(x0) - std::cos(x))));
  CHECK(worst < 1e-8);
}

TEST_CASE("residual extraction") {
  BenchmarkSpec spec = BenchmarkSpec::defaults(BenchFamily::AnmGauss);
  spec.n = 40;
  const auto d = generate_gaussian_oracle(spec, 0);
  const auto& m = dynamic_cast<const AnmMechanism&>(*d.mechanism);
  const VelocityFn v = [&](double y, double x) { return m.velocity(y, x); };
  const double x0 = 0.3;
  const auto eps = extract_residuals(v, d.pair, x0);
  for (std::size_t i = 0; i < d.pair.size(); ++i) {
    CHECK(std::abs(eps[i] - (d.pair.ys[i] - m.m(d.pair.xs[i]) + m.m(x0))) < 1e-6);
    CHECK(std::abs(integrate_flow(v, eps[i], x0, d.pair.xs[i]) - d.pair.ys[i]) < 1e-6);
  }
  const VelocityFn zero = [](double, double) { return 0.0; };
  CHECK(extract_residuals(zero, d.pair, x0) == d.pair.ys);
}

TEST_CASE("composition and inverse") {
  const VelocityFn v = [](double y, double x) { return std::sin(y) * std::cos(x) + 0.5 * std::tanh(x - y); };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 50; ++k) {
    const double a = u(rng), b = u(rng), c = u(rng), y = u(rng);
    const double ab = integrate_flow(v, y, a, b);
    CHECK(std::abs(integrate_flow(v, ab, b, c) - integrate_flow(v, y, a, c)) < 1e-6);
    CHECK(std::abs(integrate_flow(v, ab, b, a) - y) < 1e-6);
  }
}

TEST_CASE("RK4 converges at fourth order") {
  const VelocityFn v = [](double y, double x) { return std::cos(x) * y + std::sin(y); };
  const double ref = integrate_flow(v, 0.4, 0.0, 2.0, tight());
  IntegratorConfig rk;
  rk.method = Integrator::Rk4Fixed;
  rk.step = 0.1;
  const double e1 = std::abs(integrate_flow(v, 0.4, 0.0, 2.0, rk) - ref);
  rk.step = 0.05;
  const double e2 = std::abs(integrate_flow(v, 0.4, 0.0, 2.0, rk) - ref);
  INFO(e1 << " " << e2);
  CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("flow failures") {
  const VelocityFn blowup = [](double y, double) { return y * y; };
  CHECK(code_of([&] { integrate_flow(blowup, 1.0, 0.0, 2.0); }) == ErrorCode::NonFiniteState);
  IntegratorConfig few;
  few.max_steps = 3;
  const VelocityFn wiggle = [](double, double x) { return std::sin(50 * x); };
  CHECK(code_of([&] { integrate_flow(wiggle, 0.0, 0.0, 5.0, few); }) == ErrorCode::StepLimitExceeded);
  IntegratorConfig bad;
  bad.rtol = -1;
  CHECK(code_of([&] { validate(bad); }) == ErrorCode::InvalidArgument);
  DataPair p;
  // Only the first point reaches x0 = 5 before y = 1 / (x_i + 1 - x) blows up.
  p.xs = {4.5, 1.5, 3.0};
  p.ys = {1.0, 1.0, 1.0};
  try {
    extract_residuals(blowup, p, 5.0);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IntegrationFailure);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("fitted model as a velocity function") {
  VelocityModel m{Family::BLin, {}, {0.5, 0, 0}, 0};
  CHECK(integrate_flow(as_function(m), 1.0, 0.0, 2.0) == doctest::Approx(2.0));
}
