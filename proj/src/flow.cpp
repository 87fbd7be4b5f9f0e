#include "velcd/flow.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "velcd/error.hpp"

namespace velcd {

namespace odeint = boost::numeric::odeint;

VelocityFn as_function(const VelocityModel& model) {
  auto ev = std::make_shared<VelocityEvaluator>(model.family, model.arch);
  auto theta = std::make_shared<std::vector<double>>(model.theta);
  return [ev, theta](double y, double x) {
    ev->forward(*theta, Eigen::VectorXd::Constant(1, y), Eigen::VectorXd::Constant(1, x), false);
    return ev->v()(0);
  };
}

void validate(const IntegratorConfig& c) {
  require(c.max_steps >= 1, "max_steps must be >= 1");
  if (c.method == Integrator::Rk4Fixed)
    require(c.step > 0.0, "RK4 step must be positive");
  else
    require(c.rtol > 0.0 && c.atol > 0.0, "tolerances must be positive");
}

namespace {

using Rk4 = odeint::runge_kutta4<double, double, double, double, odeint::vector_space_algebra>;
using Dopri5 =
    odeint::runge_kutta_dopri5<double, double, double, double, odeint::vector_space_algebra>;

void check_state(double y, double u) {
  if (!std::isfinite(y)) {
    std::ostringstream msg;
    msg << "state diverged at u = " << u;
    fail(ErrorCode::NonFiniteState, msg.str());
  }
}

}  // namespace

double integrate_flow(const VelocityFn& v, double y0, double x0, double x1,
                      const IntegratorConfig& config) {
  validate(config);
  require(std::isfinite(y0) && std::isfinite(x0) && std::isfinite(x1),
          "flow endpoints must be finite");
  if (x1 == x0) return y0;

  auto rhs = [&v](const double& y, double& dydu, double u) { dydu = v(y, u); };
  double y = y0;

  if (config.method == Integrator::Rk4Fixed) {
    const double span = x1 - x0;
    const double steps_needed = std::ceil(std::abs(span) / config.step);
    if (steps_needed > static_cast<double>(config.max_steps))
      fail(ErrorCode::StepLimitExceeded, "RK4 would need " + std::to_string(steps_needed) + " steps");
    const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(steps_needed));
    const double h = span / static_cast<double>(steps);
    Rk4 stepper;
    for (std::size_t k = 0; k < steps; ++k) {
      const double u = x0 + static_cast<double>(k) * h;
      stepper.do_step(rhs, y, u, h);
      check_state(y, u + h);
    }
    return y;
  }

  auto stepper = odeint::make_controlled(config.atol, config.rtol, Dopri5());
  const double dir = x1 > x0 ? 1.0 : -1.0;
  double u = x0;
  double dt = dir * std::min(std::abs(x1 - x0), 1e-2);
  std::size_t attempts = 0;
  while (dir * (x1 - u) > 0.0) {
    if (++attempts > config.max_steps)
      fail(ErrorCode::StepLimitExceeded,
           "adaptive integration exceeded " + std::to_string(config.max_steps) + " steps");
    if (dir * (u + dt - x1) > 0.0) dt = x1 - u;
    const double y_before = y;
    const double u_before = u;
    const auto res = stepper.try_step(rhs, y, u, dt);
    if (res == odeint::success) {
      check_state(y, u);
      // Snap onto the endpoint once the remaining gap is at rounding level.
      if (std::abs(x1 - u) <= 4.0 * std::numeric_limits<double>::epsilon() *
                                   std::max(std::abs(x1), 1.0))
        u = x1;
    } else {
      y = y_before;
      u = u_before;
      if (!std::isfinite(dt) || std::abs(dt) < 1e-300) check_state(NAN, u);
    }
  }
  return y;
}

std::vector<std::pair<double, double>> causal_curve(const VelocityFn& v, double y0, double x0,
                                                    const std::vector<double>& grid,
                                                    const IntegratorConfig& config) {
  require(std::is_sorted(grid.begin(), grid.end()), "curve grid must be sorted");
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  if (grid.empty()) return out;
  // Start from the grid point nearest x0, then walk outward in both
  // directions so every segment is integrated once.
  const auto start = static_cast<std::size_t>(
      std::min_element(grid.begin(), grid.end(),
                       [x0](double a, double b) { return std::abs(a - x0) < std::abs(b - x0); }) -
      grid.begin());
  std::vector<double> ys(grid.size());
  ys[start] = integrate_flow(v, y0, x0, grid[start], config);
  for (std::size_t k = start + 1; k < grid.size(); ++k)
    ys[k] = integrate_flow(v, ys[k - 1], grid[k - 1], grid[k], config);
  for (std::size_t k = start; k-- > 0;)
    ys[k] = integrate_flow(v, ys[k + 1], grid[k + 1], grid[k], config);
  for (std::size_t k = 0; k < grid.size(); ++k) out.emplace_back(grid[k], ys[k]);
  return out;
}

std::vector<double> extract_residuals(const VelocityFn& v, const DataPair& pair, double x0,
                                      const IntegratorConfig& config) {
  std::vector<double> eps(pair.size(), NAN);
  std::ostringstream failures;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < pair.size(); ++i) {
    try {
      eps[i] = integrate_flow(v, pair.ys[i], pair.xs[i], x0, config);
    } catch (const Error& e) {
      if (failed++ < 10) failures << " [" << i << "] " << e.what() << ';';
    }
  }
  if (failed)
    fail(ErrorCode::IntegrationFailure,
         std::to_string(failed) + " of " + std::to_string(pair.size()) +
             " residuals failed:" + failures.str());
  return eps;
}

}  // namespace velcd
