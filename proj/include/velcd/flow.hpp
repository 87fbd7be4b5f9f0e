#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "velcd/dataset.hpp"
#include "velcd/velocity.hpp"

namespace velcd {

// v(y, x): the cause x plays the role of time.
using VelocityFn = std::function<double(double y, double x)>;

VelocityFn as_function(const VelocityModel& model);

enum class Integrator { Rk4Fixed, Rk45Adaptive };

struct IntegratorConfig {
  Integrator method = Integrator::Rk45Adaptive;
  double step = 1e-2;  // RK4 step length
  double rtol = 1e-8;
  double atol = 1e-8;
  std::size_t max_steps = 100000;
};

void validate(const IntegratorConfig& config);

/// phi_{x0,x1}(y0) = y0 + int_{x0}^{x1} v(phi_{x0,u}(y0), u) du. x1 may lie on
/// either side of x0. Throws StepLimitExceeded or NonFiniteState.
double integrate_flow(const VelocityFn& v, double y0, double x0, double x1,
                      const IntegratorConfig& config = {});

/// phi_{x0,x}(y0) at each point of a sorted grid, chaining integration
/// between consecutive grid points.
std::vector<std::pair<double, double>> causal_curve(const VelocityFn& v, double y0, double x0,
                                                    const std::vector<double>& grid,
                                                    const IntegratorConfig& config = {});

/// eps_i = phi_{x_i, x0}(y_i). All points are attempted; failures are
/// reported together with their indices as IntegrationFailure.
std::vector<double> extract_residuals(const VelocityFn& v, const DataPair& pair, double x0,
                                      const IntegratorConfig& config = {});

}  // namespace velcd
