#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "velcd/mlp.hpp"

namespace velcd {

// Velocity parametrizations v(y, x): the rate of change of the effect y as
// the cause x moves, holding the noise fixed.
enum class Family { BLin, BQuad, BLinExp, BQuadExp, VAnm, VLsnm, VNn };

const char* to_string(Family f) noexcept;     // "b-lin", ...
const char* display_name(Family f) noexcept;  // "B-LIN", ...
std::optional<Family> parse_family(std::string_view s);
bool is_basis(Family f) noexcept;

// Hidden widths of the fitting networks. Input dimension is implied by the
// family (1 for the V-ANM / V-LSNM networks, 2 for V-NN).
struct VelocityArch {
  std::vector<int> hidden{64, 64};
  bool operator==(const VelocityArch&) const = default;
};

std::size_t param_count(Family family, const VelocityArch& arch = {});

struct VelocityModel {
  Family family = Family::BLin;
  VelocityArch arch;
  std::vector<double> theta;
  std::uint64_t seed = 0;
};

// Zero basis coefficients; MLP weights ~ N(0, 1/fan_in), biases 0.
std::vector<double> init_params(Family family, const VelocityArch& arch, std::uint64_t seed);
VelocityModel make_model(Family family, const VelocityArch& arch, std::uint64_t seed);

/// Batched evaluation of v, dv/dy and (optionally) dv/dx with a reverse pass
/// for parameter gradients. One instance per worker; not thread safe.
class VelocityEvaluator {
 public:
  VelocityEvaluator(Family family, VelocityArch arch);

  void forward(std::span<const double> theta, const Eigen::VectorXd& ys,
               const Eigen::VectorXd& xs, bool with_dx);

  const Eigen::VectorXd& v() const { return v_; }
  const Eigen::VectorXd& dvdy() const { return dvdy_; }
  const Eigen::VectorXd& dvdx() const { return dvdx_; }

  /// grad += sum_i seed_v_i dv_i/dtheta + seed_dy_i d(dvdy_i)/dtheta
  ///         + seed_dx_i d(dvdx_i)/dtheta.
  /// seed_dx requires the last forward() to have been called with with_dx.
  void backward(const Eigen::VectorXd& seed_v, const Eigen::VectorXd& seed_dy,
                const Eigen::VectorXd* seed_dx, std::span<double> grad) const;

  Family family() const { return family_; }
  std::size_t param_count() const { return count_; }

 private:
  Family family_;
  VelocityArch arch_;
  std::size_t count_;
  std::span<const double> theta_;
  bool with_dx_ = false;
  Eigen::VectorXd ys_, xs_;
  Eigen::VectorXd v_, dvdy_, dvdx_;
  // basis families
  Eigen::MatrixXd phi_, phi_y_, phi_x_;
  // network families
  std::vector<MlpJet> nets_;
};

struct VelocityValue {
  double v;
  double dvdy;
};

VelocityValue eval_velocity(const VelocityModel& model, double y, double x);
double eval_velocity_dx(const VelocityModel& model, double y, double x);

struct VelocityGrad {
  std::vector<double> dv;     // dv/dtheta
  std::vector<double> ddvdy;  // d(dv/dy)/dtheta
};

VelocityGrad eval_velocity_grad(const VelocityModel& model, double y, double x);

// {family, arch, theta, seed}
std::string to_json(const VelocityModel& model);
VelocityModel model_from_json(const std::string& text);

}  // namespace velcd
