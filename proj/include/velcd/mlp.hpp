#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace velcd {

// Fully connected network with tanh hidden layers and a scalar linear output.
// Parameters live in a flat vector, layer by layer: W (out x in, column
// major) followed by b (out).
struct MlpArch {
  int input_dim = 1;
  std::vector<int> hidden{64, 64};

  std::size_t param_count() const;
  bool operator==(const MlpArch&) const = default;
};

// W ~ N(0, scale^2 / fan_in) when fan_in_scaled, else N(0, scale^2); biases
// drawn from the same law only when with_bias_noise.
std::vector<double> mlp_random_params(const MlpArch& arch, std::uint64_t seed,
                                      double scale, bool fan_in_scaled,
                                      bool with_bias_noise);

/// Batched evaluation of f together with exact input derivatives.
///
/// forward() propagates, for every column of the input matrix, the value,
/// first derivatives along the first `n_dirs` input axes and, optionally, the
/// second derivative along axis 0. backward() then accumulates the parameter
/// gradient of  sum_i  sv_i f_i + sum_k s1k_i df_i/du_k + s2_i d2f_i/du_0^2
/// using the activations cached by the last forward().
class MlpJet {
 public:
  explicit MlpJet(MlpArch arch);

  void forward(std::span<const double> params, const Eigen::MatrixXd& inputs,
               int n_dirs, bool second_order);

  const Eigen::RowVectorXd& value() const { return value_; }
  const Eigen::RowVectorXd& d1(int dir) const { return d1_[static_cast<std::size_t>(dir)]; }
  const Eigen::RowVectorXd& d2() const { return d2_; }

  void backward(const Eigen::RowVectorXd& seed_value,
                const std::vector<Eigen::RowVectorXd>& seed_d1,
                const Eigen::RowVectorXd* seed_d2, std::span<double> grad) const;

  const MlpArch& arch() const { return arch_; }

 private:
  struct Layer {
    int in = 0, out = 0;
    std::size_t w_off = 0, b_off = 0;
  };

  MlpArch arch_;
  std::vector<Layer> layers_;
  std::span<const double> params_;
  int n_dirs_ = 0;
  bool second_ = false;
  Eigen::Index n_ = 0;
  int blocks_ = 1;  // value, one per direction, then the second-order block
  // Inputs and pre-activations are stored with all blocks side by side so
  // each layer is a single matrix product. in_[l] is the input of layer l.
  std::vector<Eigen::MatrixXd> in_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::MatrixXd> z_;
  std::vector<Eigen::ArrayXXd> tp_, tpp_;  // tanh' and tanh'' per hidden layer
  mutable Eigen::MatrixXd zb_, hb_, gw_;
  mutable Eigen::VectorXd gb_;
  Eigen::RowVectorXd value_;
  std::vector<Eigen::RowVectorXd> d1_;
  Eigen::RowVectorXd d2_;
};

// Plain forward pass for a single input vector.
double mlp_eval(const MlpArch& arch, std::span<const double> params,
                std::span<const double> input);

// Value and slope of a scalar-input network.
struct ValueSlope {
  double value;
  double slope;
};
ValueSlope mlp_eval_d1(const MlpArch& arch, std::span<const double> params, double x);

}  // namespace velcd
