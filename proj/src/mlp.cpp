#include "velcd/mlp.hpp"

#include <cmath>
#include <random>

#include "velcd/error.hpp"

namespace velcd {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using ConstMatMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using MatMap = Eigen::Map<MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

std::size_t MlpArch::param_count() const {
  std::size_t count = 0;
  int in = input_dim;
  for (int h : hidden) {
    count += static_cast<std::size_t>(in) * h + h;
    in = h;
  }
  return count + static_cast<std::size_t>(in) + 1;
}

std::vector<double> mlp_random_params(const MlpArch& arch, std::uint64_t seed,
                                      double scale, bool fan_in_scaled,
                                      bool with_bias_noise) {
  std::vector<double> p;
  p.reserve(arch.param_count());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  int in = arch.input_dim;
  auto layer = [&](int fan_in, int out) {
    const double sd = fan_in_scaled ? scale / std::sqrt(static_cast<double>(fan_in)) : scale;
    for (int k = 0; k < fan_in * out; ++k) p.push_back(sd * normal(rng));
    for (int k = 0; k < out; ++k) p.push_back(with_bias_noise ? sd * normal(rng) : 0.0);
  };
  for (int h : arch.hidden) {
    layer(in, h);
    in = h;
  }
  layer(in, 1);
  return p;
}

MlpJet::MlpJet(MlpArch arch) : arch_(std::move(arch)) {
  require(arch_.input_dim >= 1, "MLP input dimension must be positive");
  std::size_t off = 0;
  int in = arch_.input_dim;
  auto add = [&](int out) {
    Layer l;
    l.in = in;
    l.out = out;
    l.w_off = off;
    off += static_cast<std::size_t>(in) * out;
    l.b_off = off;
    off += static_cast<std::size_t>(out);
    layers_.push_back(l);
    in = out;
  };
  for (int h : arch_.hidden) {
    require(h >= 1, "MLP hidden width must be positive");
    add(h);
  }
  add(1);
  in_.resize(layers_.size());
  w_.resize(layers_.size());
  z_.resize(layers_.size());
  tp_.resize(layers_.size());
  tpp_.resize(layers_.size());
}

void MlpJet::forward(std::span<const double> params, const MatrixXd& inputs,
                     int n_dirs, bool second_order) {
  require(params.size() == arch_.param_count(), "MLP parameter count mismatch");
  require(inputs.rows() == arch_.input_dim, "MLP input dimension mismatch");
  require(n_dirs >= 0 && n_dirs <= arch_.input_dim, "too many tangent directions");
  require(!second_order || n_dirs >= 1, "second order needs a first direction");
  params_ = params;
  n_dirs_ = n_dirs;
  second_ = second_order;
  const Eigen::Index n = inputs.cols();
  n_ = n;
  blocks_ = 1 + n_dirs + (second_order ? 1 : 0);
  const Eigen::Index s2 = (1 + n_dirs) * n;  // column offset of the second-order block

  MatrixXd& x0 = in_[0];
  x0.setZero(arch_.input_dim, blocks_ * n);
  x0.leftCols(n) = inputs;
  for (int k = 0; k < n_dirs; ++k) x0.block(k, (1 + k) * n, 1, n).setOnes();

  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& L = layers_[li];
    // Owned copy: products on mapped, arbitrarily aligned memory may round
    // differently depending on the address.
    w_[li] = ConstMatMap(params.data() + L.w_off, L.out, L.in);
    ConstVecMap b(params.data() + L.b_off, L.out);
    MatrixXd& z = z_[li];
    z.resize(L.out, blocks_ * n);
    z.noalias() = w_[li] * in_[li];
    z.leftCols(n).colwise() += b;

    if (li + 1 == layers_.size()) {
      value_ = z.leftCols(n);
      d1_.resize(static_cast<std::size_t>(n_dirs));
      for (int k = 0; k < n_dirs; ++k) d1_[k] = z.middleCols((1 + k) * n, n);
      if (second_) d2_ = z.middleCols(s2, n);
      else d2_.resize(0);
      break;
    }

    MatrixXd& h = in_[li + 1];
    h.resize(L.out, blocks_ * n);
    Eigen::ArrayXXd& tp = tp_[li];
    Eigen::ArrayXXd& tpp = tpp_[li];
    // tanh through exp, which Eigen vectorizes for double
    tp = (-2.0 * z.leftCols(n).array().abs()).exp();
    h.leftCols(n).array() = z.leftCols(n).array().sign() * (1.0 - tp) / (1.0 + tp);
    const auto t = h.leftCols(n).array();
    tp = 1.0 - t.square();
    tpp = -2.0 * t * tp;
    for (int k = 0; k < n_dirs; ++k)
      h.middleCols((1 + k) * n, n).array() = tp * z.middleCols((1 + k) * n, n).array();
    if (second_)
      h.middleCols(s2, n).array() = tpp * z.middleCols(n, n).array().square() +
                                    tp * z.middleCols(s2, n).array();
  }
}

void MlpJet::backward(const RowVectorXd& seed_value,
                      const std::vector<RowVectorXd>& seed_d1,
                      const RowVectorXd* seed_d2, std::span<double> grad) const {
  require(grad.size() == arch_.param_count(), "MLP gradient size mismatch");
  require(static_cast<int>(seed_d1.size()) == n_dirs_, "seed direction count mismatch");
  require(seed_d2 == nullptr || second_, "second-order seed without second-order forward");
  const Eigen::Index n = n_;
  const Eigen::Index s2 = (1 + n_dirs_) * n;

  zb_.resize(1, blocks_ * n);
  zb_.leftCols(n) = seed_value;
  for (int k = 0; k < n_dirs_; ++k) zb_.middleCols((1 + k) * n, n) = seed_d1[k];
  if (second_) {
    if (seed_d2) zb_.middleCols(s2, n) = *seed_d2;
    else zb_.middleCols(s2, n).setZero();
  }

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& L = layers_[li];
    MatMap gW(grad.data() + L.w_off, L.out, L.in);
    VecMap gb(grad.data() + L.b_off, L.out);
    gw_.noalias() = zb_ * in_[li].transpose();
    gW += gw_;
    gb_.noalias() = zb_.leftCols(n).rowwise().sum();
    gb += gb_;
    if (li == 0) break;

    hb_.resize(L.in, blocks_ * n);
    hb_.noalias() = w_[li].transpose() * zb_;

    // Through the tanh of the previous layer, in place on hb_.
    const MatrixXd& zp = z_[li - 1];
    const Eigen::ArrayXXd& tp = tp_[li - 1];
    const Eigen::ArrayXXd& tpp = tpp_[li - 1];
    const auto t = in_[li].leftCols(n).array();
    auto ab = hb_.leftCols(n).array();
    ab *= tp;
    for (int k = 0; k < n_dirs_; ++k)
      ab += hb_.middleCols((1 + k) * n, n).array() * tpp * zp.middleCols((1 + k) * n, n).array();
    if (second_) {
      const auto a2b = hb_.middleCols(s2, n).array();
      const auto z1 = zp.middleCols(n, n).array();
      ab += a2b * ((4.0 * t.square() * tp - 2.0 * tp.square()) * z1.square() +
                   tpp * zp.middleCols(s2, n).array());
      hb_.middleCols(n, n).array() =
          hb_.middleCols(n, n).array() * tp + 2.0 * a2b * tpp * z1;
      for (int k = 1; k < n_dirs_; ++k) hb_.middleCols((1 + k) * n, n).array() *= tp;
      hb_.middleCols(s2, n).array() *= tp;
    } else {
      for (int k = 0; k < n_dirs_; ++k) hb_.middleCols((1 + k) * n, n).array() *= tp;
    }
    zb_.swap(hb_);
  }
}

double mlp_eval(const MlpArch& arch, std::span<const double> params,
                std::span<const double> input) {
  require(static_cast<int>(input.size()) == arch.input_dim, "MLP input dimension mismatch");
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(input.data(), arch.input_dim);
  std::size_t off = 0;
  int in = arch.input_dim;
  for (int h : arch.hidden) {
    ConstMatMap W(params.data() + off, h, in);
    off += static_cast<std::size_t>(h) * in;
    ConstVecMap b(params.data() + off, h);
    off += h;
    a = (W * a + b).array().tanh().matrix();
    in = h;
  }
  ConstMatMap W(params.data() + off, 1, in);
  return (W * a)(0) + params[off + in];
}

ValueSlope mlp_eval_d1(const MlpArch& arch, std::span<const double> params, double x) {
  require(arch.input_dim == 1, "mlp_eval_d1 needs a scalar input");
  Eigen::VectorXd a = Eigen::VectorXd::Constant(1, x);
  Eigen::VectorXd da = Eigen::VectorXd::Ones(1);
  std::size_t off = 0;
  int in = 1;
  for (int h : arch.hidden) {
    ConstMatMap W(params.data() + off, h, in);
    off += static_cast<std::size_t>(h) * in;
    ConstVecMap b(params.data() + off, h);
    off += h;
    a = (W * a + b).array().tanh().matrix();
    da = ((1.0 - a.array().square()) * (W * da).array()).matrix();
    in = h;
  }
  ConstMatMap W(params.data() + off, 1, in);
  return {(W * a)(0) + params[off + in], (W * da)(0)};
}

}  // namespace velcd
