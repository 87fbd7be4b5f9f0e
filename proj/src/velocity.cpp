#include "velcd/velocity.hpp"

#include <cmath>

#include <json.hpp>

#include "velcd/error.hpp"

namespace velcd {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

const char* to_string(Family f) noexcept {
  switch (f) {
    case Family::BLin: return "b-lin";
    case Family::BQuad: return "b-quad";
    case Family::BLinExp: return "b-lin-exp";
    case Family::BQuadExp: return "b-quad-exp";
    case Family::VAnm: return "v-anm";
    case Family::VLsnm: return "v-lsnm";
    case Family::VNn: return "v-nn";
  }
  return "?";
}

const char* display_name(Family f) noexcept {
  switch (f) {
    case Family::BLin: return "B-LIN";
    case Family::BQuad: return "B-QUAD";
    case Family::BLinExp: return "B-LIN-EXP";
    case Family::BQuadExp: return "B-QUAD-EXP";
    case Family::VAnm: return "V-ANM";
    case Family::VLsnm: return "V-LSNM";
    case Family::VNn: return "V-NN";
  }
  return "?";
}

std::optional<Family> parse_family(std::string_view s) {
  for (Family f : {Family::BLin, Family::BQuad, Family::BLinExp, Family::BQuadExp,
                   Family::VAnm, Family::VLsnm, Family::VNn}) {
    if (s == to_string(f) || s == display_name(f)) return f;
  }
  return std::nullopt;
}

bool is_basis(Family f) noexcept {
  return f == Family::BLin || f == Family::BQuad || f == Family::BLinExp ||
         f == Family::BQuadExp;
}

namespace {

MlpArch scalar_net(const VelocityArch& a) { return MlpArch{1, a.hidden}; }
MlpArch joint_net(const VelocityArch& a) { return MlpArch{2, a.hidden}; }

int basis_size(Family f) {
  switch (f) {
    case Family::BLin: return 3;
    case Family::BQuad: return 6;
    case Family::BLinExp: return 6;
    case Family::BQuadExp: return 9;
    default: return 0;
  }
}

// Rows: basis values, y-derivatives and x-derivatives at one point.
void basis_row(Family f, double y, double x, double* phi, double* phi_y, double* phi_x) {
  int k = 0;
  auto put = [&](double p, double py, double px) {
    phi[k] = p;
    phi_y[k] = py;
    phi_x[k] = px;
    ++k;
  };
  put(1.0, 0.0, 0.0);
  put(x, 0.0, 1.0);
  put(y, 1.0, 0.0);
  if (f == Family::BQuad || f == Family::BQuadExp) {
    put(x * x, 0.0, 2.0 * x);
    put(y * y, 2.0 * y, 0.0);
    put(x * y, x, y);
  }
  if (f == Family::BLinExp || f == Family::BQuadExp) {
    const double ex = std::exp(-x * x);
    const double ey = std::exp(-y * y);
    const double exy = ex * ey;
    put(ex, 0.0, -2.0 * x * ex);
    put(ey, -2.0 * y * ey, 0.0);
    put(exy, -2.0 * y * exy, -2.0 * x * exy);
  }
}

}  // namespace

std::size_t param_count(Family family, const VelocityArch& arch) {
  switch (family) {
    case Family::VAnm: return scalar_net(arch).param_count();
    case Family::VLsnm: return 2 * scalar_net(arch).param_count();
    case Family::VNn: return joint_net(arch).param_count();
    default: return static_cast<std::size_t>(basis_size(family));
  }
}

std::vector<double> init_params(Family family, const VelocityArch& arch, std::uint64_t seed) {
  switch (family) {
    case Family::VAnm: return mlp_random_params(scalar_net(arch), seed, 1.0, true, false);
    case Family::VNn: return mlp_random_params(joint_net(arch), seed, 1.0, true, false);
    case Family::VLsnm: {
      auto m = mlp_random_params(scalar_net(arch), seed, 1.0, true, false);
      auto h = mlp_random_params(scalar_net(arch), seed ^ 0x9e3779b97f4a7c15ULL, 1.0, true, false);
      m.insert(m.end(), h.begin(), h.end());
      return m;
    }
    default: return std::vector<double>(param_count(family, arch), 0.0);
  }
}

VelocityModel make_model(Family family, const VelocityArch& arch, std::uint64_t seed) {
  return VelocityModel{family, arch, init_params(family, arch, seed), seed};
}

VelocityEvaluator::VelocityEvaluator(Family family, VelocityArch arch)
    : family_(family), arch_(std::move(arch)), count_(velcd::param_count(family, arch_)) {
  switch (family_) {
    case Family::VAnm: nets_.emplace_back(scalar_net(arch_)); break;
    case Family::VLsnm:
      nets_.emplace_back(scalar_net(arch_));
      nets_.emplace_back(scalar_net(arch_));
      break;
    case Family::VNn: nets_.emplace_back(joint_net(arch_)); break;
    default: break;
  }
}

void VelocityEvaluator::forward(std::span<const double> theta, const VectorXd& ys,
                                const VectorXd& xs, bool with_dx) {
  require(theta.size() == count_, std::string("theta length mismatch for ") +
                                      display_name(family_));
  require(ys.size() == xs.size(), "velocity inputs differ in length");
  theta_ = theta;
  with_dx_ = with_dx;
  ys_ = ys;
  xs_ = xs;
  const Eigen::Index n = xs.size();

  if (is_basis(family_)) {
    const int k = basis_size(family_);
    // Row-major scratch rows are copied into column-major matrices.
    phi_.resize(n, k);
    phi_y_.resize(n, k);
    phi_x_.resize(n, k);
    std::vector<double> r(k), ry(k), rx(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      basis_row(family_, ys[i], xs[i], r.data(), ry.data(), rx.data());
      for (int j = 0; j < k; ++j) {
        phi_(i, j) = r[j];
        phi_y_(i, j) = ry[j];
        phi_x_(i, j) = rx[j];
      }
    }
    Eigen::Map<const VectorXd> a(theta.data(), k);
    v_ = phi_ * a;
    dvdy_ = phi_y_ * a;
    if (with_dx) dvdx_ = phi_x_ * a;
    return;
  }

  const MatrixXd xin = xs.transpose();
  switch (family_) {
    case Family::VAnm: {
      nets_[0].forward(theta, xin, 1, false);
      v_ = nets_[0].value().transpose();
      dvdy_ = VectorXd::Zero(n);
      if (with_dx) dvdx_ = nets_[0].d1(0).transpose();
      break;
    }
    case Family::VLsnm: {
      const std::size_t half = count_ / 2;
      auto& m = nets_[0];
      auto& h = nets_[1];
      m.forward(theta.subspan(0, half), xin, 1, with_dx);
      h.forward(theta.subspan(half), xin, 1, with_dx);
      const VectorXd resid = ys - m.value().transpose();
      const VectorXd dm = m.d1(0).transpose();
      const VectorXd dh = h.d1(0).transpose();
      v_ = dm + dh.cwiseProduct(resid);
      dvdy_ = dh;
      if (with_dx) {
        const VectorXd d2m = m.d2().transpose();
        const VectorXd d2h = h.d2().transpose();
        dvdx_ = d2m + d2h.cwiseProduct(resid) - dh.cwiseProduct(dm);
      }
      break;
    }
    case Family::VNn: {
      MatrixXd in(2, n);
      in.row(0) = ys.transpose();
      in.row(1) = xs.transpose();
      nets_[0].forward(theta, in, with_dx ? 2 : 1, false);
      v_ = nets_[0].value().transpose();
      dvdy_ = nets_[0].d1(0).transpose();
      if (with_dx) dvdx_ = nets_[0].d1(1).transpose();
      break;
    }
    default: break;
  }
}

void VelocityEvaluator::backward(const VectorXd& seed_v, const VectorXd& seed_dy,
                                 const VectorXd* seed_dx, std::span<double> grad) const {
  require(grad.size() == count_, "gradient buffer length mismatch");
  require(seed_dx == nullptr || with_dx_, "dv/dx seed needs a forward pass with dv/dx");

  if (is_basis(family_)) {
    Eigen::Map<VectorXd> g(grad.data(), static_cast<Eigen::Index>(count_));
    g.noalias() += phi_.transpose() * seed_v;
    g.noalias() += phi_y_.transpose() * seed_dy;
    if (seed_dx) g.noalias() += phi_x_.transpose() * *seed_dx;
    return;
  }

  switch (family_) {
    case Family::VAnm: {
      std::vector<RowVectorXd> s1{seed_dx ? RowVectorXd(seed_dx->transpose())
                                          : RowVectorXd::Zero(seed_v.size())};
      nets_[0].backward(seed_v.transpose(), s1, nullptr, grad);
      break;
    }
    case Family::VLsnm: {
      const std::size_t half = count_ / 2;
      const auto& m = nets_[0];
      const auto& h = nets_[1];
      const VectorXd resid = ys_ - m.value().transpose();
      const VectorXd dm = m.d1(0).transpose();
      const VectorXd dh = h.d1(0).transpose();
      // v = m' + h'(y - m);  dvdy = h';  dvdx = m'' + h''(y - m) - h' m'
      VectorXd m_val = -seed_v.cwiseProduct(dh);
      VectorXd m_d1 = seed_v;
      VectorXd h_d1 = seed_v.cwiseProduct(resid) + seed_dy;
      if (seed_dx) {
        const VectorXd d2h = h.d2().transpose();
        m_val -= seed_dx->cwiseProduct(d2h);
        m_d1 -= seed_dx->cwiseProduct(dh);
        h_d1 -= seed_dx->cwiseProduct(dm);
        const RowVectorXd m_d2 = seed_dx->transpose();
        const RowVectorXd h_d2 = seed_dx->cwiseProduct(resid).transpose();
        m.backward(m_val.transpose(), {m_d1.transpose()}, &m_d2, grad.subspan(0, half));
        h.backward(RowVectorXd::Zero(seed_v.size()), {h_d1.transpose()}, &h_d2,
                   grad.subspan(half));
      } else {
        m.backward(m_val.transpose(), {m_d1.transpose()}, nullptr, grad.subspan(0, half));
        h.backward(RowVectorXd::Zero(seed_v.size()), {h_d1.transpose()}, nullptr,
                   grad.subspan(half));
      }
      break;
    }
    case Family::VNn: {
      std::vector<RowVectorXd> s1{seed_dy.transpose()};
      if (with_dx_)
        s1.push_back(seed_dx ? RowVectorXd(seed_dx->transpose())
                             : RowVectorXd::Zero(seed_v.size()));
      nets_[0].backward(seed_v.transpose(), s1, nullptr, grad);
      break;
    }
    default: break;
  }
}

namespace {

VelocityEvaluator evaluate_one(const VelocityModel& model, double y, double x, bool with_dx) {
  VelocityEvaluator ev(model.family, model.arch);
  ev.forward(model.theta, VectorXd::Constant(1, y), VectorXd::Constant(1, x), with_dx);
  return ev;
}

}  // namespace

VelocityValue eval_velocity(const VelocityModel& model, double y, double x) {
  const auto ev = evaluate_one(model, y, x, false);
  return {ev.v()(0), ev.dvdy()(0)};
}

double eval_velocity_dx(const VelocityModel& model, double y, double x) {
  return evaluate_one(model, y, x, true).dvdx()(0);
}

VelocityGrad eval_velocity_grad(const VelocityModel& model, double y, double x) {
  const auto ev = evaluate_one(model, y, x, false);
  VelocityGrad g{std::vector<double>(ev.param_count(), 0.0),
                 std::vector<double>(ev.param_count(), 0.0)};
  const VectorXd one = VectorXd::Ones(1), zero = VectorXd::Zero(1);
  ev.backward(one, zero, nullptr, g.dv);
  ev.backward(zero, one, nullptr, g.ddvdy);
  return g;
}

std::string to_json(const VelocityModel& model) {
  nlohmann::ordered_json j;
  j["family"] = to_string(model.family);
  j["arch"] = model.arch.hidden;
  j["theta"] = model.theta;
  j["seed"] = model.seed;
  return j.dump();
}

VelocityModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("model checkpoint: ") + e.what());
  }
  VelocityModel m;
  try {
    const auto fam = parse_family(j.at("family").get<std::string>());
    if (!fam) fail(ErrorCode::ParseError, "model checkpoint: unknown family");
    m.family = *fam;
    if (j.contains("arch")) m.arch.hidden = j.at("arch").get<std::vector<int>>();
    m.theta = j.at("theta").get<std::vector<double>>();
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("model checkpoint: ") + e.what());
  }
  if (m.theta.size() != param_count(m.family, m.arch))
    fail(ErrorCode::ParseError, "model checkpoint: theta length does not match family");
  return m;
}

}  // namespace velcd
