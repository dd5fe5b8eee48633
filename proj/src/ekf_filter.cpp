#include <Eigen/Cholesky>

#include "qukf/error.hpp"
#include "qukf/filters.hpp"
#include "qukf/linalg.hpp"

namespace qukf {

namespace {

// Lifted layout: q(4) r(3) v(3) omega(3) Upsilon(6) pad(k) dummy(1).
constexpr int kLq = 0;
constexpr int kLr = 4;
constexpr int kLv = 7;
constexpr int kLomega = 10;
constexpr int kLupsilon = 13;
constexpr int kLpad = 19;

AugmentedState unpack(const VectorXd& x, int padding) {
  AugmentedState s;
  s.q = UnitQuaternion(Vec4(x.segment<4>(kLq)));
  s.r = x.segment<3>(kLr);
  s.v = x.segment<3>(kLv);
  s.omega = x.segment<3>(kLomega);
  s.upsilon = x.segment<6>(kLupsilon);
  s.pad = x.segment(kLpad, padding);
  return s;
}

VectorXd pack(const AugmentedState& s) {
  const int padding = static_cast<int>(s.pad.size());
  VectorXd x(kLpad + padding + 1);
  x.segment<4>(kLq) = s.q.coeffs();
  x.segment<3>(kLr) = s.r;
  x.segment<3>(kLv) = s.v;
  x.segment<3>(kLomega) = s.omega;
  x.segment<6>(kLupsilon) = s.upsilon;
  x.segment(kLpad, padding) = s.pad;
  x[kLpad + padding] = 1.0;
  return x;
}

// d(q(P) (x) q)/dP at P = 0.
Eigen::Matrix<double, 4, 3> attitude_jacobian(const UnitQuaternion& q) {
  Eigen::Matrix<double, 4, 3> j;
  j.row(0) = -q.vec().transpose();
  j.bottomRows<3>() = q.w() * Mat3::Identity() - skew(q.vec());
  return 0.5 * j;
}

}  // namespace

EkfFilter::EkfFilter(const SystemParams& params, double dt, FilterConfig config, double fd_step)
    : config_(std::move(config)), model_(params, dt, config_.placement, config_.wrench_model), fd_step_(fd_step) {
  config_.validate();
  AugmentedState x;
  x.pad = VectorXd::Zero(config_.padding);
  x_ = pack(x);
  p_ = lift_covariance(config_.initial_cov, x.q);
}

MatrixXd EkfFilter::lift_covariance(const MatrixXd& tangent_cov, const UnitQuaternion& q) const {
  const int n = config_.tangent_dim();
  MatrixXd g = MatrixXd::Zero(n + 1, n);
  g.block<4, 3>(kLq, tangent::kRot) = attitude_jacobian(q);
  // r .. pad map one-to-one; the dummy stays zero.
  g.block(kLr, tangent::kPos, n - 4, n - 4).setIdentity();
  return symmetrized(g * tangent_cov * g.transpose());
}

void EkfFilter::initialize(const Measurement& y0) {
  AugmentedState x;
  x.q = y0.q;
  x.r = y0.r;
  x.omega = y0.omega;
  x.pad = VectorXd::Zero(config_.padding);
  initialize(x, config_.initial_cov);
}

void EkfFilter::initialize(const AugmentedState& x0, const MatrixXd& p0) {
  if (x0.tangent_dim() != config_.tangent_dim() || p0.rows() != config_.tangent_dim()) {
    throw Error(ErrorCode::kInvalidArgument, "initial state does not match filter dimension");
  }
  x_ = pack(x0);
  p_ = lift_covariance(p0, x0.q);
}

AugmentedState EkfFilter::state() const { return unpack(x_, config_.padding); }

VectorXd EkfFilter::transition(const VectorXd& x, const ControlInput& u) const {
  AugmentedState s = unpack(x, config_.padding);
  auto [body, obs] = model_.step(s.body(), s.observer(), u);
  s.q = body.q;
  s.r = body.r;
  s.v = body.v;
  s.omega = body.omega;
  s.upsilon = obs.upsilon;
  return pack(s);
}

StepDiagnostics EkfFilter::step(const ControlInput& u, const Measurement& y) {
  const int dim = static_cast<int>(x_.size());
  const int dummy = dim - 1;
  const double h = fd_step_;

  // Predict. For fixed (q, omega) the transition is affine in r, v, Upsilon
  // and the padding, so those columns take a unit step: exact, and free of
  // the cancellation error a small step would add.
  auto step_for = [&](int j) {
    return j >= kLr && (j < kLomega || j >= kLupsilon) ? 1.0 : h;
  };
  MatrixXd f = MatrixXd::Zero(dim, dim);
  f(dummy, dummy) = 1.0;
  for (int j = 0; j < dummy; ++j) {
    VectorXd xp = x_;
    VectorXd xm = x_;
    const double hj = step_for(j);
    xp[j] += hj;
    xm[j] -= hj;
    f.col(j) = (transition(xp, u) - transition(xm, u)) / (2.0 * hj);
  }
  const VectorXd x_prior = transition(x_, u);
  const UnitQuaternion q_prior(Vec4(x_prior.segment<4>(kLq)));
  MatrixXd p_prior = f * p_ * f.transpose() +
                     lift_covariance(config_.noise.process_step(model_.dt()), q_prior);
  p_prior = symmetrized(p_prior);

  // Update in the 9-dimensional tangent representation.
  auto observe_tangent = [&](const VectorXd& x) {
    Vec9 z;
    z << quat_diff(UnitQuaternion(Vec4(x.segment<4>(kLq))), q_prior).p, x.segment<3>(kLr),
        x.segment<3>(kLomega);
    return z;
  };
  Eigen::Matrix<double, 9, Eigen::Dynamic> hj = Eigen::Matrix<double, 9, Eigen::Dynamic>::Zero(9, dim);
  // Only the quaternion enters the observation nonlinearly.
  for (int j = 0; j < dummy; ++j) {
    VectorXd xp = x_prior;
    VectorXd xm = x_prior;
    const double step = j < kLr ? h : 1.0;
    xp[j] += step;
    xm[j] -= step;
    hj.col(j) = (observe_tangent(xp) - observe_tangent(xm)) / (2.0 * step);
  }
  Vec9 nu;
  nu << quat_diff(y.q, q_prior).p, y.r - x_prior.segment<3>(kLr),
      y.omega - x_prior.segment<3>(kLomega);

  const MatrixXd pht = p_prior * hj.transpose();
  const Mat9 s = symmetrized(hj * pht) + config_.noise.measurement;
  if (symmetric_condition(s) > 1e12) {
    throw Error(ErrorCode::kSingularInnovation, "innovation covariance is ill-conditioned");
  }
  const Eigen::LDLT<Mat9> s_ldlt(s);
  const MatrixXd gain = s_ldlt.solve(pht.transpose()).transpose();

  VectorXd x_post = x_prior + gain * nu;
  x_post[dummy] = 1.0;
  x_post.segment<4>(kLq).normalize();
  MatrixXd p_post = clamp_psd(symmetrized(p_prior - gain * s * gain.transpose()));
  p_post.row(dummy).setZero();
  p_post.col(dummy).setZero();

  x_ = std::move(x_post);
  p_ = std::move(p_post);
  return {nu, nu.dot(s_ldlt.solve(nu))};
}

}  // namespace qukf
