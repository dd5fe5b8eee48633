#include "qukf/transition.hpp"

#include <Eigen/LU>
#include <cmath>

#include "qukf/error.hpp"
#include "qukf/linalg.hpp"

namespace qukf {

UnitQuaternion integrate_attitude(const UnitQuaternion& q, const Vec3& omega, double dt) {
  const double rate = omega.norm();
  const double half = 0.5 * rate * dt;
  // sin(half) / rate, with the small-rate limit dt / 2.
  const double s = rate * dt < 1e-6 ? 0.5 * dt * (1.0 - half * half / 6.0) : std::sin(half) / rate;
  const Vec4 next = std::cos(half) * q.coeffs() + s * (xi_matrix(omega) * q.coeffs());
  return UnitQuaternion(next);
}

TransitionModel::TransitionModel(const SystemParams& params, double dt, GammaPlacement placement,
                                 WrenchModel wrench)
    : params_(params), dt_(dt), placement_(placement), wrench_(wrench) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sampling interval must be > 0");
  params_.validate();
  inertia_inv_ = params_.inertia.inverse();
  const Mat6 a = params_.observer_gain();
  decay_ = expm(-a * dt);
  relax_ = Mat6::Identity() - decay_;
  ramp_ = dt * Mat6::Identity() - a.partialPivLu().solve(relax_);
}

std::pair<BodyState, ObserverState> TransitionModel::step(const BodyState& s,
                                                          const ObserverState& obs,
                                                          const ControlInput& u) const {
  const SystemParams& p = params_;
  const double t = dt_;
  if (wrench_ == WrenchModel::kInDynamics) {
    if (placement_ == GammaPlacement::kAffine) {
      return discrete_transition(s, obs, u, p, t, placement_, wrench_);
    }
    return step_in_dynamics(s, obs, u);
  }
  const CompactModel c = compact_matrices(s, p);

  Vec6 accel;
  accel.head<3>() = c.w.block<3, 1>(0, 0) * (-u.thrust / p.mass) - p.gravity * kUnitZ;
  accel.tail<3>() = inertia_inv_ * (u.moments - c.g.tail<3>());

  BodyState next;
  next.q = integrate_attitude(s.q, s.omega, t);
  next.r = s.r + s.v * t + 0.5 * t * t * accel.head<3>();
  next.v = s.v + accel.head<3>() * t;
  next.omega = s.omega + accel.tail<3>() * t;

  Vec6 chi;
  chi << s.v, s.omega;
  const Vec6 drive = c.g + c.w * u.stacked() - p.delta * chi;
  ObserverState out;
  out.upsilon = decay_ * obs.upsilon + relax_ * drive;
  if (placement_ == GammaPlacement::kStateCoupled) {
    out.upsilon -= p.delta * (ramp_ * accel);
  }
  return {next, out};
}

std::pair<BodyState, ObserverState> TransitionModel::step_in_dynamics(
    const BodyState& s, const ObserverState& obs, const ControlInput& u) const {
  const SystemParams& p = params_;
  const double t = dt_;
  const CompactModel c = compact_matrices(s, p);
  const Mat6 a = p.observer_gain();
  const Mat6 m_inv = a / p.delta;

  using Vec12 = Eigen::Matrix<double, 12, 1>;
  Eigen::Matrix<double, 12, 12> n;
  n << a, m_inv, -p.delta * a, -a;
  Vec12 d;
  d.head<3>() = c.w.block<3, 1>(0, 0) * (-u.thrust / p.mass) - p.gravity * kUnitZ;
  d.segment<3>(3) = inertia_inv_ * (u.moments - c.g.tail<3>());
  d.tail<6>() = a * (c.g + c.w * u.stacked());
  Vec12 z;
  z << s.v, s.omega, obs.upsilon;

  // n * n == 0, so z(t) = z + t (n z + d) + t^2 / 2 n d.
  const Vec12 rate = n * z + d;
  const Vec12 jerk = n * d;
  const Vec12 z1 = z + t * rate + 0.5 * t * t * jerk;

  BodyState next;
  next.q = integrate_attitude(s.q, s.omega, t);
  next.r = s.r + t * s.v + 0.5 * t * t * rate.head<3>() + t * t * t / 6.0 * jerk.head<3>();
  next.v = z1.head<3>();
  next.omega = z1.segment<3>(3);
  ObserverState out;
  out.upsilon = z1.tail<6>();
  return {next, out};
}

}  // namespace qukf
