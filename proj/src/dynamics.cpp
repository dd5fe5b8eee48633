#include "qukf/dynamics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qukf/error.hpp"
#include "qukf/linalg.hpp"

namespace qukf {

void SystemParams::validate() const {
  std::vector<std::string> problems;
  if (!(mass > 0.0)) problems.emplace_back("system.mass must be > 0");
  if (!inertia.allFinite() || (inertia - inertia.transpose()).norm() > 1e-12 ||
      Eigen::LLT<Mat3>(inertia).info() != Eigen::Success) {
    problems.emplace_back("system.inertia must be symmetric positive definite");
  }
  if (!std::isfinite(gravity)) problems.emplace_back("system.gravity must be finite");
  if (!(payload_length > 0.0)) problems.emplace_back("system.payload_length must be > 0");
  if (!attach_offset_1.allFinite() || !attach_offset_2.allFinite()) {
    problems.emplace_back("system.attach_offset_* must be finite");
  }
  if (!(u_max > 0.0)) problems.emplace_back("system.u_max must be > 0");
  if (!(delta > 0.0)) problems.emplace_back("system.delta must be > 0");
  if (!(rotor.thrust_constant > 0.0)) problems.emplace_back("rotor.thrust_constant must be > 0");
  if (!(rotor.drag_constant > 0.0)) problems.emplace_back("rotor.drag_constant must be > 0");
  if (!(rotor.arm_length > 0.0)) problems.emplace_back("rotor.arm_length must be > 0");
  for (std::size_t i = 0; i < lambda_weights.size(); ++i) {
    if (!(lambda_weights[i] > 0.0)) {
      problems.emplace_back("system.lambda_weights[" + std::to_string(i) + "] must be > 0");
    }
  }
  if (!problems.empty()) {
    std::string msg;
    for (const auto& s : problems) msg += (msg.empty() ? "" : "; ") + s;
    throw Error(ErrorCode::kValidationError, msg);
  }
}

Mat6 SystemParams::inertia_matrix() const {
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = mass * Mat3::Identity();
  m.bottomRightCorner<3, 3>() = inertia;
  return m;
}

Mat6 SystemParams::observer_gain() const {
  Mat6 a = Mat6::Zero();
  a.topLeftCorner<3, 3>() = (delta / mass) * Mat3::Identity();
  a.bottomRightCorner<3, 3>() = delta * inertia.inverse();
  return a;
}

Vec6 Wrench::stacked() const {
  Vec6 w;
  w << force, torque;
  return w;
}

Wrench Wrench::from_stacked(const Vec6& w) { return {w.head<3>(), w.tail<3>()}; }

ControlInput ControlInput::from_stacked(const Eigen::Vector4d& u) {
  return {u[0], u.tail<3>()};
}

Mat4 xi_matrix(const Vec3& omega) {
  Mat4 xi;
  xi(0, 0) = 0.0;
  xi.block<1, 3>(0, 1) = -omega.transpose();
  xi.block<3, 1>(1, 0) = omega;
  xi.block<3, 3>(1, 1) = -skew(omega);
  return xi;
}

BodyStateDerivative system_derivative(const BodyState& s, const ControlInput& u,
                                      const Wrench& tau_h, const SystemParams& p) {
  BodyStateDerivative d;
  d.q_dot = 0.5 * xi_matrix(s.omega) * s.q.coeffs();
  d.r_dot = s.v;
  d.v_dot = quat_to_rot(s.q) * kUnitZ * (u.thrust / p.mass) - p.gravity * kUnitZ +
            tau_h.force / p.mass;
  d.omega_dot = p.inertia.llt().solve(u.moments - s.omega.cross(p.inertia * s.omega) +
                                      tau_h.torque);
  return d;
}

BodyStateDerivative quadrotor_derivative(const BodyState& s, const ControlInput& u,
                                         const Vec3& link_force, const Vec3& link_torque,
                                         const RigidComponent& body, double gravity) {
  BodyStateDerivative d;
  d.q_dot = 0.5 * xi_matrix(s.omega) * s.q.coeffs();
  d.r_dot = s.v;
  d.v_dot = quat_to_rot(s.q) * kUnitZ * (u.thrust / body.mass) - gravity * kUnitZ -
            link_force / body.mass;
  d.omega_dot = body.inertia.llt().solve(u.moments - s.omega.cross(body.inertia * s.omega) -
                                         link_torque);
  return d;
}

BodyStateDerivative payload_derivative(const BodyState& s,
                                       const std::array<Vec3, 2>& link_forces,
                                       const std::array<Vec3, 2>& link_torques,
                                       const std::array<Vec3, 2>& offsets,
                                       const RigidComponent& body, double gravity,
                                       const Wrench& external) {
  const Mat3 rt = quat_to_rot(s.q).transpose();
  BodyStateDerivative d;
  d.q_dot = 0.5 * xi_matrix(s.omega) * s.q.coeffs();
  d.r_dot = s.v;
  d.v_dot = (link_forces[0] + link_forces[1] + external.force) / body.mass - gravity * kUnitZ;
  const Vec3 moment = link_torques[0] + link_torques[1] -
                      s.omega.cross(body.inertia * s.omega) +
                      offsets[0].cross(rt * link_forces[0]) +
                      offsets[1].cross(rt * link_forces[1]) + external.torque;
  d.omega_dot = body.inertia.llt().solve(moment);
  return d;
}

namespace {

Eigen::Matrix4d mixer_matrix(const RotorParams& rotor) {
  const double l = rotor.arm_length;
  const double nu = rotor.drag_ratio();
  Eigen::Matrix4d m;
  m << 1, 1, 1, 1,
       0, l, 0, -l,
       -l, 0, l, 0,
       nu, -nu, nu, -nu;
  return m;
}

}  // namespace

ControlInput rotor_mix(const std::array<double, 4>& f, const RotorParams& rotor) {
  const Eigen::Vector4d thrusts(f[0], f[1], f[2], f[3]);
  return ControlInput::from_stacked(mixer_matrix(rotor) * thrusts);
}

std::array<double, 4> rotor_unmix(const ControlInput& u, const RotorParams& rotor) {
  const Eigen::Vector4d f = mixer_matrix(rotor).partialPivLu().solve(u.stacked());
  return {f[0], f[1], f[2], f[3]};
}

Mat4x8 build_config_matrix(const SystemParams& p) {
  const Vec3& l1 = p.attach_offset_1;
  const Vec3& l2 = p.attach_offset_2;
  Mat4x8 c;
  c << 1, 0, 0, 0, 1, 0, 0, 0,
       l1.y(), 1, 0, 0, l2.y(), 1, 0, 0,
       -l1.x(), 0, 1, 0, -l2.x(), 0, 1, 0,
       0, 0, 0, 1, 0, 0, 0, 1;
  return c;
}

Vec8 allocate(const ControlInput& u, const SystemParams& p) {
  const Mat4x8 c = build_config_matrix(p);
  Vec8 inv_weight;
  for (int i = 0; i < 8; ++i) inv_weight[i] = 1.0 / p.lambda_weights[static_cast<std::size_t>(i)];
  const Eigen::Matrix<double, 8, 4> wct = inv_weight.asDiagonal() * c.transpose();
  const Eigen::Matrix4d gram = c * wct;
  if (symmetric_condition(gram) > 1e12) {
    throw Error(ErrorCode::kSingularAllocation, "allocation Gram matrix is ill-conditioned");
  }
  return wct * gram.llt().solve(u.stacked());
}

RotorLimitResult apply_rotor_limits(const Vec8& uc, const SystemParams& p) {
  RotorLimitResult out;
  const double f_max = p.u_max / 4.0;
  for (int i = 0; i < 2; ++i) {
    const ControlInput ui = ControlInput::from_stacked(uc.segment<4>(4 * i));
    std::array<double, 4> f = rotor_unmix(ui, p.rotor);
    for (int j = 0; j < 4; ++j) {
      double& fj = f[static_cast<std::size_t>(j)];
      if (fj < 0.0 || fj > f_max) {
        fj = std::clamp(fj, 0.0, f_max);
        ++out.saturated_rotors;
      }
      out.rotor_thrusts[static_cast<std::size_t>(4 * i + j)] = fj;
    }
    out.realized.segment<4>(4 * i) = rotor_mix(f, p.rotor).stacked();
  }
  return out;
}

ControlInput system_input(const Vec8& uc, const SystemParams& p) {
  return ControlInput::from_stacked(build_config_matrix(p) * uc);
}

CompactModel compact_matrices(const BodyState& s, const SystemParams& p) {
  CompactModel c;
  c.m = p.inertia_matrix();
  c.g.head<3>() = p.mass * p.gravity * kUnitZ;
  c.g.tail<3>() = s.omega.cross(p.inertia * s.omega);
  c.w.block<3, 1>(0, 0) = -quat_to_rot(s.q) * kUnitZ;
  c.w.block<3, 3>(3, 1) = -Mat3::Identity();
  return c;
}

Vec6 observer_gamma(const BodyState& s, const SystemParams& p) {
  Vec6 chi_dot;
  chi_dot << s.v, s.omega;
  return p.delta * chi_dot;
}

Vec6 observer_derivative(const ObserverState& obs, const BodyState& s, const ControlInput& u,
                         const SystemParams& p) {
  const CompactModel c = compact_matrices(s, p);
  const Mat6 a = p.observer_gain();
  return -a * obs.upsilon + a * (c.g + c.w * u.stacked() - observer_gamma(s, p));
}

Wrench wrench_estimate(const ObserverState& obs, const BodyState& s, const SystemParams& p) {
  return Wrench::from_stacked(obs.upsilon + observer_gamma(s, p));
}

Vec20 lift_state(const BodyState& s, const ObserverState& obs) {
  Vec20 x;
  x << s.q.coeffs(), s.r, s.v, s.omega, obs.upsilon, 1.0;
  return x;
}

std::pair<BodyState, ObserverState> unlift_state(const Vec20& x) {
  BodyState s;
  s.q = UnitQuaternion(Vec4(x.head<4>()));
  s.r = x.segment<3>(4);
  s.v = x.segment<3>(7);
  s.omega = x.segment<3>(10);
  ObserverState obs;
  obs.upsilon = x.segment<6>(13);
  return {s, obs};
}

Mat20 build_fc(const BodyState& s, const ControlInput& u, const ObserverState& /*obs*/,
               const SystemParams& p, GammaPlacement placement, WrenchModel wrench) {
  const CompactModel c = compact_matrices(s, p);
  const Mat6 a = p.observer_gain();
  Mat20 f = Mat20::Zero();
  f.block<4, 4>(0, 0) = 0.5 * xi_matrix(s.omega);
  f.block<3, 3>(4, 7) = Mat3::Identity();
  f.block<3, 1>(7, 19) = quat_to_rot(s.q) * kUnitZ * (u.thrust / p.mass) - p.gravity * kUnitZ;
  f.block<3, 1>(10, 19) =
      p.inertia.llt().solve(u.moments - s.omega.cross(p.inertia * s.omega));
  f.block<6, 6>(13, 13) = -a;
  const Vec6 drive = c.g + c.w * u.stacked();
  if (placement == GammaPlacement::kStateCoupled) {
    f.block<6, 6>(13, 7) = -p.delta * a;
    f.block<6, 1>(13, 19) = a * drive;
  } else {
    f.block<6, 1>(13, 19) = a * (drive - observer_gamma(s, p));
  }
  if (wrench == WrenchModel::kInDynamics) {
    const Mat6 m_inv = p.inertia_matrix().inverse();
    f.block<6, 6>(7, 13) = m_inv;
    f.block<6, 6>(7, 7) = p.delta * m_inv;
  }
  return f;
}

std::pair<BodyState, ObserverState> discrete_transition(const BodyState& s,
                                                        const ObserverState& obs,
                                                        const ControlInput& u,
                                                        const SystemParams& p, double dt,
                                                        GammaPlacement placement,
                                                        WrenchModel wrench) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sampling interval must be > 0");
  const Mat20 phi = expm(build_fc(s, u, obs, p, placement, wrench) * dt);
  return unlift_state(phi * lift_state(s, obs));
}

}  // namespace qukf
