#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qukf/error.hpp"
#include "qukf/linalg.hpp"
#include "qukf/simulation.hpp"

namespace qukf {

namespace {

bool is_psd(const Mat3& m, bool strict) {
  if (!m.allFinite() || (m - m.transpose()).norm() > 1e-12) return false;
  const double lo = Eigen::SelfAdjointEigenSolver<Mat3>(m).eigenvalues().minCoeff();
  return strict ? lo > 0.0 : lo >= 0.0;
}

void throw_if_any(const std::vector<std::string>& problems) {
  if (problems.empty()) return;
  std::string msg;
  for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
  throw Error(ErrorCode::kValidationError, msg);
}

}  // namespace

void AdmittanceParams::validate() const {
  std::vector<std::string> problems;
  if (!is_psd(mass, true)) problems.emplace_back("admittance.mass must be positive definite");
  if (!is_psd(damping, false)) problems.emplace_back("admittance.damping must be PSD");
  if (!is_psd(stiffness, false)) problems.emplace_back("admittance.stiffness must be PSD");
  throw_if_any(problems);
}

ReferenceState admittance_reference(const Wrench& tau_hat, const ReferenceState& ref,
                                    const AdmittanceParams& params, double dt) {
  const Mat3 m_inv = params.mass.inverse();
  Eigen::Matrix<double, 9, 9> a = Eigen::Matrix<double, 9, 9>::Zero();
  a.block<3, 3>(0, 3) = Mat3::Identity();
  a.block<3, 3>(3, 0) = -m_inv * params.stiffness;
  a.block<3, 3>(3, 3) = -m_inv * params.damping;
  a.block<3, 3>(3, 6) = m_inv;
  Eigen::Matrix<double, 9, 1> z;
  z << ref.position - ref.anchor, ref.velocity, tau_hat.force;
  const Eigen::Matrix<double, 9, 1> next = expm(a * dt) * z;

  ReferenceState out = ref;
  out.position = ref.anchor + next.head<3>();
  out.velocity = next.segment<3>(3);
  out.acceleration = m_inv * (tau_hat.force - params.damping * out.velocity -
                              params.stiffness * next.head<3>());
  return out;
}

void ControllerGains::validate() const {
  std::vector<std::string> problems;
  if (!(position >= 0.0)) problems.emplace_back("controller.position_gain must be >= 0");
  if (!(velocity >= 0.0)) problems.emplace_back("controller.velocity_gain must be >= 0");
  if (!(attitude >= 0.0)) problems.emplace_back("controller.attitude_gain must be >= 0");
  if (!(rate >= 0.0)) problems.emplace_back("controller.rate_gain must be >= 0");
  throw_if_any(problems);
}

ControlInput tracking_controller(const BodyState& s, const ReferenceState& ref,
                                 const SystemParams& p, const ControllerGains& gains,
                                 double thrust_limit) {
  const Vec3 acc = ref.acceleration + gains.position * (ref.position - s.r) +
                   gains.velocity * (ref.velocity - s.v) + p.gravity * kUnitZ;
  const Mat3 rot = quat_to_rot(s.q);

  ControlInput u;
  u.thrust = std::clamp(p.mass * acc.dot(rot * kUnitZ), 0.0, thrust_limit);

  // Desired attitude: body z along the commanded acceleration, heading from yaw.
  const Vec3 z_d = acc.norm() > 1e-9 ? Vec3(acc.normalized()) : kUnitZ;
  const Vec3 heading(std::cos(ref.yaw), std::sin(ref.yaw), 0.0);
  Vec3 y_d = z_d.cross(heading);
  if (y_d.norm() < 1e-9) y_d = z_d.cross(Vec3::UnitY()).cross(z_d);
  y_d.normalize();
  Mat3 r_d;
  r_d << y_d.cross(z_d), y_d, z_d;
  const UnitQuaternion q_d = rot_to_quat(r_d);

  const Vec3 e = quat_to_rotvec(s.q.inverse() * q_d).p;
  const Mat3& j = p.inertia;
  u.moments = j * (gains.attitude * e - gains.rate * s.omega) + s.omega.cross(j * s.omega);
  return u;
}

NoiseSource::NoiseSource(std::uint64_t seed) {
  auto seeded = [seed](std::uint64_t channel) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(channel)};
    return std::mt19937_64(seq);
  };
  attitude_ = seeded(0);
  position_ = seeded(1);
  rate_ = seeded(2);
}

Vec3 NoiseSource::draw(std::mt19937_64& gen, const Vec3& variance) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 out;
  // Draw all three even for zero variance so streams stay aligned.
  for (int i = 0; i < 3; ++i) out[i] = n(gen) * std::sqrt(std::max(variance[i], 0.0));
  return out;
}

Measurement inject_noise(const BodyState& truth, const Mat9& r, NoiseSource& noise) {
  const Vec9 var = r.diagonal();
  Measurement y;
  y.q = oplus(truth.q, RotationVector(noise.attitude(var.segment<3>(0))));
  y.r = truth.r + noise.position(var.segment<3>(3));
  y.omega = truth.omega + noise.rate(var.segment<3>(6));
  return y;
}

namespace {

BodyState advance(const BodyState& s, const BodyStateDerivative& d, double h) {
  BodyState out;
  out.q = UnitQuaternion(Vec4(s.q.coeffs() + h * d.q_dot));
  out.r = s.r + h * d.r_dot;
  out.v = s.v + h * d.v_dot;
  out.omega = s.omega + h * d.omega_dot;
  return out;
}

}  // namespace

BodyState rk4_step(const BodyState& s, const ControlInput& u, const ForceProfile& profile,
                   const SystemParams& p, double t, double dt) {
  const Wrench w0 = force_profile_eval(profile, t);
  const Wrench wh = force_profile_eval(profile, t + 0.5 * dt);
  const Wrench w1 = force_profile_eval(profile, t + dt);
  const BodyStateDerivative k1 = system_derivative(s, u, w0, p);
  const BodyStateDerivative k2 = system_derivative(advance(s, k1, 0.5 * dt), u, wh, p);
  const BodyStateDerivative k3 = system_derivative(advance(s, k2, 0.5 * dt), u, wh, p);
  const BodyStateDerivative k4 = system_derivative(advance(s, k3, dt), u, w1, p);
  BodyStateDerivative sum;
  sum.q_dot = k1.q_dot + 2.0 * k2.q_dot + 2.0 * k3.q_dot + k4.q_dot;
  sum.r_dot = k1.r_dot + 2.0 * k2.r_dot + 2.0 * k3.r_dot + k4.r_dot;
  sum.v_dot = k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot;
  sum.omega_dot = k1.omega_dot + 2.0 * k2.omega_dot + 2.0 * k3.omega_dot + k4.omega_dot;
  return advance(s, sum, dt / 6.0);
}

}  // namespace qukf
