#pragma once

// Rigid-body model of the two-quadrotor / payload assembly, control
// allocation, and the acceleration-free external wrench observer.

#include <Eigen/Core>
#include <array>
#include <utility>

#include "qukf/quaternion.hpp"

namespace qukf {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat6x4 = Eigen::Matrix<double, 6, 4>;
using Mat4x8 = Eigen::Matrix<double, 4, 8>;

inline constexpr int kLiftedDim = 20;
using Vec20 = Eigen::Matrix<double, kLiftedDim, 1>;
using Mat20 = Eigen::Matrix<double, kLiftedDim, kLiftedDim>;

struct RotorParams {
  double thrust_constant = 1.0e-5;  // k_t, N / (rad/s)^2
  double drag_constant = 5.0e-7;    // k_m, N m / (rad/s)^2
  double arm_length = 0.25;         // iota, m

  double drag_ratio() const { return drag_constant / thrust_constant; }
};

struct SystemParams {
  double mass = 3.49;                                             // m_s, kg
  Mat3 inertia = Eigen::Vector3d(3.227, 0.061, 3.277).asDiagonal();  // kg m^2
  double gravity = 9.81;                                          // m/s^2
  double payload_length = 2.0;                                    // m
  Vec3 attach_offset_1{0.0, 1.0, 0.0};                            // l_1, body frame, m
  Vec3 attach_offset_2{0.0, -1.0, 0.0};                           // l_2, body frame, m
  double u_max = 35.0;                                            // per-UAV thrust cap, N
  double delta = 72.0;                                            // observer gain
  RotorParams rotor;
  std::array<double, 8> lambda_weights{1, 1, 1, 1, 1, 1, 1, 1};  // kappa_ij

  /// Throws Error(kValidationError) listing every violated invariant.
  void validate() const;

  /// blkdiag(m_s I3, J)
  Mat6 inertia_matrix() const;
  /// A = delta * M^-1
  Mat6 observer_gain() const;
};

struct BodyState {
  UnitQuaternion q;
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();  // body frame
};

struct BodyStateDerivative {
  Vec4 q_dot = Vec4::Zero();
  Vec3 r_dot = Vec3::Zero();
  Vec3 v_dot = Vec3::Zero();
  Vec3 omega_dot = Vec3::Zero();
};

struct Wrench {
  Vec3 force = Vec3::Zero();   // inertial frame, N
  Vec3 torque = Vec3::Zero();  // body frame, N m

  Vec6 stacked() const;
  static Wrench from_stacked(const Vec6& w);
};

struct ControlInput {
  double thrust = 0.0;          // F_th, N
  Vec3 moments = Vec3::Zero();  // U_tau, N m

  Eigen::Vector4d stacked() const { return {thrust, moments.x(), moments.y(), moments.z()}; }
  static ControlInput from_stacked(const Eigen::Vector4d& u);
};

struct ObserverState {
  Vec6 upsilon = Vec6::Zero();
};

/// The 4x4 matrix Xi(omega) with q_dot = 0.5 * Xi(omega) * q.
Mat4 xi_matrix(const Vec3& omega);

/// Continuous dynamics of the combined rigid body.
BodyStateDerivative system_derivative(const BodyState& s, const ControlInput& u,
                                      const Wrench& tau_h, const SystemParams& p);

// Component-level models. Used as a consistency oracle for the combined
// model; link forces are inertial-frame, link torques and offsets body-frame.
struct RigidComponent {
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();
};

/// Single quadrotor with the reaction (F_i, T_i) it exerts on the payload.
BodyStateDerivative quadrotor_derivative(const BodyState& s, const ControlInput& u,
                                         const Vec3& link_force, const Vec3& link_torque,
                                         const RigidComponent& body, double gravity);

/// Payload driven by both link reactions plus an optional external wrench.
BodyStateDerivative payload_derivative(const BodyState& s,
                                       const std::array<Vec3, 2>& link_forces,
                                       const std::array<Vec3, 2>& link_torques,
                                       const std::array<Vec3, 2>& offsets,
                                       const RigidComponent& body, double gravity,
                                       const Wrench& external = {});

/// Per-quadrotor rotor mixing: (f1..f4) -> (u1, u_tau).
ControlInput rotor_mix(const std::array<double, 4>& rotor_thrusts, const RotorParams& rotor);
/// Inverse of rotor_mix.
std::array<double, 4> rotor_unmix(const ControlInput& u, const RotorParams& rotor);

Mat4x8 build_config_matrix(const SystemParams& p);

/// Cost-weighted minimum-norm solution of C u_c = [F_th, U_tau]. Throws
/// Error(kSingularAllocation) if the Gram matrix condition number exceeds 1e12.
Vec8 allocate(const ControlInput& u, const SystemParams& p);

struct RotorLimitResult {
  Vec8 realized = Vec8::Zero();             // per-UAV [u1, u_tau] after clipping
  std::array<double, 8> rotor_thrusts{};   // f_ij after clipping
  int saturated_rotors = 0;
};

/// Clips every rotor of every UAV to [0, u_max / 4] and re-mixes.
RotorLimitResult apply_rotor_limits(const Vec8& uc, const SystemParams& p);

/// [F_th, U_tau] = C u_c
ControlInput system_input(const Vec8& uc, const SystemParams& p);

struct CompactModel {
  Mat6 m = Mat6::Zero();
  Vec6 g = Vec6::Zero();
  Mat6x4 w = Mat6x4::Zero();
};

/// tau_h = M chi_ddot + G + W u
CompactModel compact_matrices(const BodyState& s, const SystemParams& p);

/// Gamma = delta * [v; omega]
Vec6 observer_gamma(const BodyState& s, const SystemParams& p);

/// d(Upsilon)/dt = -A Upsilon + A (G + W u - Gamma)
Vec6 observer_derivative(const ObserverState& obs, const BodyState& s, const ControlInput& u,
                         const SystemParams& p);

/// tau_hat = Upsilon + Gamma
Wrench wrench_estimate(const ObserverState& obs, const BodyState& s, const SystemParams& p);

/// Where the -A * Gamma term of the Upsilon row lives in f^c.
///  kStateCoupled: in the v / omega columns, so the exponential sees Gamma
///                 evolve over the step (default).
///  kAffine:       frozen at k-1 in the affine column.
enum class GammaPlacement { kStateCoupled, kAffine };

/// Whether the estimated wrench enters the velocity / rate rows of f^c.
///  kObserverOnly: v_dot and omega_dot omit the wrench; it is carried only by
///                 the Upsilon observer (the estimator's reference model).
///  kInDynamics:   v_dot and omega_dot also receive tau_hat = Upsilon + delta chi_dot.
enum class WrenchModel { kObserverOnly, kInDynamics };

/// Lifted state [q, r, v, omega, Upsilon, 1].
Vec20 lift_state(const BodyState& s, const ObserverState& obs);
std::pair<BodyState, ObserverState> unlift_state(const Vec20& x);

/// Continuous-time transition matrix with frozen coefficients, x_dot = f^c x.
Mat20 build_fc(const BodyState& s, const ControlInput& u, const ObserverState& obs,
               const SystemParams& p, GammaPlacement placement = GammaPlacement::kStateCoupled,
               WrenchModel wrench = WrenchModel::kObserverOnly);

/// x_k = exp(f^c T) x_{k-1}, q renormalized. Reference route through the
/// general matrix exponential.
std::pair<BodyState, ObserverState> discrete_transition(
    const BodyState& s, const ObserverState& obs, const ControlInput& u, const SystemParams& p,
    double dt, GammaPlacement placement = GammaPlacement::kStateCoupled,
    WrenchModel wrench = WrenchModel::kObserverOnly);

}  // namespace qukf
