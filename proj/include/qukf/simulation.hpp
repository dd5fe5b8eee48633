#pragma once

// Closed-loop scenario: RK4 ground truth, human wrench profile, admittance
// reference, tracking controller, noise injection and both estimators.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qukf/dynamics.hpp"
#include "qukf/filters.hpp"

namespace qukf {

struct ForceSegment {
  double start = 0.0;  // s
  double end = 0.0;    // s
  Vec3 force = Vec3::Zero();   // N, inertial
  Vec3 torque = Vec3::Zero();  // N m, body
  double ramp = 0.0;   // s, rise at the start and fall at the end, both inside [start, end]

  bool operator==(const ForceSegment&) const = default;
};

struct ForceProfile {
  std::vector<ForceSegment> segments;

  /// Throws Error(kValidationError) on overlapping or ill-formed segments.
  void validate() const;
  /// Pulses of 2 N along +x, +y, +z and a 0.5 N m yaw torque with 1 s ramps.
  static ForceProfile defaults();

  bool operator==(const ForceProfile&) const = default;
};

/// 3 s^2 - 2 s^3 on [0, 1], clamped outside.
double smoothstep(double s);

Wrench force_profile_eval(const ForceProfile& profile, double t);

struct AdmittanceParams {
  Mat3 mass = Mat3::Identity();          // M_v, kg
  Mat3 damping = 1.59 * Mat3::Identity();  // C_v, N s / m
  Mat3 stiffness = Mat3::Zero();         // K_v, N / m

  void validate() const;
};

struct ReferenceState {
  Vec3 anchor = Vec3::Zero();  // rest position of the virtual spring
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  double yaw = 0.0;
};

/// One step of M_v r'' + C_v r' + K_v (r - anchor) = F, exact for F held
/// constant over the step.
ReferenceState admittance_reference(const Wrench& tau_hat, const ReferenceState& ref,
                                    const AdmittanceParams& params, double dt);

struct ControllerGains {
  double position = 4.0;   // s^-2
  double velocity = 4.0;   // s^-1
  double attitude = 36.0;  // s^-2
  double rate = 12.0;      // s^-1

  void validate() const;
};

/// PD position loop -> thrust and desired attitude, quaternion-error PD
/// attitude loop -> moments. Thrust is clamped to [0, thrust_limit].
ControlInput tracking_controller(const BodyState& s, const ReferenceState& ref,
                                 const SystemParams& p, const ControllerGains& gains,
                                 double thrust_limit);

/// One independent stream per measurement channel.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed);

  Vec3 attitude(const Vec3& variance) { return draw(attitude_, variance); }
  Vec3 position(const Vec3& variance) { return draw(position_, variance); }
  Vec3 rate(const Vec3& variance) { return draw(rate_, variance); }

 private:
  static Vec3 draw(std::mt19937_64& gen, const Vec3& variance);

  std::mt19937_64 attitude_;
  std::mt19937_64 position_;
  std::mt19937_64 rate_;
};

/// q_m = q (+) n_q, r_m = r + n_r, omega_m = omega + n_omega, with n drawn
/// from the diagonal blocks of R.
Measurement inject_noise(const BodyState& truth, const Mat9& r, NoiseSource& noise);

/// Classical RK4 on the continuous model with the wrench profile sampled at
/// t, t + dt/2 and t + dt. The quaternion is renormalized at the end.
BodyState rk4_step(const BodyState& s, const ControlInput& u, const ForceProfile& profile,
                   const SystemParams& p, double t, double dt);

struct RunConfig {
  double dt = 0.01;        // s
  double duration = 70.0;  // s
  std::uint64_t seed = 42;
  std::vector<std::string> estimators{"qukf", "ekf"};
  Vec3 initial_position{0.0, 0.0, 1.0};  // m
  double metric_window = 1.0;  // s excluded at the start of the metrics
  double noise_scale = 1.0;    // multiplies the injected measurement noise

  void validate() const;
  bool enabled(const std::string& name) const;
};

struct ScenarioConfig {
  SystemParams system;
  FilterConfig filter = FilterConfig::defaults();
  AdmittanceParams admittance;
  ControllerGains controller;
  ForceProfile profile = ForceProfile::defaults();
  RunConfig run;

  /// Throws Error(kValidationError) listing every violated invariant.
  void validate() const;
  /// Combined thrust limit used by the tracking controller.
  double thrust_limit() const { return 2.0 * system.u_max; }
};

struct EstimateRecord {
  AugmentedState state;
  Wrench wrench;
  double nis = 0.0;

  bool operator==(const EstimateRecord& o) const;
};

struct TelemetryRecord {
  double t = 0.0;
  BodyState truth;
  Wrench truth_wrench;
  Measurement measurement;
  std::optional<EstimateRecord> qukf;
  std::optional<EstimateRecord> ekf;
  ControlInput control;
  Vec8 rotor_commands = Vec8::Zero();  // realized per-UAV [u1, u_tau] x 2

  bool operator==(const TelemetryRecord& o) const;
};

struct ScenarioResult {
  std::vector<TelemetryRecord> records;
  double qukf_update_ms = 0.0;  // mean wall time per QUKF step
  double ekf_update_ms = 0.0;
};

/// Called after every filter update with the estimator and its diagnostics.
using UpdateHook = std::function<void(double t, const Estimator&, const StepDiagnostics&)>;

/// Fixed-step closed loop. Deterministic given the config. Throws
/// Error(kDivergenceDetected) if an estimate leaves the ball of radius 1e6.
ScenarioResult run_scenario(const ScenarioConfig& config, const UpdateHook& hook = {});

}  // namespace qukf
