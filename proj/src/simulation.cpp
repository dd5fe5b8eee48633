#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "qukf/error.hpp"
#include "qukf/simulation.hpp"

namespace qukf {

namespace {

bool same_quat(const UnitQuaternion& a, const UnitQuaternion& b) {
  return a.coeffs() == b.coeffs();
}

bool same_state(const AugmentedState& a, const AugmentedState& b) {
  return same_quat(a.q, b.q) && a.r == b.r && a.v == b.v && a.omega == b.omega &&
         a.upsilon == b.upsilon && a.pad.size() == b.pad.size() && a.pad == b.pad;
}

bool same_body(const BodyState& a, const BodyState& b) {
  return same_quat(a.q, b.q) && a.r == b.r && a.v == b.v && a.omega == b.omega;
}

bool same_wrench(const Wrench& a, const Wrench& b) {
  return a.force == b.force && a.torque == b.torque;
}

void check_bounded(const AugmentedState& x, const std::string& name, double t) {
  const double n = std::sqrt(x.r.squaredNorm() + x.v.squaredNorm() + x.omega.squaredNorm() +
                             x.upsilon.squaredNorm() + x.pad.squaredNorm());
  if (!std::isfinite(n) || n > 1e6) {
    throw Error(ErrorCode::kDivergenceDetected,
                name + " estimate diverged at t = " + std::to_string(t) + " s");
  }
}

}  // namespace

bool EstimateRecord::operator==(const EstimateRecord& o) const {
  return same_state(state, o.state) && same_wrench(wrench, o.wrench) && nis == o.nis;
}

bool TelemetryRecord::operator==(const TelemetryRecord& o) const {
  return t == o.t && same_body(truth, o.truth) && same_wrench(truth_wrench, o.truth_wrench) &&
         same_quat(measurement.q, o.measurement.q) && measurement.r == o.measurement.r &&
         measurement.omega == o.measurement.omega && qukf == o.qukf && ekf == o.ekf &&
         control.thrust == o.control.thrust && control.moments == o.control.moments &&
         rotor_commands == o.rotor_commands;
}

void RunConfig::validate() const {
  std::vector<std::string> problems;
  if (!(dt > 0.0)) problems.emplace_back("run.dt must be > 0");
  if (!(duration >= dt)) problems.emplace_back("run.duration must be >= run.dt");
  if (estimators.empty()) problems.emplace_back("run.estimators must name at least one estimator");
  for (const auto& e : estimators) {
    if (e != "qukf" && e != "ekf") problems.push_back("run.estimators: unknown estimator '" + e + "'");
  }
  if (!initial_position.allFinite()) problems.emplace_back("run.initial_position must be finite");
  if (!(metric_window >= 0.0)) problems.emplace_back("run.metric_window must be >= 0");
  if (metric_window > duration) {
    problems.emplace_back("run.metric_window must not exceed run.duration");
  }
  if (!(noise_scale >= 0.0)) problems.emplace_back("run.noise_scale must be >= 0");
  if (!problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw Error(ErrorCode::kValidationError, msg);
  }
}

bool RunConfig::enabled(const std::string& name) const {
  return std::find(estimators.begin(), estimators.end(), name) != estimators.end();
}

void ScenarioConfig::validate() const {
  std::string msg;
  auto collect = [&msg](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kValidationError) throw;
      // Drop the "ValidationError: " prefix of the nested message.
      std::string what = e.what();
      const std::string prefix = std::string(to_string(e.code())) + ": ";
      if (what.starts_with(prefix)) what.erase(0, prefix.size());
      msg += (msg.empty() ? "" : "; ") + what;
    }
  };
  collect([&] { system.validate(); });
  collect([&] { filter.validate(); });
  collect([&] { admittance.validate(); });
  collect([&] { controller.validate(); });
  collect([&] { profile.validate(); });
  collect([&] { run.validate(); });
  if (!msg.empty()) throw Error(ErrorCode::kValidationError, msg);
}

ScenarioResult run_scenario(const ScenarioConfig& config, const UpdateHook& hook) {
  config.validate();
  const SystemParams& p = config.system;
  const RunConfig& run = config.run;
  const double dt = run.dt;
  const auto steps = static_cast<long>(std::llround(run.duration / dt));

  std::unique_ptr<QukfFilter> qukf;
  std::unique_ptr<EkfFilter> ekf;
  if (run.enabled("qukf")) qukf = std::make_unique<QukfFilter>(p, dt, config.filter);
  if (run.enabled("ekf")) ekf = std::make_unique<EkfFilter>(p, dt, config.filter);
  // The controller and the admittance layer follow the QUKF when it runs.
  const Estimator& lead = qukf ? static_cast<const Estimator&>(*qukf) : *ekf;

  const Mat9 r_inject = config.filter.noise.measurement * (run.noise_scale * run.noise_scale);
  NoiseSource noise(run.seed);

  BodyState truth;
  truth.r = run.initial_position;
  ReferenceState ref;
  ref.anchor = run.initial_position;
  ref.position = run.initial_position;

  ScenarioResult result;
  result.records.reserve(static_cast<std::size_t>(steps + 1));
  ControlInput u_prev;
  double qukf_time = 0.0;
  double ekf_time = 0.0;
  long updates = 0;

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k > 0) truth = rk4_step(truth, u_prev, config.profile, p, t - dt, dt);
    const Measurement y = inject_noise(truth, r_inject, noise);

    TelemetryRecord rec;
    rec.t = t;
    rec.truth = truth;
    rec.truth_wrench = force_profile_eval(config.profile, t);
    rec.measurement = y;

    auto advance = [&](Estimator& f, double& elapsed) -> EstimateRecord {
      StepDiagnostics diag;
      if (k == 0) {
        f.initialize(y);
      } else {
        const auto t0 = std::chrono::steady_clock::now();
        diag = f.step(u_prev, y);
        elapsed += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                       .count();
        if (hook) hook(t, f, diag);
      }
      EstimateRecord e{f.state(), f.wrench(), diag.nis};
      check_bounded(e.state, f.name(), t);
      return e;
    };
    if (qukf) rec.qukf = advance(*qukf, qukf_time);
    if (ekf) rec.ekf = advance(*ekf, ekf_time);
    if (k > 0) ++updates;

    ref = admittance_reference(lead.wrench(), ref, config.admittance, dt);
    const ControlInput u_des =
        tracking_controller(lead.state().body(), ref, p, config.controller, config.thrust_limit());
    const RotorLimitResult limited = apply_rotor_limits(allocate(u_des, p), p);
    rec.control = system_input(limited.realized, p);
    rec.rotor_commands = limited.realized;
    u_prev = rec.control;
    result.records.push_back(std::move(rec));
  }
  if (updates > 0) {
    result.qukf_update_ms = qukf_time / static_cast<double>(updates);
    result.ekf_update_ms = ekf_time / static_cast<double>(updates);
  }
  return result;
}

}  // namespace qukf
