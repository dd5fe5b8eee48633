#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qukf/error.hpp"
#include "qukf/simulation.hpp"

using namespace qukf;

namespace {

double energy(const BodyState& s, const SystemParams& p) {
  return 0.5 * p.mass * s.v.squaredNorm() + p.mass * p.gravity * s.r.z() +
         0.5 * s.omega.dot(p.inertia * s.omega);
}

double state_distance(const BodyState& a, const BodyState& b) {
  return (a.r - b.r).norm() + (a.v - b.v).norm() + (a.omega - b.omega).norm() +
         quat_diff(a.q, b.q).angle();
}

ScenarioConfig null_config(double duration) {
  ScenarioConfig c;
  c.profile.segments.clear();
  c.run.noise_scale = 0.0;
  c.run.duration = duration;
  return c;
}

double max_drift(const ScenarioResult& res, const Vec3& start) {
  double d = 0.0;
  for (const auto& rec : res.records) d = std::max(d, (rec.truth.r - start).norm());
  return d;
}

}  // namespace

TEST(ForceProfile, Evaluation) {
  ForceProfile p;
  p.segments = {{2.0, 4.0, Vec3(2.0, 0.0, 0.0), Vec3::Zero(), 0.0},
                {6.0, 10.0, Vec3(0.0, 2.0, 0.0), Vec3(0.0, 0.0, 0.4), 1.0}};
  p.validate();
  EXPECT_TRUE(force_profile_eval(p, 1.0).stacked().isZero(0.0));
  EXPECT_EQ(force_profile_eval(p, 3.0).force, Vec3(2.0, 0.0, 0.0));
  EXPECT_TRUE(force_profile_eval(p, 5.0).stacked().isZero(0.0));
  // Ramp midpoints on the way up and down.
  EXPECT_NEAR(force_profile_eval(p, 6.5).force.y(), 1.0, 1e-15);
  EXPECT_NEAR(force_profile_eval(p, 9.5).force.y(), 1.0, 1e-15);
  EXPECT_NEAR(force_profile_eval(p, 6.5).torque.z(), 0.2, 1e-15);
  EXPECT_EQ(force_profile_eval(p, 8.0).force, Vec3(0.0, 2.0, 0.0));
  EXPECT_TRUE(force_profile_eval(p, 11.0).stacked().isZero(0.0));
  // Quarter point of the rise, against the cubic directly.
  const double s = 0.25;
  EXPECT_NEAR(force_profile_eval(p, 6.25).force.y(), 2.0 * (3 * s * s - 2 * s * s * s), 1e-15);
}

TEST(ForceProfile, SmoothstepShape) {
  EXPECT_EQ(smoothstep(-1.0), 0.0);
  EXPECT_EQ(smoothstep(2.0), 1.0);
  for (double s = 0.0; s <= 1.0; s += 0.01) {
    EXPECT_NEAR(smoothstep(s) + smoothstep(1.0 - s), 1.0, 1e-15);
    // Derivative 6 s (1 - s), zero at both ends.
    const double h = 1e-6;
    if (s > h && s < 1.0 - h) {
      EXPECT_NEAR((smoothstep(s + h) - smoothstep(s - h)) / (2 * h), 6 * s * (1 - s), 1e-8);
    }
  }
}

TEST(ForceProfile, DefaultPulses) {
  const ForceProfile p = ForceProfile::defaults();
  p.validate();
  EXPECT_EQ(force_profile_eval(p, 10.0).force, Vec3(2.0, 0.0, 0.0));
  EXPECT_EQ(force_profile_eval(p, 25.0).force, Vec3(0.0, 2.0, 0.0));
  EXPECT_EQ(force_profile_eval(p, 40.0).force, Vec3(0.0, 0.0, 2.0));
  EXPECT_EQ(force_profile_eval(p, 54.0).torque, Vec3(0.0, 0.0, 0.5));
  EXPECT_TRUE(force_profile_eval(p, 65.0).stacked().isZero(0.0));
}

TEST(ForceProfile, Validation) {
  ForceProfile p;
  p.segments = {{0.0, 4.0, Vec3::UnitX(), Vec3::Zero(), 0.0},
                {3.0, 6.0, Vec3::UnitX(), Vec3::Zero(), 0.0}};
  EXPECT_THROW(p.validate(), Error);
  p.segments = {{0.0, 1.0, Vec3::UnitX(), Vec3::Zero(), 0.6}};
  EXPECT_THROW(p.validate(), Error);
  p.segments = {{2.0, 1.0, Vec3::UnitX(), Vec3::Zero(), 0.0}};
  try {
    p.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidationError);
    EXPECT_NE(std::string(e.what()).find("segments[0].end"), std::string::npos);
  }
}

TEST(Admittance, RestWithoutForce) {
  const AdmittanceParams params;
  ReferenceState ref;
  ref.anchor = ref.position = Vec3(1.0, 2.0, 3.0);
  const ReferenceState next = admittance_reference({}, ref, params, 0.01);
  EXPECT_EQ(next.position, ref.position);
  EXPECT_TRUE(next.velocity.isZero(0.0));
}

TEST(Admittance, MatchesFirstOrderResponse) {
  // M v' + C v = F from rest: v = F/C (1 - e^{-t/tau}), tau = M / C.
  const AdmittanceParams params;
  const double f = 1.59, c = 1.59, m = 1.0, tau = m / c, dt = 0.01;
  EXPECT_NEAR(tau, 0.629, 1e-3);
  ReferenceState ref;
  const Wrench w{Vec3(f, 0.0, 0.0), Vec3::Zero()};
  for (int k = 1; k <= 1000; ++k) {
    ref = admittance_reference(w, ref, params, dt);
    const double t = k * dt;
    const double v = f / c * (1.0 - std::exp(-t / tau));
    const double x = f / c * (t - tau * (1.0 - std::exp(-t / tau)));
    ASSERT_NEAR(ref.velocity.x(), v, 1e-12) << t;
    ASSERT_NEAR(ref.position.x(), x, 1e-11) << t;
    if (std::abs(t - 5 * tau) < dt / 2) EXPECT_NEAR(ref.velocity.x(), 1.0, 0.01);
  }
  EXPECT_NEAR(ref.velocity.x(), 1.0, 1e-6);
  EXPECT_EQ(ref.velocity.y(), 0.0);
}

TEST(Admittance, SpringSettlesAtForceOverStiffness) {
  AdmittanceParams params;
  params.stiffness = 4.0 * Mat3::Identity();
  ReferenceState ref;
  ref.anchor = ref.position = Vec3(0.0, 0.0, 1.0);
  const Wrench w{Vec3(0.0, 2.0, 0.0), Vec3::Zero()};
  for (int k = 0; k < 3000; ++k) ref = admittance_reference(w, ref, params, 0.01);
  EXPECT_NEAR(ref.position.y(), 0.5, 1e-9);
  EXPECT_NEAR(ref.position.z(), 1.0, 1e-12);
  EXPECT_LT(ref.velocity.norm(), 1e-9);
}

TEST(Controller, EquilibriumAndClimb) {
  const SystemParams p;
  const ControllerGains gains;
  BodyState s;
  s.r = Vec3(0.0, 0.0, 1.0);
  ReferenceState ref;
  ref.position = s.r;
  const ControlInput u = tracking_controller(s, ref, p, gains, 2 * p.u_max);
  EXPECT_NEAR(u.thrust, p.mass * p.gravity, 1e-12);
  EXPECT_NEAR(u.thrust, 34.2369, 1e-9);
  EXPECT_LT(u.moments.norm(), 1e-12);

  ref.position.z() += 1.0;
  EXPECT_GT(tracking_controller(s, ref, p, gains, 2 * p.u_max).thrust, p.mass * p.gravity);
  ref.position.z() -= 100.0;
  EXPECT_EQ(tracking_controller(s, ref, p, gains, 2 * p.u_max).thrust, 0.0);
  ref.position.z() += 200.0;
  EXPECT_EQ(tracking_controller(s, ref, p, gains, 2 * p.u_max).thrust, 2 * p.u_max);
}

TEST(Controller, LateralOffsetTiltsTowardTarget) {
  const SystemParams p;
  BodyState s;
  ReferenceState ref;
  ref.position = Vec3(1.0, 0.0, 0.0);
  const ControlInput u = tracking_controller(s, ref, p, ControllerGains{}, 2 * p.u_max);
  // Tilting the thrust toward +x needs positive pitch moment.
  EXPECT_GT(u.moments.y(), 0.0);
  EXPECT_NEAR(u.moments.x(), 0.0, 1e-12);
}

TEST(Noise, ZeroCovarianceIsExact) {
  BodyState s;
  s.q = rotvec_to_quat(RotationVector(0.1, -0.2, 0.3));
  s.r = Vec3(1.0, 2.0, 3.0);
  s.omega = Vec3(0.4, 0.5, 0.6);
  NoiseSource src(1);
  const Measurement m = inject_noise(s, Mat9::Zero(), src);
  EXPECT_EQ(m.r, s.r);
  EXPECT_EQ(m.omega, s.omega);
  EXPECT_LT(quat_diff(m.q, s.q).angle(), 1e-15);
}

TEST(Noise, SampleMomentsMatchCovariance) {
  Mat9 r = Mat9::Zero();
  const Vec9 d = (Vec9() << 1e-4, 4e-4, 9e-4, 1e-2, 2e-2, 3e-2, 0.25, 1.0, 4.0).finished();
  r.diagonal() = d;
  BodyState s;
  s.q = rotvec_to_quat(RotationVector(0.3, 0.2, -0.1));
  NoiseSource src(7);
  const int n = 100000;
  Vec9 sum = Vec9::Zero(), sq = Vec9::Zero();
  for (int i = 0; i < n; ++i) {
    const Measurement m = inject_noise(s, r, src);
    ASSERT_NEAR(m.q.coeffs().norm(), 1.0, 1e-12);
    Vec9 e;
    e << quat_diff(m.q, s.q).p, m.r - s.r, m.omega - s.omega;
    sum += e;
    sq += e.cwiseProduct(e);
  }
  for (int i = 0; i < 9; ++i) {
    const double mean = sum[i] / n;
    const double var = sq[i] / n - mean * mean;
    EXPECT_NEAR(var / d[i], 1.0, 0.03) << i;
    EXPECT_LT(std::abs(mean), 4.0 * std::sqrt(d[i] / n)) << i;
  }
}

TEST(Noise, ChannelsUseIndependentStreams) {
  Mat9 a = Mat9::Identity() * 1e-2;
  Mat9 b = a;
  b.block<3, 3>(3, 3) *= 100.0;
  BodyState s;
  NoiseSource sa(3), sb(3);
  for (int i = 0; i < 50; ++i) {
    const Measurement ma = inject_noise(s, a, sa);
    const Measurement mb = inject_noise(s, b, sb);
    EXPECT_EQ(ma.omega, mb.omega);
    EXPECT_EQ(ma.q.coeffs(), mb.q.coeffs());
    EXPECT_LT((mb.r - 10.0 * ma.r).norm(), 1e-14);
  }
}

TEST(Rk4, HoverIsAnEquilibrium) {
  const SystemParams p;
  BodyState s;
  s.r = Vec3(0.0, 0.0, 1.0);
  const ControlInput u{p.mass * p.gravity, Vec3::Zero()};
  BodyState x = s;
  for (int k = 0; k < 1000; ++k) x = rk4_step(x, u, {}, p, k * 0.01, 0.01);
  EXPECT_LT(state_distance(x, s), 1e-12);
}

TEST(Rk4, EnergyConservedWithoutInputs) {
  const SystemParams p;
  BodyState s;
  s.r = Vec3(0.0, 0.0, 100.0);
  s.v = Vec3(1.0, -2.0, 3.0);
  s.omega = Vec3(0.5, 0.05, -0.4);  // off-principal spin about the unstable axis too
  const double e0 = energy(s, p);
  const double dt = 0.01, horizon = 10.0;
  for (int k = 0; k < static_cast<int>(horizon / dt); ++k) s = rk4_step(s, {}, {}, p, k * dt, dt);
  EXPECT_LT(std::abs(energy(s, p) - e0) / std::abs(e0) / horizon, 1e-3);
  EXPECT_NEAR(s.q.coeffs().norm(), 1.0, 1e-12);
}

TEST(Rk4, FourthOrderConvergence) {
  const SystemParams p;
  BodyState s0;
  s0.omega = Vec3(1.0, 2.0, -0.5);
  s0.v = Vec3(0.2, 0.0, 0.1);
  const ControlInput u{30.0, Vec3(0.02, -0.001, 0.03)};
  ForceProfile profile;
  profile.segments = {{0.0, 1.0, Vec3(1.0, 0.5, 0.0), Vec3(0.0, 0.0, 0.1), 0.5}};
  auto integrate = [&](double dt) {
    BodyState s = s0;
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < n; ++k) s = rk4_step(s, u, profile, p, k * dt, dt);
    return s;
  };
  const BodyState ref = integrate(1.0 / 1280);
  const double e1 = state_distance(integrate(0.02), ref);
  const double e2 = state_distance(integrate(0.01), ref);
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.5);
}

TEST(Scenario, Deterministic) {
  ScenarioConfig c;
  c.run.duration = 6.0;
  const ScenarioResult a = run_scenario(c);
  const ScenarioResult b = run_scenario(c);
  ASSERT_EQ(a.records.size(), 601u);
  EXPECT_TRUE(a.records == b.records);
  for (std::size_t i = 1; i < a.records.size(); ++i) {
    EXPECT_NEAR(a.records[i].t - a.records[i - 1].t, 0.01, 1e-12);
  }
  c.run.seed = 43;
  EXPECT_FALSE(run_scenario(c).records == a.records);
}

TEST(Scenario, EstimatorSelection) {
  ScenarioConfig c;
  c.run.duration = 0.5;
  c.run.metric_window = 0.0;
  c.run.estimators = {"ekf"};
  const ScenarioResult r = run_scenario(c);
  EXPECT_FALSE(r.records.back().qukf.has_value());
  EXPECT_TRUE(r.records.back().ekf.has_value());
  c.run.estimators = {};
  EXPECT_THROW(run_scenario(c), Error);
}

TEST(Scenario, NullRunWithEkfLeadHoldsStill) {
  ScenarioConfig c = null_config(60.0);
  c.run.estimators = {"ekf"};
  const ScenarioResult r = run_scenario(c);
  EXPECT_LT(max_drift(r, c.run.initial_position), 1e-3);
  for (const auto& rec : r.records) {
    if (rec.t < 1.0) continue;
    const EstimateRecord& e = *rec.ekf;
    const double err = state_distance(e.state.body(), rec.truth) +
                       (e.wrench.stacked() - rec.truth_wrench.stacked()).norm();
    ASSERT_LT(err, 1e-6) << rec.t;
  }
}

TEST(Scenario, NullRunWithQukfLeadDriftsByItsLiftBias) {
  // The unscented lift bias shows up as a small upward force estimate; the
  // admittance layer turns it into a reference velocity F / C_v.
  const ScenarioConfig c = null_config(60.0);
  const ScenarioResult r = run_scenario(c);
  double predicted = 0.0;
  for (const auto& rec : r.records) {
    predicted += rec.qukf->wrench.force.z() / c.admittance.damping(2, 2) * c.run.dt;
  }
  const double dz = r.records.back().truth.r.z() - c.run.initial_position.z();
  EXPECT_GT(dz, 0.0);
  EXPECT_NEAR(dz / predicted, 1.0, 0.05);
  EXPECT_LT(std::abs(r.records.back().truth.r.x()), 1e-9);

  // Without attitude spread the unscented prediction has no bias.
  ScenarioConfig flat = null_config(60.0);
  for (int base : {tangent::kRot, tangent::kOmega}) {
    flat.filter.initial_cov.block<3, 3>(base, base).setZero();
    flat.filter.noise.process.block<3, 3>(base, base).setZero();
  }
  const ScenarioResult rf = run_scenario(flat);
  EXPECT_LT(max_drift(rf, flat.run.initial_position), 1e-3);
  for (const auto& rec : rf.records) {
    if (rec.t < 1.0) continue;
    ASSERT_LT(state_distance(rec.qukf->state.body(), rec.truth) + rec.qukf->wrench.stacked().norm(),
              1e-6)
        << rec.t;
  }
}

TEST(Scenario, HoldsHover) {
  ScenarioConfig c = null_config(15.0);
  const ScenarioResult clean = run_scenario(c);
  for (const auto& rec : clean.records) {
    if (rec.t >= 5.0) ASSERT_LT((rec.truth.r - c.run.initial_position).norm(), 0.01) << rec.t;
  }
  // With the default sensor noise the position estimate alone is off by
  // about 7 mm RMS, so only a looser bound holds.
  c.run.noise_scale = 1.0;
  const ScenarioResult noisy = run_scenario(c);
  double sq = 0.0;
  int n = 0;
  for (const auto& rec : noisy.records) {
    if (rec.t < 5.0) continue;
    sq += (rec.truth.r - c.run.initial_position).squaredNorm();
    ++n;
    ASSERT_LT((rec.truth.r - c.run.initial_position).norm(), 0.1) << rec.t;
  }
  EXPECT_LT(std::sqrt(sq / n), 0.05);
}

TEST(Scenario, StepForceMovesAlongX) {
  ScenarioConfig c;
  c.profile.segments = {{1.0, 20.0, Vec3(2.0, 0.0, 0.0), Vec3::Zero(), 0.0}};
  c.run.duration = 6.0;
  c.run.noise_scale = 0.0;
  c.filter.wrench_model = WrenchModel::kInDynamics;
  const ScenarioResult r = run_scenario(c);
  const TelemetryRecord& last = r.records.back();
  EXPECT_GT(last.truth.v.x(), 0.5);
  EXPECT_GT(last.truth.r.x(), 1.0);
  EXPECT_LT(std::abs(last.truth.r.y()), 1e-3);
  // With the estimated wrench in the prediction model the estimate settles on
  // the applied force; the remaining ripple follows the closed-loop velocity
  // oscillation.
  for (const auto& rec : r.records) {
    if (rec.t >= 1.25) ASSERT_NEAR(rec.qukf->wrench.force.x(), 2.0, 0.15) << rec.t;
    if (rec.t >= 4.0) ASSERT_NEAR(rec.qukf->wrench.force.x(), 2.0, 0.05) << rec.t;
  }
}

TEST(Scenario, DivergenceIsReported) {
  ScenarioConfig c;
  c.profile.segments = {{0.0, 10.0, Vec3(1e9, 0.0, 0.0), Vec3::Zero(), 0.0}};
  c.run.duration = 10.0;
  try {
    run_scenario(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDivergenceDetected);
  }
}
