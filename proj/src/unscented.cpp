#include "qukf/unscented.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "qukf/error.hpp"
#include "qukf/linalg.hpp"

namespace qukf {

namespace {

UnitQuaternion naive_perturb(const UnitQuaternion& q, const Vec3& p) {
  Vec4 c = q.coeffs();
  c.tail<3>() += 0.5 * p;
  return UnitQuaternion(c);
}

Vec3 naive_difference(const UnitQuaternion& a, const UnitQuaternion& b) {
  const Vec4 ca = a.coeffs();
  const Vec4 cb = b.coeffs();
  const Vec4 d = ca.dot(cb) >= 0.0 ? Vec4(ca - cb) : Vec4(-ca - cb);
  return 2.0 * d.tail<3>();
}

Vec3 attitude_difference(const UnitQuaternion& a, const UnitQuaternion& b,
                         AttitudeAlgebra algebra) {
  return algebra == AttitudeAlgebra::kManifold ? quat_diff(a, b).p : naive_difference(a, b);
}

}  // namespace

Wrench AugmentedState::wrench(const SystemParams& p) const {
  return wrench_estimate(observer(), body(), p);
}

double UtWeights::spread() const { return std::sqrt(n + eta); }

UtWeights ut_weights(int n, double phi, double gamma, double sigma) {
  if (n < 1) throw Error(ErrorCode::kDegenerateScaling, "dimension must be >= 1");
  UtWeights w;
  w.n = n;
  w.eta = phi * phi * (n + sigma) - n;
  const double scale = n + w.eta;
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kDegenerateScaling, "n + eta must be positive");
  }
  w.mean = VectorXd::Constant(2 * n + 1, 1.0 / (2.0 * scale));
  w.cov = w.mean;
  w.mean[0] = w.eta / scale;
  w.cov[0] = w.eta / scale + 1.0 - phi * phi + gamma;
  return w;
}

AugmentedState state_oplus(const AugmentedState& x, const VectorXd& d, AttitudeAlgebra algebra) {
  using namespace tangent;
  AugmentedState out = x;
  const Vec3 rot = d.segment<3>(kRot);
  out.q = algebra == AttitudeAlgebra::kManifold ? oplus(x.q, RotationVector(rot))
                                                : naive_perturb(x.q, rot);
  out.r += d.segment<3>(kPos);
  out.v += d.segment<3>(kVel);
  out.omega += d.segment<3>(kOmega);
  out.upsilon += d.segment<6>(kUpsilon);
  if (x.pad.size() > 0) out.pad += d.segment(kPad, x.pad.size());
  return out;
}

AugmentedState state_ominus_vec(const AugmentedState& x, const VectorXd& d,
                                AttitudeAlgebra algebra) {
  using namespace tangent;
  AugmentedState out = x;
  const Vec3 rot = d.segment<3>(kRot);
  out.q = algebra == AttitudeAlgebra::kManifold ? ominus_vec(x.q, RotationVector(rot))
                                                : naive_perturb(x.q, -rot);
  out.r -= d.segment<3>(kPos);
  out.v -= d.segment<3>(kVel);
  out.omega -= d.segment<3>(kOmega);
  out.upsilon -= d.segment<6>(kUpsilon);
  if (x.pad.size() > 0) out.pad -= d.segment(kPad, x.pad.size());
  return out;
}

VectorXd state_ominus(const AugmentedState& a, const AugmentedState& b, AttitudeAlgebra algebra) {
  using namespace tangent;
  VectorXd d = VectorXd::Zero(a.tangent_dim());
  d.segment<3>(kRot) = attitude_difference(a.q, b.q, algebra);
  d.segment<3>(kPos) = a.r - b.r;
  d.segment<3>(kVel) = a.v - b.v;
  d.segment<3>(kOmega) = a.omega - b.omega;
  d.segment<6>(kUpsilon) = a.upsilon - b.upsilon;
  if (a.pad.size() > 0) d.segment(kPad, a.pad.size()) = a.pad - b.pad;
  return d;
}

UnitQuaternion mean_quaternion(const std::vector<UnitQuaternion>& quats, const VectorXd& weights,
                               const UnitQuaternion& fallback, AttitudeAlgebra algebra) {
  if (algebra == AttitudeAlgebra::kNaive) {
    const Vec4 ref = fallback.coeffs();
    Vec4 sum = Vec4::Zero();
    for (std::size_t i = 0; i < quats.size(); ++i) {
      const Vec4 c = quats[i].coeffs();
      sum += weights[static_cast<Eigen::Index>(i)] * (c.dot(ref) >= 0.0 ? c : Vec4(-c));
    }
    return UnitQuaternion(sum);
  }
  try {
    return weighted_quat_average(quats, std::span<const double>(weights.data(), quats.size()));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateSpectrum) throw;
    return fallback;
  }
}

SigmaPointSet generate_sigma_points(const AugmentedState& x, const MatrixXd& p,
                                    const UtWeights& w, AttitudeAlgebra algebra) {
  const int n = x.tangent_dim();
  if (p.rows() != n || p.cols() != n || w.n != n) {
    throw Error(ErrorCode::kInvalidArgument, "sigma point dimensions do not match");
  }
  const MatrixXd c = w.spread() * psd_sqrt(p);
  SigmaPointSet set;
  set.weights = w;
  set.points.reserve(static_cast<std::size_t>(2 * n + 1));
  set.points.push_back(x);
  for (int i = 0; i < n; ++i) set.points.push_back(state_oplus(x, c.col(i), algebra));
  for (int i = 0; i < n; ++i) set.points.push_back(state_ominus_vec(x, c.col(i), algebra));
  return set;
}

Prediction predict(const AugmentedState& x, const MatrixXd& p, const ControlInput& u,
                   const NoiseConfig& noise, const TransitionModel& model, const UtWeights& w,
                   AttitudeAlgebra algebra) {
  Prediction out;
  out.points = generate_sigma_points(x, p, w, algebra);
  auto& pts = out.points.points;
  const int count = static_cast<int>(pts.size());

  std::vector<UnitQuaternion> quats;
  quats.reserve(pts.size());
  AugmentedState mean = x;
  mean.r.setZero();
  mean.v.setZero();
  mean.omega.setZero();
  mean.upsilon.setZero();
  mean.pad.setZero();
  for (int i = 0; i < count; ++i) {
    auto& pt = pts[static_cast<std::size_t>(i)];
    auto [body, obs] = model.step(pt.body(), pt.observer(), u);
    pt.q = body.q;
    pt.r = body.r;
    pt.v = body.v;
    pt.omega = body.omega;
    pt.upsilon = obs.upsilon;
    quats.push_back(pt.q);
    const double wm = w.mean[i];
    mean.r += wm * pt.r;
    mean.v += wm * pt.v;
    mean.omega += wm * pt.omega;
    mean.upsilon += wm * pt.upsilon;
    if (pt.pad.size() > 0) mean.pad += wm * pt.pad;
  }
  mean.q = mean_quaternion(quats, w.mean, x.q, algebra);

  const int n = x.tangent_dim();
  out.residuals.resize(n, count);
  for (int i = 0; i < count; ++i) {
    out.residuals.col(i) = state_ominus(pts[static_cast<std::size_t>(i)], mean, algebra);
  }
  const MatrixXd cov = out.residuals * w.cov.asDiagonal() * out.residuals.transpose();
  out.cov = sanitize_covariance(symmetrized(cov + noise.process_step(model.dt())), x.dummy_index());
  out.mean = std::move(mean);
  return out;
}

OutputPrediction observe(const Prediction& prediction, const NoiseConfig& noise,
                         AttitudeAlgebra algebra) {
  const auto& pts = prediction.points.points;
  const auto& w = prediction.points.weights;
  const int count = static_cast<int>(pts.size());

  OutputPrediction out;
  std::vector<UnitQuaternion> quats;
  quats.reserve(pts.size());
  for (int i = 0; i < count; ++i) {
    const auto& pt = pts[static_cast<std::size_t>(i)];
    quats.push_back(pt.q);
    out.mean.r += w.mean[i] * pt.r;
    out.mean.omega += w.mean[i] * pt.omega;
  }
  out.mean.q = mean_quaternion(quats, w.mean, prediction.mean.q, algebra);

  Eigen::Matrix<double, 9, Eigen::Dynamic> z(9, count);
  for (int i = 0; i < count; ++i) {
    const auto& pt = pts[static_cast<std::size_t>(i)];
    z.col(i) << attitude_difference(pt.q, out.mean.q, algebra), pt.r - out.mean.r,
        pt.omega - out.mean.omega;
  }
  const MatrixXd zw = w.cov.asDiagonal() * z.transpose();
  out.p_yy = symmetrized(z * zw) + noise.measurement;
  out.p_xy = prediction.residuals * zw;
  return out;
}

Vec9 innovation(const Measurement& y, const Measurement& y_hat, AttitudeAlgebra algebra) {
  Vec9 nu;
  nu << attitude_difference(y.q, y_hat.q, algebra), y.r - y_hat.r, y.omega - y_hat.omega;
  return nu;
}

UpdateResult update(const AugmentedState& x_prior, const MatrixXd& p_prior,
                    const OutputPrediction& output, const Measurement& y,
                    AttitudeAlgebra algebra) {
  if (symmetric_condition(output.p_yy) > 1e12) {
    throw Error(ErrorCode::kSingularInnovation, "innovation covariance is ill-conditioned");
  }
  const Eigen::LDLT<Mat9> pyy(output.p_yy);
  const MatrixXd gain = pyy.solve(output.p_xy.transpose()).transpose();

  UpdateResult out;
  out.innovation = innovation(y, output.mean, algebra);
  out.nis = out.innovation.dot(pyy.solve(out.innovation));
  out.state = state_oplus(x_prior, gain * out.innovation, algebra);
  out.cov = sanitize_covariance(p_prior - gain * output.p_yy * gain.transpose(),
                                x_prior.dummy_index());
  return out;
}

MatrixXd sanitize_covariance(const MatrixXd& p, int dummy_index) {
  MatrixXd out = clamp_psd(symmetrized(p));
  out.row(dummy_index).setZero();
  out.col(dummy_index).setZero();
  return out;
}

}  // namespace qukf
