#pragma once

// Unscented transform on the augmented state [q, r, v, omega, Upsilon, pad..., 1].
//
// The quaternion lives on S^3 and is perturbed through rotation vectors, so
// the covariance is expressed in a tangent space one dimension smaller than
// the lifted state: [rotvec(3), r(3), v(3), omega(3), Upsilon(6), pad..., dummy(1)].
// The dummy row and column are identically zero.

#include <Eigen/Core>
#include <vector>

#include "qukf/dynamics.hpp"
#include "qukf/transition.hpp"

namespace qukf {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

inline constexpr int kTangentDim = 19;
inline constexpr int kMeasurementDim = 9;

namespace tangent {
inline constexpr int kRot = 0;
inline constexpr int kPos = 3;
inline constexpr int kVel = 6;
inline constexpr int kOmega = 9;
inline constexpr int kUpsilon = 12;
inline constexpr int kPad = 18;
}  // namespace tangent

/// How quaternion perturbations, differences and means are formed.
///  kManifold: rotation-vector operators and the eigenvector mean.
///  kNaive:    4-vector arithmetic followed by renormalization. Kept only as a
///             regression baseline.
enum class AttitudeAlgebra { kManifold, kNaive };

struct AugmentedState {
  UnitQuaternion q;
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Vec6 upsilon = Vec6::Zero();
  VectorXd pad;  // zero-dynamics entries, used to vary the dimension in benchmarks

  int tangent_dim() const { return kTangentDim + static_cast<int>(pad.size()); }
  int dummy_index() const { return tangent_dim() - 1; }

  BodyState body() const { return {q, r, v, omega}; }
  ObserverState observer() const { return {upsilon}; }
  /// tau_hat = Upsilon + delta [v; omega]
  Wrench wrench(const SystemParams& p) const;
};

struct UtWeights {
  int n = 0;
  double eta = 0.0;
  VectorXd mean;  // mu^m, length 2n + 1
  VectorXd cov;   // mu^c, length 2n + 1

  double spread() const;  // sqrt(n + eta)
};

/// Throws Error(kDegenerateScaling) if n < 1 or n + eta <= 0.
UtWeights ut_weights(int n, double phi, double gamma, double sigma);

struct Measurement {
  UnitQuaternion q;
  Vec3 r = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
};

struct NoiseConfig {
  MatrixXd process;                 // continuous-time Q_c, tangent_dim square
  Mat9 measurement = Mat9::Zero();  // R over [rotvec, r, omega]

  MatrixXd process_step(double dt) const { return process * dt; }
};

struct SigmaPointSet {
  std::vector<AugmentedState> points;
  UtWeights weights;
};

/// x (+) delta: rotation part through oplus, the rest added. The dummy entry of
/// delta is ignored.
AugmentedState state_oplus(const AugmentedState& x, const VectorXd& delta,
                           AttitudeAlgebra algebra = AttitudeAlgebra::kManifold);
/// x (-) delta, the mirror of state_oplus.
AugmentedState state_ominus_vec(const AugmentedState& x, const VectorXd& delta,
                                AttitudeAlgebra algebra = AttitudeAlgebra::kManifold);
/// a (-) b as a tangent vector (dummy entry zero).
VectorXd state_ominus(const AugmentedState& a, const AugmentedState& b,
                      AttitudeAlgebra algebra = AttitudeAlgebra::kManifold);

/// Weighted quaternion mean under the chosen algebra. Falls back to
/// `fallback` when the eigenvector mean is ambiguous.
UnitQuaternion mean_quaternion(const std::vector<UnitQuaternion>& quats,
                               const VectorXd& weights, const UnitQuaternion& fallback,
                               AttitudeAlgebra algebra);

/// 2n + 1 points: the mean, then x (+) c_i, then x (-) c_i, where c_i are the
/// columns of sqrt(n + eta) * sqrt(P).
SigmaPointSet generate_sigma_points(const AugmentedState& x, const MatrixXd& p,
                                    const UtWeights& w,
                                    AttitudeAlgebra algebra = AttitudeAlgebra::kManifold);

struct Prediction {
  AugmentedState mean;
  MatrixXd cov;
  SigmaPointSet points;    // propagated
  MatrixXd residuals;      // points (-) mean, one column per point
};

Prediction predict(const AugmentedState& x, const MatrixXd& p, const ControlInput& u,
                   const NoiseConfig& noise, const TransitionModel& model, const UtWeights& w,
                   AttitudeAlgebra algebra = AttitudeAlgebra::kManifold);

struct OutputPrediction {
  Measurement mean;
  Mat9 p_yy = Mat9::Zero();
  MatrixXd p_xy;  // tangent_dim x 9
};

/// Passes the propagated points through h(x) = (q, r, omega).
OutputPrediction observe(const Prediction& prediction, const NoiseConfig& noise,
                         AttitudeAlgebra algebra = AttitudeAlgebra::kManifold);

/// y (-) y_hat in the 9-dimensional tangent representation.
Vec9 innovation(const Measurement& y, const Measurement& y_hat,
                AttitudeAlgebra algebra = AttitudeAlgebra::kManifold);

struct UpdateResult {
  AugmentedState state;
  MatrixXd cov;
  Vec9 innovation = Vec9::Zero();
  double nis = 0.0;
};

/// Kalman update. Throws Error(kSingularInnovation) if cond(P_yy) > 1e12.
UpdateResult update(const AugmentedState& x_prior, const MatrixXd& p_prior,
                    const OutputPrediction& output, const Measurement& y,
                    AttitudeAlgebra algebra = AttitudeAlgebra::kManifold);

/// Symmetrize, clamp to PSD and zero the dummy row / column.
MatrixXd sanitize_covariance(const MatrixXd& p, int dummy_index);

}  // namespace qukf
