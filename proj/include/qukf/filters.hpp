#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>

#include "qukf/unscented.hpp"

namespace qukf {

struct FilterConfig {
  NoiseConfig noise;
  MatrixXd initial_cov;  // P_0, tangent_dim square
  double phi = 1.0;
  double gamma = 2.0;
  double sigma = 0.0;
  std::optional<double> eta;  // if set, must agree with the derived value
  int padding = 0;
  AttitudeAlgebra algebra = AttitudeAlgebra::kManifold;
  GammaPlacement placement = GammaPlacement::kStateCoupled;
  WrenchModel wrench_model = WrenchModel::kObserverOnly;

  int tangent_dim() const { return kTangentDim + padding; }

  /// Tuning used throughout the simulations: Q_c, R and P_0 diagonals,
  /// phi = 1, gamma = 2, sigma = 0. Padding entries get unit variance.
  static FilterConfig defaults(int padding = 0);

  /// Throws Error(kValidationError) on inconsistent dimensions or negative
  /// variances, and when a configured eta disagrees with phi / sigma.
  void validate() const;
};

struct StepDiagnostics {
  Vec9 innovation = Vec9::Zero();
  double nis = 0.0;
};

/// Common surface of the two estimators so scenarios can drive either.
class Estimator {
 public:
  virtual ~Estimator() = default;

  /// x_0 from the first measurement with v = 0, Upsilon = 0; P_0 from config.
  virtual void initialize(const Measurement& y0) = 0;
  virtual void initialize(const AugmentedState& x0, const MatrixXd& p0) = 0;
  /// One predict / observe / update cycle with the input applied over the
  /// previous interval.
  virtual StepDiagnostics step(const ControlInput& u, const Measurement& y) = 0;

  virtual AugmentedState state() const = 0;
  virtual MatrixXd covariance() const = 0;
  virtual std::string name() const = 0;

  Wrench wrench() const { return state().wrench(params()); }
  virtual const SystemParams& params() const = 0;
};

class QukfFilter final : public Estimator {
 public:
  QukfFilter(const SystemParams& params, double dt, FilterConfig config);

  void initialize(const Measurement& y0) override;
  void initialize(const AugmentedState& x0, const MatrixXd& p0) override;
  StepDiagnostics step(const ControlInput& u, const Measurement& y) override;

  AugmentedState state() const override { return x_; }
  MatrixXd covariance() const override { return p_; }
  std::string name() const override { return "qukf"; }
  const SystemParams& params() const override { return model_.params(); }

  const UtWeights& weights() const { return weights_; }
  const FilterConfig& config() const { return config_; }

 private:
  FilterConfig config_;
  TransitionModel model_;
  UtWeights weights_;
  AugmentedState x_;
  MatrixXd p_;
};

/// Additive-quaternion EKF on the lifted state [q(4), r, v, omega, Upsilon, pad, 1].
/// Jacobians come from central differences of the same transition and
/// observation the QUKF uses; the innovation is the same 9-vector.
class EkfFilter final : public Estimator {
 public:
  EkfFilter(const SystemParams& params, double dt, FilterConfig config,
            double fd_step = 1e-6);

  void initialize(const Measurement& y0) override;
  void initialize(const AugmentedState& x0, const MatrixXd& p0) override;
  StepDiagnostics step(const ControlInput& u, const Measurement& y) override;

  AugmentedState state() const override;
  /// Covariance of the lifted state (tangent_dim + 1 square).
  MatrixXd covariance() const override { return p_; }
  std::string name() const override { return "ekf"; }
  const SystemParams& params() const override { return model_.params(); }

  /// Maps a tangent-space covariance to the lifted state at `q`.
  MatrixXd lift_covariance(const MatrixXd& tangent_cov, const UnitQuaternion& q) const;

 private:
  VectorXd transition(const VectorXd& x, const ControlInput& u) const;

  FilterConfig config_;
  TransitionModel model_;
  double fd_step_;
  VectorXd x_;
  MatrixXd p_;
};

}  // namespace qukf
