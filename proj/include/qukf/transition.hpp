#pragma once

#include <utility>

#include "qukf/dynamics.hpp"

namespace qukf {

/// Closed-form evaluation of exp(f^c T) x for the block structure produced
/// by build_fc(): the quaternion block is a rotation in R^4, r / v / omega are
/// driven by constant accelerations, and Upsilon is a linear system with
/// constant decay. The decay matrices are computed once per (params, T).
/// With WrenchModel::kInDynamics and the state-coupled placement the
/// [chi_dot, Upsilon] block is nilpotent of order two, so its exponential is
/// I + N T; the affine placement then falls back to the general exponential.
class TransitionModel {
 public:
  TransitionModel(const SystemParams& params, double dt,
                  GammaPlacement placement = GammaPlacement::kStateCoupled,
                  WrenchModel wrench = WrenchModel::kObserverOnly);

  std::pair<BodyState, ObserverState> step(const BodyState& s, const ObserverState& obs,
                                           const ControlInput& u) const;

  const SystemParams& params() const { return params_; }
  double dt() const { return dt_; }
  GammaPlacement placement() const { return placement_; }
  WrenchModel wrench_model() const { return wrench_; }

 private:
  std::pair<BodyState, ObserverState> step_in_dynamics(const BodyState& s,
                                                       const ObserverState& obs,
                                                       const ControlInput& u) const;

  SystemParams params_;
  double dt_;
  GammaPlacement placement_;
  WrenchModel wrench_;
  Mat3 inertia_inv_;
  Mat6 decay_;       // exp(-A T)
  Mat6 relax_;       // I - exp(-A T)
  Mat6 ramp_;        // T I - A^-1 (I - exp(-A T))
};

/// exp(0.5 Xi(omega) T) applied to q.
UnitQuaternion integrate_attitude(const UnitQuaternion& q, const Vec3& omega, double dt);

}  // namespace qukf
