#pragma once

// Unit quaternion and SO(3) algebra.
//
// Conventions:
//  * Scalar-first storage [w, x, y, z], Hamilton product.
//  * R(q) is the active body-to-inertial rotation, so R(q1 (x) q2) = R(q1) R(q2).
//  * Manifold perturbations act from the left: q (+) P = q(P) (x) q.

#include <Eigen/Core>
#include <span>

namespace qukf {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline const Vec3 kUnitZ{0.0, 0.0, 1.0};

/// Skew-symmetric matrix [p]x such that skew(p) * a == p.cross(a).
Mat3 skew(const Vec3& p);

/// Inverse of skew(). Throws Error(kNotSkewSymmetric) if ||M + M^T||_F > tol.
Vec3 vex(const Mat3& m, double tol = 1e-9);

/// (B - B^T) / 2.
Mat3 antisym_project(const Mat3& b);

/// Rotation vector: angle (rad) times unit axis.
struct RotationVector {
  Vec3 p = Vec3::Zero();

  RotationVector() = default;
  explicit RotationVector(const Vec3& v) : p(v) {}
  RotationVector(double x, double y, double z) : p(x, y, z) {}

  double angle() const { return p.norm(); }
  RotationVector operator-() const { return RotationVector(-p); }
};

class UnitQuaternion {
 public:
  /// Identity rotation.
  UnitQuaternion() = default;

  /// Normalizes the given components. Throws on a zero or non-finite input.
  UnitQuaternion(double w, double x, double y, double z);
  explicit UnitQuaternion(const Vec4& wxyz);

  static UnitQuaternion identity() { return {}; }
  /// Keeps the components bit-for-bit when they are already unit within
  /// 1e-12 (used when reading stored data); normalizes otherwise.
  static UnitQuaternion from_unit_coeffs(const Vec4& wxyz);

  double w() const { return w_; }
  const Vec3& vec() const { return v_; }
  Vec4 coeffs() const { return {w_, v_.x(), v_.y(), v_.z()}; }

  UnitQuaternion conjugate() const;
  UnitQuaternion inverse() const { return conjugate(); }

  /// The same rotation with w >= 0; for w == 0 the first nonzero vector
  /// component is made positive.
  UnitQuaternion canonical() const;

  UnitQuaternion operator-() const;

 private:
  double w_ = 1.0;
  Vec3 v_ = Vec3::Zero();
};

/// Hamilton product, renormalized.
UnitQuaternion quat_mul(const UnitQuaternion& a, const UnitQuaternion& b);
inline UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return quat_mul(a, b);
}

Mat3 quat_to_rot(const UnitQuaternion& q);

/// Throws Error(kNotRotation) if R is not in SO(3) within `tol`.
UnitQuaternion rot_to_quat(const Mat3& r, double tol = 1e-6);

RotationVector quat_to_rotvec(const UnitQuaternion& q);
UnitQuaternion rotvec_to_quat(const RotationVector& p);

/// q(P) (x) q
UnitQuaternion oplus(const UnitQuaternion& q, const RotationVector& p);
/// q(P)^-1 (x) q
UnitQuaternion ominus_vec(const UnitQuaternion& q, const RotationVector& p);
/// P(q1 (x) q2^-1): the rotation taking q2 to q1.
RotationVector quat_diff(const UnitQuaternion& q1, const UnitQuaternion& q2);

/// Unit eigenvector for the largest eigenvalue of sum_i w_i q_i q_i^T,
/// canonicalized. Weights may be negative. Throws kDegenerateSpectrum when
/// the top two eigenvalues coincide within 1e-12 and kInvalidArgument on
/// empty or mismatched input.
UnitQuaternion weighted_quat_average(std::span<const UnitQuaternion> quats,
                                     std::span<const double> weights);

}  // namespace qukf
