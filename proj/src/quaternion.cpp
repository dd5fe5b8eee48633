#include "qukf/quaternion.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "qukf/error.hpp"

namespace qukf {

Mat3 skew(const Vec3& p) {
  Mat3 m;
  m << 0.0, -p.z(), p.y(),
       p.z(), 0.0, -p.x(),
       -p.y(), p.x(), 0.0;
  return m;
}

Vec3 vex(const Mat3& m, double tol) {
  if ((m + m.transpose()).norm() > tol) {
    throw Error(ErrorCode::kNotSkewSymmetric, "vex() requires an antisymmetric matrix");
  }
  return {m(2, 1), m(0, 2), m(1, 0)};
}

Mat3 antisym_project(const Mat3& b) { return 0.5 * (b - b.transpose()); }

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kInvalidArgument, "quaternion must be finite and nonzero");
  }
  w_ = w / n;
  v_ = Vec3(x, y, z) / n;
}

UnitQuaternion::UnitQuaternion(const Vec4& wxyz)
    : UnitQuaternion(wxyz[0], wxyz[1], wxyz[2], wxyz[3]) {}

UnitQuaternion UnitQuaternion::from_unit_coeffs(const Vec4& wxyz) {
  UnitQuaternion q(wxyz);
  if (std::abs(wxyz.norm() - 1.0) <= 1e-12) {
    q.w_ = wxyz[0];
    q.v_ = wxyz.tail<3>();
  }
  return q;
}

UnitQuaternion UnitQuaternion::conjugate() const {
  UnitQuaternion q = *this;
  q.v_ = -v_;
  return q;
}

UnitQuaternion UnitQuaternion::operator-() const {
  UnitQuaternion q = *this;
  q.w_ = -w_;
  q.v_ = -v_;
  return q;
}

UnitQuaternion UnitQuaternion::canonical() const {
  if (w_ > 0.0) return *this;
  if (w_ < 0.0) return -*this;
  for (int i = 0; i < 3; ++i) {
    if (v_[i] > 0.0) return *this;
    if (v_[i] < 0.0) return -*this;
  }
  return *this;
}

UnitQuaternion quat_mul(const UnitQuaternion& a, const UnitQuaternion& b) {
  const double w = a.w() * b.w() - a.vec().dot(b.vec());
  const Vec3 v = a.w() * b.vec() + b.w() * a.vec() + a.vec().cross(b.vec());
  return UnitQuaternion(w, v.x(), v.y(), v.z());
}

Mat3 quat_to_rot(const UnitQuaternion& q) {
  const Mat3 s = skew(q.vec());
  return Mat3::Identity() + 2.0 * q.w() * s + 2.0 * s * s;
}

UnitQuaternion rot_to_quat(const Mat3& r, double tol) {
  if (!r.allFinite() || (r * r.transpose() - Mat3::Identity()).norm() > tol ||
      std::abs(r.determinant() - 1.0) > tol) {
    throw Error(ErrorCode::kNotRotation, "matrix is not in SO(3)");
  }
  const double trace = r.trace();
  if (1.0 + trace >= 1e-6) {
    const double w = 0.5 * std::sqrt(1.0 + trace);
    const double k = 0.25 / w;
    return UnitQuaternion(w, k * (r(2, 1) - r(1, 2)), k * (r(0, 2) - r(2, 0)),
                          k * (r(1, 0) - r(0, 1)))
        .canonical();
  }
  // Near 180 degrees: pivot on the largest diagonal entry.
  int i = 0;
  if (r(1, 1) > r(i, i)) i = 1;
  if (r(2, 2) > r(i, i)) i = 2;
  const int j = (i + 1) % 3;
  const int k = (i + 2) % 3;
  const double s = std::sqrt(std::max(0.0, 1.0 + r(i, i) - r(j, j) - r(k, k)));
  Vec4 c;
  c[1 + i] = 0.5 * s;
  const double f = 0.5 / s;
  c[0] = f * (r(k, j) - r(j, k));
  c[1 + j] = f * (r(j, i) + r(i, j));
  c[1 + k] = f * (r(k, i) + r(i, k));
  return UnitQuaternion(c).canonical();
}

RotationVector quat_to_rotvec(const UnitQuaternion& q) {
  const UnitQuaternion c = q.canonical();
  const double n = c.vec().norm();
  if (n < 1e-8) {
    // alpha / n -> 2 / w with relative error O(n^2).
    return RotationVector(c.vec() * (2.0 / c.w()));
  }
  const double alpha = 2.0 * std::atan2(n, c.w());
  return RotationVector(c.vec() * (alpha / n));
}

UnitQuaternion rotvec_to_quat(const RotationVector& p) {
  const double alpha = p.angle();
  const double s = alpha < 1e-6 ? 0.5 - alpha * alpha / 48.0 : std::sin(0.5 * alpha) / alpha;
  return UnitQuaternion(std::cos(0.5 * alpha), s * p.p.x(), s * p.p.y(), s * p.p.z())
      .canonical();
}

UnitQuaternion oplus(const UnitQuaternion& q, const RotationVector& p) {
  return quat_mul(rotvec_to_quat(p), q);
}

UnitQuaternion ominus_vec(const UnitQuaternion& q, const RotationVector& p) {
  return quat_mul(rotvec_to_quat(p).inverse(), q);
}

RotationVector quat_diff(const UnitQuaternion& q1, const UnitQuaternion& q2) {
  return quat_to_rotvec(quat_mul(q1, q2.inverse()));
}

UnitQuaternion weighted_quat_average(std::span<const UnitQuaternion> quats,
                                     std::span<const double> weights) {
  if (quats.empty() || quats.size() != weights.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "weighted_quat_average needs matching, non-empty inputs");
  }
  Mat4 a = Mat4::Zero();
  for (std::size_t i = 0; i < quats.size(); ++i) {
    const Vec4 c = quats[i].coeffs();
    a.noalias() += weights[i] * c * c.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Mat4> eig(a);
  const auto& lambda = eig.eigenvalues();  // ascending
  if (lambda[3] - lambda[2] <= 1e-12 * std::max(1.0, std::abs(lambda[3]))) {
    throw Error(ErrorCode::kDegenerateSpectrum, "quaternion average is ambiguous");
  }
  return UnitQuaternion(Vec4(eig.eigenvectors().col(3))).canonical();
}

}  // namespace qukf
