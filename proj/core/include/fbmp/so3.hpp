#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>

namespace fbmp {

using Vec3 = Eigen::Vector3d;

/// Rotation vector in so(3). Holds half-angle log outputs, angular velocities and
/// angular accelerations depending on context.
using RotVec3 = Eigen::Vector3d;

/// Unit quaternion [r, q1, q2, q3] with r the real part.
///
/// Every constructor normalizes and flips the sign so that r >= 0, which makes
/// log_map return the shortest rotation.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;

  /// Throws ValidationError on non-finite or zero-norm input.
  UnitQuaternion(double r, const Vec3& q);
  UnitQuaternion(double r, double q1, double q2, double q3) : UnitQuaternion(r, Vec3(q1, q2, q3)) {}

  static UnitQuaternion identity() { return {}; }

  double r() const { return r_; }
  const Vec3& q() const { return q_; }

  /// Serialization order [r, q1, q2, q3].
  std::array<double, 4> coeffs() const { return {r_, q_.x(), q_.y(), q_.z()}; }

 private:
  friend UnitQuaternion conjugate(const UnitQuaternion& a);
  struct Normalized {};
  // Components already unit-norm with r >= 0.
  UnitQuaternion(Normalized, double r, const Vec3& q) : r_(r), q_(q) {}

  double r_ = 1.0;
  Vec3 q_ = Vec3::Zero();
};

/// Hamilton product a ∘ b.
UnitQuaternion compose(const UnitQuaternion& a, const UnitQuaternion& b);

UnitQuaternion conjugate(const UnitQuaternion& a);

/// (arccos(r) / sin(arccos(r))) q. Returns the half-angle rotation vector.
RotVec3 log_map(const UnitQuaternion& a);

/// [cos|v|, sin|v| v/|v|]. Inverse of log_map for |v| < pi/2.
UnitQuaternion exp_map(const RotVec3& v);

/// exp(omega dt / 2) ∘ q: advances q by a constant world-frame angular velocity.
UnitQuaternion integrate(const UnitQuaternion& q, const RotVec3& omega, double dt);

/// 2 log(a ∘ b*): full-angle rotation vector taking b to a.
RotVec3 rotation_error(const UnitQuaternion& a, const UnitQuaternion& b);

/// Rotation by `angle` radians about `axis` (normalized internally).
UnitQuaternion axis_angle(const Vec3& axis, double angle);

/// Rotation matrix of a. Used by geometry code and test oracles.
Eigen::Matrix3d to_rotation_matrix(const UnitQuaternion& a);

}  // namespace fbmp
