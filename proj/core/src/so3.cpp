#include "fbmp/so3.hpp"

#include <algorithm>
#include <cmath>

#include "fbmp/errors.hpp"

namespace fbmp {

namespace {
constexpr double kLogSeriesThreshold = 1.0 - 1e-8;
constexpr double kExpSeriesThreshold = 1e-8;
}  // namespace

UnitQuaternion::UnitQuaternion(double r, const Vec3& q) : r_(r), q_(q) {
  const double norm = std::sqrt(r * r + q.squaredNorm());
  if (!std::isfinite(norm) || norm <= 0.0) {
    throw ValidationError("UnitQuaternion: non-finite or zero-norm components");
  }
  r_ /= norm;
  q_ /= norm;
  if (r_ < 0.0) {
    r_ = -r_;
    q_ = -q_;
  }
}

UnitQuaternion compose(const UnitQuaternion& a, const UnitQuaternion& b) {
  const double r = a.r() * b.r() - a.q().dot(b.q());
  const Vec3 q = a.r() * b.q() + b.r() * a.q() + a.q().cross(b.q());
  return {r, q};
}

UnitQuaternion conjugate(const UnitQuaternion& a) { return {UnitQuaternion::Normalized{}, a.r_, -a.q_}; }

RotVec3 log_map(const UnitQuaternion& a) {
  const double r = std::clamp(a.r(), -1.0, 1.0);
  if (r > kLogSeriesThreshold) {
    return a.q();
  }
  const double angle = std::acos(r);
  return (angle / std::sin(angle)) * a.q();
}

UnitQuaternion exp_map(const RotVec3& v) {
  const double n = v.norm();
  if (n < kExpSeriesThreshold) {
    return {1.0 - 0.5 * n * n, v};
  }
  return {std::cos(n), (std::sin(n) / n) * v};
}

UnitQuaternion integrate(const UnitQuaternion& q, const RotVec3& omega, double dt) {
  return compose(exp_map(0.5 * dt * omega), q);
}

RotVec3 rotation_error(const UnitQuaternion& a, const UnitQuaternion& b) {
  return 2.0 * log_map(compose(a, conjugate(b)));
}

UnitQuaternion axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw ValidationError("axis_angle: zero axis");
  return exp_map((0.5 * angle / n) * axis);
}

Eigen::Matrix3d to_rotation_matrix(const UnitQuaternion& a) {
  const double w = a.r(), x = a.q().x(), y = a.q().y(), z = a.q().z();
  Eigen::Matrix3d m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

}  // namespace fbmp
