#pragma once

#include <Eigen/Core>
#include <cmath>

#include "fbmp/random.hpp"
#include "fbmp/so3.hpp"

namespace fbmp::test {

inline double max_abs_diff(const UnitQuaternion& a, const UnitQuaternion& b) {
  const auto x = a.coeffs();
  const auto y = b.coeffs();
  double m = 0.0;
  for (int i = 0; i < 4; ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

// Uniform on S^3 (normalized Gaussian), canonicalized by the constructor.
inline UnitQuaternion random_quaternion(Rng& rng) {
  return {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
}

inline Vec3 random_direction(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

}  // namespace fbmp::test
