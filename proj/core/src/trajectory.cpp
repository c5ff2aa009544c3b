#include "fbmp/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "fbmp/errors.hpp"

namespace fbmp {

void OrientationTrajectory::validate() const {
  const auto n = static_cast<Eigen::Index>(q.size());
  if (!(dt > 0.0)) throw DataError("orientation trajectory: dt must be positive");
  if (t.size() != q.size() || omega.rows() != n || omega_dot.rows() != n) {
    throw DataError("orientation trajectory: channel lengths differ");
  }
  if (!omega.allFinite() || !omega_dot.allFinite()) throw DataError("orientation trajectory: non-finite samples");
}

OrientationTrajectory OrientationTrajectory::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end >= size()) throw DataError("orientation trajectory: slice out of range");
  OrientationTrajectory out;
  out.dt = dt;
  const auto n = static_cast<Eigen::Index>(end - begin + 1);
  out.t = uniform_times(static_cast<std::size_t>(n), dt);
  out.q.assign(q.begin() + static_cast<std::ptrdiff_t>(begin), q.begin() + static_cast<std::ptrdiff_t>(end + 1));
  out.omega = omega.middleRows(static_cast<Eigen::Index>(begin), n);
  out.omega_dot = omega_dot.middleRows(static_cast<Eigen::Index>(begin), n);
  return out;
}

void PositionTrajectory::validate() const {
  if (!(dt > 0.0)) throw DataError("position trajectory: dt must be positive");
  if (static_cast<Eigen::Index>(t.size()) != y.rows() || yd.rows() != y.rows() || ydd.rows() != y.rows() ||
      yd.cols() != y.cols() || ydd.cols() != y.cols()) {
    throw DataError("position trajectory: channel shapes differ");
  }
  if (!y.allFinite() || !yd.allFinite() || !ydd.allFinite()) throw DataError("position trajectory: non-finite samples");
}

PositionTrajectory PositionTrajectory::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end >= size()) throw DataError("position trajectory: slice out of range");
  PositionTrajectory out;
  out.dt = dt;
  const auto n = static_cast<Eigen::Index>(end - begin + 1);
  const auto b = static_cast<Eigen::Index>(begin);
  out.t = uniform_times(static_cast<std::size_t>(n), dt);
  out.y = y.middleRows(b, n);
  out.yd = yd.middleRows(b, n);
  out.ydd = ydd.middleRows(b, n);
  return out;
}

std::vector<double> uniform_times(std::size_t n, double dt) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = dt * static_cast<double>(i);
  return t;
}

Eigen::MatrixXd moving_average(const Eigen::MatrixXd& x, int window) {
  if (window <= 1 || x.rows() < 2) return x;
  const Eigen::Index half = window / 2;
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::Index reach = std::min({half, i, x.rows() - 1 - i});
    out.row(i) = x.middleRows(i - reach, 2 * reach + 1).colwise().mean();
  }
  return out;
}

std::pair<Eigen::MatrixX3d, Eigen::MatrixX3d> estimate_angular_motion(const std::vector<UnitQuaternion>& q, double dt,
                                                                      int window) {
  const auto n = static_cast<Eigen::Index>(q.size());
  if (n < 3) throw DataError("estimate_angular_motion: need at least 3 samples");
  if (!(dt > 0.0)) throw ValidationError("estimate_angular_motion: dt must be positive");
  Eigen::MatrixXd omega(n, 3);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    omega.row(i) = rotation_error(q[static_cast<std::size_t>(i + 1)], q[static_cast<std::size_t>(i)]).transpose() / dt;
  }
  omega.row(n - 1) = omega.row(n - 2);
  omega = moving_average(omega, window);

  Eigen::MatrixXd omega_dot(n, 3);
  for (Eigen::Index i = 1; i < n; ++i) omega_dot.row(i) = (omega.row(i) - omega.row(i - 1)) / dt;
  omega_dot.row(0) = omega_dot.row(1);
  omega_dot = moving_average(omega_dot, window);
  return {omega, omega_dot};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> estimate_linear_motion(const Eigen::MatrixXd& y, double dt) {
  const Eigen::Index n = y.rows();
  if (n < 3) throw DataError("estimate_linear_motion: need at least 3 samples");
  Eigen::MatrixXd yd(n, y.cols());
  Eigen::MatrixXd ydd(n, y.cols());
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    yd.row(i) = (y.row(i + 1) - y.row(i - 1)) / (2.0 * dt);
    ydd.row(i) = (y.row(i + 1) - 2.0 * y.row(i) + y.row(i - 1)) / (dt * dt);
  }
  yd.row(0) = (y.row(1) - y.row(0)) / dt;
  yd.row(n - 1) = (y.row(n - 1) - y.row(n - 2)) / dt;
  ydd.row(0) = ydd.row(1);
  ydd.row(n - 1) = ydd.row(n - 2);
  return {yd, ydd};
}

Eigen::MatrixXd resample_linear(const std::vector<double>& times, const Eigen::MatrixXd& values,
                                const std::vector<double>& query) {
  if (times.empty() || static_cast<Eigen::Index>(times.size()) != values.rows()) {
    throw DataError("resample_linear: times/values mismatch");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(query.size()), values.cols());
  std::size_t k = 0;
  for (std::size_t i = 0; i < query.size(); ++i) {
    const double tq = query[i];
    const auto row = static_cast<Eigen::Index>(i);
    if (tq <= times.front()) {
      out.row(row) = values.row(0);
      continue;
    }
    if (tq >= times.back()) {
      out.row(row) = values.row(values.rows() - 1);
      continue;
    }
    while (k + 1 < times.size() && times[k + 1] < tq) ++k;
    while (k > 0 && times[k] > tq) --k;
    const double span = times[k + 1] - times[k];
    const double w = span > 0.0 ? (tq - times[k]) / span : 0.0;
    const auto a = static_cast<Eigen::Index>(k);
    out.row(row) = (1.0 - w) * values.row(a) + w * values.row(a + 1);
  }
  return out;
}

double channel_nmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size() || target.size() == 0) throw ValidationError("nmse: length mismatch");
  const double mean = target.mean();
  const double var = (target.array() - mean).square().mean();
  if (!(var > 0.0)) throw NumericalError("nmse: zero-variance target");
  return (pred - target).squaredNorm() / static_cast<double>(target.size()) / var;
}

}  // namespace fbmp
