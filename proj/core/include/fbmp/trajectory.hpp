#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "fbmp/so3.hpp"

namespace fbmp {

/// Uniformly sampled orientation trajectory. Rows of omega / omega_dot are samples.
struct OrientationTrajectory {
  double dt = 0.0;
  std::vector<double> t;
  std::vector<UnitQuaternion> q;
  Eigen::MatrixX3d omega;
  Eigen::MatrixX3d omega_dot;

  std::size_t size() const { return q.size(); }
  double duration() const { return size() > 1 ? dt * static_cast<double>(size() - 1) : 0.0; }
  void validate() const;

  /// Samples [begin, end] inclusive, with time re-based to 0.
  OrientationTrajectory slice(std::size_t begin, std::size_t end) const;
};

/// Uniformly sampled D-dimensional trajectory; rows are samples.
struct PositionTrajectory {
  double dt = 0.0;
  std::vector<double> t;
  Eigen::MatrixXd y;
  Eigen::MatrixXd yd;
  Eigen::MatrixXd ydd;

  std::size_t size() const { return static_cast<std::size_t>(y.rows()); }
  Eigen::Index dims() const { return y.cols(); }
  double duration() const { return size() > 1 ? dt * static_cast<double>(size() - 1) : 0.0; }
  void validate() const;
  PositionTrajectory slice(std::size_t begin, std::size_t end) const;
};

std::vector<double> uniform_times(std::size_t n, double dt);

/// omega_t = 2 log(Q_{t+1} ∘ Q_t*) / dt, omega_dot by backward difference of omega, each
/// smoothed with a centered moving average of `window` samples (1 disables smoothing).
std::pair<Eigen::MatrixX3d, Eigen::MatrixX3d> estimate_angular_motion(const std::vector<UnitQuaternion>& q, double dt,
                                                                      int window = 5);

/// Central-difference velocity and acceleration of a sampled signal.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> estimate_linear_motion(const Eigen::MatrixXd& y, double dt);

/// Centered moving average along rows; the window shrinks at the ends.
Eigen::MatrixXd moving_average(const Eigen::MatrixXd& x, int window);

/// Linear interpolation of rows of `values` sampled at `times` onto `query` (clamped at the ends).
Eigen::MatrixXd resample_linear(const std::vector<double>& times, const Eigen::MatrixXd& values,
                                const std::vector<double>& query);

/// Normalized mean squared error mean((pred - target)^2) / var(target) for one channel.
double channel_nmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

}  // namespace fbmp
