#pragma once

#include <Eigen/Core>
#include <vector>

#include "fbmp/canonical.hpp"
#include "fbmp/primitives.hpp"

namespace fbmp {

/// T x K tactile samples on a uniform grid.
struct SensorTraceSet {
  double dt = 0.0;
  std::vector<double> t;
  Eigen::MatrixXd values;
  double setting = 0.0;  // board roll, degrees

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  Eigen::Index channels() const { return values.cols(); }
  void validate() const;
  SensorTraceSet slice(std::size_t begin, std::size_t end) const;
};

/// One scalar DMP per channel, all sharing the motion primitive's canonical system and bank.
struct ExpectedTraceModel {
  PositionPrimitive dmp;
  Eigen::VectorXd start;  // mean first sample of the trials

  Eigen::Index channels() const { return dmp.dims(); }
  /// Expected traces over n samples at dt.
  Eigen::MatrixXd unroll(double dt, std::size_t n) const;
};

/// Per-channel static-goal DMP fit on pooled trials (resample them to a common grid first).
ExpectedTraceModel fit_expected_traces(const std::vector<SensorTraceSet>& trials, const CanonicalParams& canonical,
                                       const PhaseKernelBank& bank, double ridge = 1e-8);

/// actual - expected, sample by sample.
Eigen::MatrixXd deviation(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& expected);

/// Unrolls `expected` on the actual trace's grid and subtracts it.
Eigen::MatrixXd deviation(const SensorTraceSet& actual, const ExpectedTraceModel& expected);

/// Resamples a trace onto n samples at dt starting at t = 0.
SensorTraceSet resample(const SensorTraceSet& trace, double dt, std::size_t n);

}  // namespace fbmp
