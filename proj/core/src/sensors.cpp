#include "fbmp/sensors.hpp"

#include "fbmp/errors.hpp"
#include "regression.hpp"

namespace fbmp {

void SensorTraceSet::validate() const {
  if (!(dt > 0.0)) throw DataError("sensor traces: dt must be positive");
  if (values.rows() < 2) throw DataError("sensor traces: need at least 2 samples");
  if (static_cast<Eigen::Index>(t.size()) != values.rows()) throw DataError("sensor traces: time/value length mismatch");
  if (!values.allFinite()) throw DataError("sensor traces: non-finite samples");
}

SensorTraceSet SensorTraceSet::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end >= size()) throw DataError("sensor traces: slice out of range");
  SensorTraceSet out;
  out.dt = dt;
  out.setting = setting;
  const auto n = static_cast<Eigen::Index>(end - begin + 1);
  out.t = uniform_times(static_cast<std::size_t>(n), dt);
  out.values = values.middleRows(static_cast<Eigen::Index>(begin), n);
  return out;
}

SensorTraceSet resample(const SensorTraceSet& trace, double dt, std::size_t n) {
  trace.validate();
  SensorTraceSet out;
  out.dt = dt;
  out.setting = trace.setting;
  out.t = uniform_times(n, dt);
  out.values = resample_linear(trace.t, trace.values, out.t);
  return out;
}

Eigen::MatrixXd ExpectedTraceModel::unroll(double dt, std::size_t n) const {
  if (n < 2) throw ValidationError("expected traces: need at least 2 samples");
  UnrollOptions options;
  options.duration_factor = dt * static_cast<double>(n - 1) / dmp.duration;
  Eigen::MatrixXd y = position_unroll(dmp, start, {}, dt, options).y;
  return y.topRows(static_cast<Eigen::Index>(n));
}

// The rollout is affine in the weights, so they are fit against the traces themselves: noisy tactile
// samples are never differentiated.
ExpectedTraceModel fit_expected_traces(const std::vector<SensorTraceSet>& trials, const CanonicalParams& canonical,
                                       const PhaseKernelBank& bank, double ridge) {
  if (trials.empty()) throw ValidationError("fit_expected_traces: no trials");
  const auto& first = trials.front();
  first.validate();
  const auto n = static_cast<Eigen::Index>(first.size());
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, first.channels());
  for (const auto& trial : trials) {
    trial.validate();
    if (trial.channels() != first.channels()) throw DataError("fit_expected_traces: channel count differs across trials");
    if (trial.size() != first.size() || trial.dt != first.dt) {
      throw DataError("fit_expected_traces: trials must share one time grid");
    }
    mean += trial.values;
  }
  mean /= static_cast<double>(trials.size());

  ExpectedTraceModel model;
  model.start = mean.row(0).transpose();
  PositionPrimitive& dmp = model.dmp;
  dmp.canonical = canonical;
  dmp.bank = bank;
  dmp.gains = DmpGains::with_alpha(25.0);
  dmp.goal = mean.row(n - 1).transpose();
  dmp.duration = first.dt * static_cast<double>(n - 1);
  dmp.goal_evolution = false;
  dmp.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bank.size()), first.channels());
  const Eigen::MatrixXd free = model.unroll(first.dt, first.size());

  // Column j: response from rest at zero to a unit weight on kernel j alone.
  const auto n_basis = static_cast<Eigen::Index>(bank.size());
  PositionPrimitive unit = dmp;
  unit.goal = Eigen::VectorXd::Zero(n_basis);
  unit.weights = Eigen::MatrixXd::Identity(n_basis, n_basis);
  const Eigen::MatrixXd response =
      position_unroll(unit, Eigen::VectorXd::Zero(n_basis), {}, first.dt).y.topRows(n);

  // Pooled trials share the design, so their normal equations reduce to the mean trace.
  const Eigen::MatrixXd gram = response.transpose() * response / static_cast<double>(n);
  const Eigen::MatrixXd rhs = response.transpose() * (mean - free) / static_cast<double>(n);
  dmp.weights = detail::ridge_solve(gram, rhs, ridge * gram.trace() / static_cast<double>(n_basis));
  return model;
}

Eigen::MatrixXd deviation(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& expected) {
  if (actual.rows() != expected.rows() || actual.cols() != expected.cols()) {
    throw DataError("deviation: actual and expected traces differ in shape");
  }
  return actual - expected;
}

Eigen::MatrixXd deviation(const SensorTraceSet& actual, const ExpectedTraceModel& expected) {
  actual.validate();
  return deviation(actual.values, expected.unroll(actual.dt, actual.size()));
}

}  // namespace fbmp
