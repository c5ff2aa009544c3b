#include <cmath>

#include "doctest.h"
#include "fbmp/errors.hpp"
#include "fbmp/sensors.hpp"
#include "fbmp/random.hpp"

using namespace fbmp;

namespace {

constexpr double kDt = 0.01;
constexpr std::size_t kSamples = 151;

CanonicalParams canonical() { return CanonicalParams::with_tau(4.0 * kDt * (kSamples - 1)); }
PhaseKernelBank bank() { return default_kernel_bank(25, canonical(), kDt * (kSamples - 1)); }

SensorTraceSet make_trace(const Eigen::MatrixXd& values) {
  SensorTraceSet s;
  s.dt = kDt;
  s.t = uniform_times(static_cast<std::size_t>(values.rows()), kDt);
  s.values = values;
  return s;
}

// Smooth two-channel reference trace.
Eigen::MatrixXd reference() {
  Eigen::MatrixXd v(kSamples, 2);
  for (std::size_t i = 0; i < kSamples; ++i) {
    const double t = kDt * static_cast<double>(i);
    v(static_cast<Eigen::Index>(i), 0) = 3.0 + std::sin(2.0 * t);
    v(static_cast<Eigen::Index>(i), 1) = -1.0 + 0.5 * t * t;
  }
  return v;
}

}  // namespace

TEST_CASE("constant trace is reproduced") {
  const auto model = fit_expected_traces({make_trace(Eigen::MatrixXd::Constant(kSamples, 3, 7.5))}, canonical(), bank());
  const Eigen::MatrixXd out = model.unroll(kDt, kSamples);
  CHECK((out.array() - 7.5).abs().maxCoeff() < 1e-3);
}

TEST_CASE("smooth trace round trip") {
  const Eigen::MatrixXd ref = reference();
  const auto model = fit_expected_traces({make_trace(ref)}, canonical(), bank());
  const Eigen::MatrixXd out = model.unroll(kDt, kSamples);
  for (Eigen::Index c = 0; c < ref.cols(); ++c) {
    const Eigen::VectorXd target = ref.col(c);
    CHECK(channel_nmse(out.col(c), target) < 0.01);
  }
}

TEST_CASE("traces generated by a known scalar DMP are recovered") {
  PositionPrimitive known;
  known.canonical = canonical();
  known.bank = bank();
  known.gains = DmpGains::with_alpha(25.0);
  known.duration = kDt * (kSamples - 1);
  known.goal = Eigen::Vector2d(4.0, -2.0);
  Rng rng(11);
  known.weights.resize(25, 2);
  for (Eigen::Index i = 0; i < known.weights.size(); ++i) known.weights.data()[i] = 200.0 * rng.normal();
  const Eigen::MatrixXd ref = position_unroll(known, Eigen::Vector2d(1.0, 3.0), {}, kDt).y.topRows(kSamples);
  const Eigen::MatrixXd out = fit_expected_traces({make_trace(ref)}, canonical(), bank()).unroll(kDt, kSamples);
  for (Eigen::Index c = 0; c < ref.cols(); ++c) {
    const Eigen::VectorXd target = ref.col(c);
    CHECK(channel_nmse(out.col(c), target) < 0.01);
  }
}

TEST_CASE("fit of noisy trials tracks their mean") {
  const Eigen::MatrixXd ref = reference();
  const double sigma = 0.2;
  const int trials = 15;
  Rng rng(5);
  std::vector<SensorTraceSet> set;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(ref.rows(), ref.cols());
  for (int k = 0; k < trials; ++k) {
    Eigen::MatrixXd v = ref;
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += sigma * rng.normal();
    mean += v / trials;
    set.push_back(make_trace(v));
  }
  const Eigen::MatrixXd out = fit_expected_traces(set, canonical(), bank()).unroll(kDt, kSamples);
  // The fit smooths the remaining noise of the sample mean, so agreement is checked as coverage.
  const double bound = 2.0 * sigma / std::sqrt(static_cast<double>(trials));
  const double inside = ((out - mean).array().abs() <= bound).cast<double>().mean();
  CHECK(inside >= 0.9);
  CHECK((out - ref).cwiseAbs().maxCoeff() < 3.0 * bound);
}

TEST_CASE("deviation") {
  const Eigen::MatrixXd ref = reference();
  const auto model = fit_expected_traces({make_trace(ref)}, canonical(), bank());
  const Eigen::MatrixXd expected = model.unroll(kDt, kSamples);
  CHECK(deviation(make_trace(expected), model).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd shifted = expected;
  shifted.col(1).array() += 0.25;
  const Eigen::MatrixXd ds = deviation(make_trace(shifted), model);
  CHECK(ds.col(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ds.col(1).array() - 0.25).abs().maxCoeff() < 1e-12);

  SUBCASE("deviation plus expectation restores the input") {
    Rng rng(6);
    Eigen::MatrixXd actual = expected;
    for (Eigen::Index i = 0; i < actual.size(); ++i) actual.data()[i] += rng.normal();
    CHECK((deviation(actual, expected) + expected - actual).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(deviation(Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(3, 1)), DataError);
}

TEST_CASE("expected traces share the primitive's phase") {
  const auto model = fit_expected_traces({make_trace(reference())}, canonical(), bank());
  CHECK(model.dmp.canonical.tau == canonical().tau);
  CHECK(model.dmp.bank == bank());
}

TEST_CASE("resampling") {
  SensorTraceSet s = make_trace(reference());
  const SensorTraceSet same = resample(s, kDt, kSamples);
  CHECK((same.values - s.values).cwiseAbs().maxCoeff() < 1e-12);
  const SensorTraceSet half = resample(s, kDt / 2, 2 * kSamples - 1);
  CHECK(half.values(2, 0) == doctest::Approx(s.values(1, 0)));
  CHECK(half.values(1, 1) == doctest::Approx(0.5 * (s.values(0, 1) + s.values(1, 1))));
}
