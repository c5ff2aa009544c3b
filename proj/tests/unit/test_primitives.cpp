#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fbmp/errors.hpp"
#include "fbmp/primitives.hpp"
#include "helpers.hpp"

using namespace fbmp;
using fbmp::test::max_abs_diff;

namespace {

QuaternionPrimitive known_primitive(double duration, const UnitQuaternion& goal, std::uint64_t seed,
                                    double weight_scale = 20.0, std::size_t n = 25) {
  QuaternionPrimitive prim;
  prim.canonical = CanonicalParams::with_tau(duration);
  prim.bank = default_kernel_bank(n, prim.canonical, duration);
  prim.goal = goal;
  prim.duration = duration;
  Rng rng(seed);
  prim.weights = Eigen::MatrixXd(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < prim.weights.size(); ++i) prim.weights.data()[i] = weight_scale * rng.normal();
  return prim;
}

double rotation_distance(const UnitQuaternion& a, const UnitQuaternion& b) { return rotation_error(a, b).norm(); }

// Mean over axes of per-axis NMSE of rotation vectors relative to the start.
double orientation_nmse(const OrientationTrajectory& pred, const OrientationTrajectory& target) {
  REQUIRE(pred.size() == target.size());
  double total = 0.0;
  int axes = 0;
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd a(static_cast<Eigen::Index>(pred.size())), b(a.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      a[static_cast<Eigen::Index>(i)] = rotation_error(pred.q[i], target.q.front())[k];
      b[static_cast<Eigen::Index>(i)] = rotation_error(target.q[i], target.q.front())[k];
    }
    const double var = (b.array() - b.mean()).square().mean();
    if (var < 1e-12) continue;
    total += (a - b).squaredNorm() / static_cast<double>(a.size()) / var;
    ++axes;
  }
  return total / axes;
}

}  // namespace

TEST_CASE("forcing term") {
  const auto prim = known_primitive(1.0, UnitQuaternion::identity(), 1);
  CHECK(forcing_term(0.5, 0.0, prim).norm() == 0.0);

  SUBCASE("single kernel collapses to w u") {
    const auto one = known_primitive(1.0, UnitQuaternion::identity(), 2, 5.0, 1);
    const Vec3 f = forcing_term(0.37, -0.8, one);
    CHECK((f - one.weights.row(0).transpose() * -0.8).norm() < 1e-14);
  }
  SUBCASE("matches the weighted-average formula") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const double p = rng.uniform(0.0, 1.0), u = rng.uniform(-2.0, 0.0);
      Eigen::Vector3d num = Eigen::Vector3d::Zero();
      double den = 0.0;
      for (std::size_t i = 0; i < prim.bank.size(); ++i) {
        const double psi = std::exp(-prim.bank.widths[i] * std::pow(p - prim.bank.centers[i], 2));
        num += psi * prim.weights.row(static_cast<Eigen::Index>(i)).transpose();
        den += psi;
      }
      CHECK((forcing_term(p, u, prim) - num / den * u).norm() < 1e-10);
    }
  }
}

TEST_CASE("transformation system") {
  auto prim = known_primitive(1.0, axis_angle(Vec3::UnitX(), 0.4), 4);
  prim.weights.setZero();

  SUBCASE("goal is a fixed point") {
    PrimitiveState s = initial_state(prim, prim.goal);
    s.phase = {0.3, -0.2};
    CHECK(angular_acceleration(s, Vec3::Zero(), Vec3::Zero(), prim).norm() < 1e-15);
    const auto next = transformation_step(s, Vec3::Zero(), Vec3::Zero(), prim, 0.001);
    CHECK(max_abs_diff(next.q, prim.goal) < 1e-15);
  }
  SUBCASE("converges from a displacement without overshoot") {
    const UnitQuaternion start = axis_angle(Vec3(1, 1, 0), -0.6);
    const auto out = unroll(prim, start, {}, 0.001, {2.0});
    CHECK(rotation_distance(out.q.back(), prim.goal) < 1e-2);
    const Vec3 initial = rotation_error(prim.goal, start);
    double worst = 0.0;  // progress past the goal along the initial error direction
    for (const auto& q : out.q) worst = std::min(worst, rotation_error(prim.goal, q).dot(initial.normalized()));
    CHECK(-worst < 0.01 * initial.norm());
    for (const auto& q : out.q) CHECK(std::abs(q.r() * q.r() + q.q().squaredNorm() - 1.0) < 1e-9);
  }
  SUBCASE("constant coupling applied then removed still converges") {
    const UnitQuaternion start = axis_angle(Vec3::UnitY(), 0.3);
    CouplingSource pulse = [](const PrimitiveState&, double t) { return t < 0.5 ? Vec3(0.0, 0.0, 30.0) : Vec3::Zero(); };
    const auto out = unroll(prim, start, pulse, 0.001, {3.0});
    CHECK(rotation_distance(out.q.back(), prim.goal) < 1e-2);
  }
}

TEST_CASE("goal system") {
  const auto prim = known_primitive(1.0, axis_angle(Vec3::UnitZ(), std::numbers::pi / 2), 5);
  CHECK(max_abs_diff(goal_step(prim.goal, prim.goal, prim, 0.001), prim.goal) == 0.0);
  UnitQuaternion g = UnitQuaternion::identity();
  const double initial = rotation_distance(prim.goal, g);
  double last = initial;
  for (int i = 0; i < 2000; ++i) {
    g = goal_step(g, prim.goal, prim, 0.001);
    const double e = rotation_distance(prim.goal, g);
    CHECK(e <= last);
    last = e;
  }
  CHECK(last < 0.005 * initial);
}

TEST_CASE("forcing target extraction") {
  const UnitQuaternion goal = axis_angle(Vec3(0, 1, 1), 0.5);
  SUBCASE("stationary demo at the goal") {
    OrientationTrajectory demo;
    demo.dt = 0.01;
    demo.t = uniform_times(50, 0.01);
    demo.q.assign(50, goal);
    demo.omega = Eigen::MatrixX3d::Zero(50, 3);
    demo.omega_dot = Eigen::MatrixX3d::Zero(50, 3);
    CHECK(extract_forcing_target(demo, goal, 0.5).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("unrolled primitive yields its own forcing term") {
    const auto prim = known_primitive(1.0, goal, 6);
    const auto demo = unroll(prim, UnitQuaternion::identity(), {}, 0.001);
    const Eigen::MatrixX3d target = extract_forcing_target(demo, prim.goal, prim.tau());
    const auto phases = canonical_rollout(prim.canonical, 0.001, demo.size() - 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < demo.size(); ++i) {
      const Vec3 f = forcing_term(phases[i].p, phases[i].u, prim);
      worst = std::max(worst, (target.row(static_cast<Eigen::Index>(i)).transpose() - f).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-6);
  }
  SUBCASE("sign opposes the attractor for a lagging demo") {
    // At rest, away from a static goal, with zero acceleration: f = -alpha beta 2 log(Q_g ∘ Q*).
    OrientationTrajectory demo;
    demo.dt = 0.01;
    demo.t = uniform_times(3, 0.01);
    demo.q.assign(3, UnitQuaternion::identity());
    demo.omega = Eigen::MatrixX3d::Zero(3, 3);
    demo.omega_dot = Eigen::MatrixX3d::Zero(3, 3);
    const DmpGains gains;
    const Eigen::MatrixX3d f = extract_forcing_target(demo, goal, 1.0, gains, false);
    const Vec3 attractor = gains.alpha * gains.beta * rotation_error(goal, UnitQuaternion::identity());
    for (Eigen::Index i = 0; i < f.rows(); ++i) CHECK((f.row(i).transpose() + attractor).norm() < 1e-12);
  }
}

TEST_CASE("quaternion primitive fitting") {
  const UnitQuaternion goal = axis_angle(Vec3(1, 0, 1), 0.8);

  SUBCASE("refit of an unroll reproduces it") {
    const auto prim = known_primitive(1.0, goal, 7);
    const auto demo = unroll(prim, UnitQuaternion::identity(), {}, 0.001);
    const auto fit = fit_quaternion_primitive({demo});
    const auto again = unroll(fit, demo.q.front(), {}, 0.001);
    CHECK(orientation_nmse(again, demo) < 0.01);
    CHECK(rotation_distance(again.q.back(), demo.q.back()) < 1e-2);
  }
  SUBCASE("constant demos give near-zero weights") {
    OrientationTrajectory demo;
    demo.dt = 0.01;
    demo.t = uniform_times(101, 0.01);
    demo.q.assign(101, goal);
    demo.omega = Eigen::MatrixX3d::Zero(101, 3);
    demo.omega_dot = Eigen::MatrixX3d::Zero(101, 3);
    CHECK(fit_quaternion_primitive({demo}).weights.cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("duplicated demos fit identically") {
    const auto demo = unroll(known_primitive(1.0, goal, 8), UnitQuaternion::identity(), {}, 0.01);
    const auto one = fit_quaternion_primitive({demo});
    const auto two = fit_quaternion_primitive({demo, demo});
    CHECK((one.weights - two.weights).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + one.weights.cwiseAbs().maxCoeff()));
  }
  SUBCASE("zero-coupling unroll ends at the goal") {
    const auto fit = fit_quaternion_primitive({unroll(known_primitive(1.0, goal, 9), UnitQuaternion::identity(), {}, 0.001)});
    const auto out = unroll(fit, UnitQuaternion::identity(), {}, 0.001, {2.0});
    CHECK(rotation_distance(out.q.back(), fit.goal) < 1e-2);
  }
  SUBCASE("identical inputs give bit-identical unrolls") {
    const auto prim = known_primitive(0.7, goal, 10);
    const auto a = unroll(prim, UnitQuaternion::identity(), {}, 0.001);
    const auto b = unroll(prim, UnitQuaternion::identity(), {}, 0.001);
    CHECK(a.omega == b.omega);
    CHECK(a.omega_dot == b.omega_dot);
  }
  CHECK_THROWS_AS(fit_quaternion_primitive({}), ValidationError);
}

TEST_CASE("position primitive") {
  PositionPrimitive prim;
  prim.canonical = CanonicalParams::with_tau(1.0);
  prim.bank = default_kernel_bank(25, prim.canonical, 1.0);
  prim.goal = Eigen::VectorXd::Constant(1, 0.5);
  prim.duration = 1.0;
  prim.weights = Eigen::MatrixXd::Zero(25, 1);

  SUBCASE("start at goal is stationary") {
    const auto out = position_unroll(prim, prim.goal, {}, 0.001);
    CHECK((out.y.array() - 0.5).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("zero weights converge without overshoot") {
    const auto out = position_unroll(prim, Eigen::VectorXd::Zero(1), {}, 0.001, {2.0});
    CHECK(std::abs(out.y(out.y.rows() - 1, 0) - 0.5) < 1e-3 * 0.5);
    CHECK(out.y.maxCoeff() < 0.5 * 1.01);
  }
  SUBCASE("fit and unroll round trip") {
    Rng rng(11);
    for (Eigen::Index i = 0; i < prim.weights.rows(); ++i) prim.weights(i, 0) = 30.0 * rng.normal();
    const auto demo = position_unroll(prim, Eigen::VectorXd::Zero(1), {}, 0.001);
    const auto fit = fit_position_primitive({demo});
    const auto again = position_unroll(fit, demo.y.row(0).transpose(), {}, 0.001);
    const Eigen::VectorXd a = again.y.col(0), b = demo.y.col(0);
    CHECK((a - b).squaredNorm() / static_cast<double>(b.size()) / (b.array() - b.mean()).square().mean() < 0.01);
  }
}

TEST_CASE("zero-velocity-crossing segmentation") {
  // Descend in z over [0, 1) s, rotate in place over [1, 2), slide in y over [2, 3.5] s.
  const double dt = 0.01;
  const std::size_t n = 351;
  auto minjerk = [](double s) { return s <= 0 ? 0.0 : s >= 1 ? 1.0 : s * s * s * (10 - 15 * s + 6 * s * s); };
  PositionTrajectory traj;
  traj.dt = dt;
  traj.t = uniform_times(n, dt);
  traj.y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = traj.t[i];
    traj.y(static_cast<Eigen::Index>(i), 2) = 0.1 * (1.0 - minjerk(t));
    traj.y(static_cast<Eigen::Index>(i), 1) = 0.3 * minjerk((t - 2.0) / 1.5);
  }
  std::tie(traj.yd, traj.ydd) = estimate_linear_motion(traj.y, dt);
  const Segmentation seg = segment_zvc(traj);
  CHECK(std::abs(static_cast<int>(seg.prim1_end) - 100) <= 2);
  CHECK(std::abs(static_cast<int>(seg.prim3_start) - 200) <= 2);
  CHECK(seg.prim1_end <= seg.prim3_start);
  CHECK(seg.range(1).first == 0);
  CHECK(seg.range(3).second == n - 1);

  SUBCASE("monotone single-phase motion has no crossing") {
    PositionTrajectory ramp = traj;
    for (std::size_t i = 0; i < n; ++i) {
      ramp.y(static_cast<Eigen::Index>(i), 2) = -0.1 * traj.t[i];
      ramp.y(static_cast<Eigen::Index>(i), 1) = 0.1 * traj.t[i];
    }
    std::tie(ramp.yd, ramp.ydd) = estimate_linear_motion(ramp.y, dt);
    CHECK_THROWS_AS(segment_zvc(ramp), SegmentationError);
  }
}
