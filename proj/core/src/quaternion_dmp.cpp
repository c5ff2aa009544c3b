#include <cmath>

#include "fbmp/errors.hpp"
#include "fbmp/primitives.hpp"
#include "regression.hpp"

namespace fbmp {

void DmpGains::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(alpha_g > 0.0)) throw ValidationError("dmp gains must be positive");
  if (std::abs(beta - alpha / 4.0) > 1e-12 * alpha) throw ValidationError("dmp gains: beta must equal alpha / 4");
}

void FitOptions::validate() const {
  if (n_basis < 2) throw ValidationError("fit: need at least 2 basis functions");
  if (!(tau_scale > 0.0)) throw ValidationError("fit: tau_scale must be positive");
  if (!(ridge >= 0.0)) throw ValidationError("fit: ridge must be non-negative");
  gains.validate();
}

void QuaternionPrimitive::validate() const {
  canonical.validate();
  bank.validate();
  gains.validate();
  if (weights.rows() != static_cast<Eigen::Index>(bank.size()) || weights.cols() != 3) {
    throw ValidationError("quaternion primitive: weights must be N x 3");
  }
  if (!weights.allFinite()) throw ValidationError("quaternion primitive: non-finite weights");
  if (!(duration > 0.0)) throw ValidationError("quaternion primitive: duration must be positive");
}

PrimitiveState initial_state(const QuaternionPrimitive& prim, const UnitQuaternion& start) {
  PrimitiveState s;
  s.q = start;
  s.goal = prim.goal_evolution ? start : prim.goal;
  return s;
}

Vec3 forcing_term(double p, double u, const QuaternionPrimitive& prim) {
  if (u == 0.0) return Vec3::Zero();
  return prim.weights.transpose() * phase_modulation({p, u}, prim.bank);
}

RotVec3 angular_acceleration(const PrimitiveState& s, const Vec3& f, const Vec3& coupling,
                             const QuaternionPrimitive& prim) {
  const double tau = prim.tau();
  const RotVec3 err = rotation_error(s.goal, s.q);
  return (prim.gains.alpha * (prim.gains.beta * err - tau * s.omega) + f + coupling) / (tau * tau);
}

UnitQuaternion goal_step(const UnitQuaternion& moving_goal, const UnitQuaternion& final_goal,
                         const QuaternionPrimitive& prim, double dt) {
  const RotVec3 omega_g = prim.gains.alpha_g * rotation_error(final_goal, moving_goal) / prim.tau();
  return integrate(moving_goal, omega_g, dt);
}

PrimitiveState transformation_step(const PrimitiveState& s, const Vec3& f, const Vec3& coupling,
                                   const QuaternionPrimitive& prim, double dt) {
  if (!(dt > 0.0)) throw ValidationError("transformation_step: dt must be positive");
  const RotVec3 omega_dot = angular_acceleration(s, f, coupling, prim);
  PrimitiveState next;
  next.q = integrate(s.q, s.omega, dt);
  next.omega = s.omega + dt * omega_dot;
  next.goal = prim.goal_evolution ? goal_step(s.goal, prim.goal, prim, dt) : prim.goal;
  next.phase = canonical_step(s.phase, prim.canonical, dt);
  return next;
}

std::vector<UnitQuaternion> goal_trajectory(const UnitQuaternion& start, const UnitQuaternion& goal, double tau,
                                            const DmpGains& gains, bool goal_evolution, double dt, std::size_t n) {
  std::vector<UnitQuaternion> out(n, goal);
  if (!goal_evolution || n == 0) return out;
  out[0] = start;
  for (std::size_t i = 1; i < n; ++i) {
    const RotVec3 omega_g = gains.alpha_g * rotation_error(goal, out[i - 1]) / tau;
    out[i] = integrate(out[i - 1], omega_g, dt);
  }
  return out;
}

Eigen::MatrixX3d extract_forcing_target(const OrientationTrajectory& demo, const UnitQuaternion& goal, double tau,
                                        const DmpGains& gains, bool goal_evolution) {
  if (demo.size() < 3) throw DataError("extract_forcing_target: demo shorter than 3 samples");
  demo.validate();
  if (!(tau > 0.0)) throw ValidationError("extract_forcing_target: tau must be positive");
  const auto goals = goal_trajectory(demo.q.front(), goal, tau, gains, goal_evolution, demo.dt, demo.size());
  Eigen::MatrixX3d f(static_cast<Eigen::Index>(demo.size()), 3);
  for (std::size_t i = 0; i < demo.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const RotVec3 err = rotation_error(goals[i], demo.q[i]);
    const RotVec3 w = demo.omega.row(r).transpose();
    const RotVec3 wd = demo.omega_dot.row(r).transpose();
    f.row(r) = (-gains.alpha * (gains.beta * err - tau * w) + tau * tau * wd).transpose();
  }
  return f;
}

UnitQuaternion mean_orientation(const std::vector<UnitQuaternion>& qs) {
  if (qs.empty()) throw ValidationError("mean_orientation: empty input");
  const UnitQuaternion& ref = qs.front();
  RotVec3 acc = RotVec3::Zero();
  for (const auto& q : qs) acc += log_map(compose(q, conjugate(ref)));
  return compose(exp_map(acc / static_cast<double>(qs.size())), ref);
}

QuaternionPrimitive fit_quaternion_primitive(const std::vector<OrientationTrajectory>& demos,
                                             const FitOptions& options) {
  options.validate();
  if (demos.empty()) throw ValidationError("fit_quaternion_primitive: no demonstrations");

  double mean_duration = 0.0;
  std::vector<UnitQuaternion> terminals;
  for (const auto& d : demos) {
    if (d.size() < 3) throw DataError("fit_quaternion_primitive: demo shorter than 3 samples");
    d.validate();
    mean_duration += d.duration();
    terminals.push_back(d.q.back());
  }
  mean_duration /= static_cast<double>(demos.size());

  QuaternionPrimitive prim;
  prim.canonical = CanonicalParams::with_tau(options.tau_scale * mean_duration, options.alpha_u);
  prim.bank = default_kernel_bank(options.n_basis, prim.canonical, mean_duration);
  prim.gains = options.gains;
  prim.goal = mean_orientation(terminals);
  prim.duration = mean_duration;
  prim.goal_evolution = options.goal_evolution;

  const auto n_basis = static_cast<Eigen::Index>(options.n_basis);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_basis, n_basis);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n_basis, 3);
  double rows = 0.0;
  for (const auto& d : demos) {
    const double tau = options.tau_scale * d.duration();
    const auto canonical = CanonicalParams::with_tau(tau, options.alpha_u);
    const Eigen::MatrixXd phi = detail::phase_design(canonical, prim.bank, d.dt, d.size());
    const Eigen::MatrixX3d target = extract_forcing_target(d, prim.goal, tau, options.gains, options.goal_evolution);
    gram.noalias() += phi.transpose() * phi;
    rhs.noalias() += phi.transpose() * target;
    rows += static_cast<double>(d.size());
  }
  prim.weights = detail::ridge_solve(gram / rows, rhs / rows, options.ridge);
  return prim;
}

OrientationTrajectory unroll(const QuaternionPrimitive& prim, const UnitQuaternion& start,
                             const CouplingSource& coupling, double dt, const UnrollOptions& options) {
  if (!(dt > 0.0)) throw ValidationError("unroll: dt must be positive");
  if (!(options.duration_factor > 0.0)) throw ValidationError("unroll: duration_factor must be positive");
  prim.validate();
  const auto steps = static_cast<std::size_t>(std::ceil(options.duration_factor * prim.duration / dt - 1e-9));
  const auto n = static_cast<Eigen::Index>(steps + 1);

  OrientationTrajectory out;
  out.dt = dt;
  out.t = uniform_times(steps + 1, dt);
  out.q.reserve(steps + 1);
  out.omega.resize(n, 3);
  out.omega_dot.resize(n, 3);

  PrimitiveState s = initial_state(prim, start);
  for (std::size_t i = 0;; ++i) {
    const double t = out.t[i];
    const Vec3 f = forcing_term(s.phase.p, s.phase.u, prim);
    const Vec3 c = coupling ? coupling(s, t) : Vec3::Zero();
    const auto r = static_cast<Eigen::Index>(i);
    out.q.push_back(s.q);
    out.omega.row(r) = s.omega.transpose();
    out.omega_dot.row(r) = angular_acceleration(s, f, c, prim).transpose();
    if (i == steps) break;
    s = transformation_step(s, f, c, prim, dt);
  }
  return out;
}

}  // namespace fbmp
