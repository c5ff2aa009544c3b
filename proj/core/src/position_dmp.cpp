#include <cmath>

#include "fbmp/errors.hpp"
#include "fbmp/primitives.hpp"
#include "regression.hpp"

namespace fbmp {

void PositionPrimitive::validate() const {
  canonical.validate();
  bank.validate();
  gains.validate();
  if (weights.rows() != static_cast<Eigen::Index>(bank.size()) || weights.cols() != goal.size()) {
    throw ValidationError("position primitive: weights must be N x D");
  }
  if (!weights.allFinite() || !goal.allFinite()) throw ValidationError("position primitive: non-finite parameters");
  if (!(duration > 0.0)) throw ValidationError("position primitive: duration must be positive");
}

PositionState initial_position_state(const PositionPrimitive& prim, const Eigen::VectorXd& start) {
  if (start.size() != prim.dims()) throw ValidationError("position unroll: start dimension mismatch");
  PositionState s;
  s.y = start;
  s.yd = Eigen::VectorXd::Zero(start.size());
  s.goal = prim.goal_evolution ? start : prim.goal;
  return s;
}

Eigen::VectorXd position_forcing_term(double p, double u, const PositionPrimitive& prim) {
  if (u == 0.0) return Eigen::VectorXd::Zero(prim.dims());
  return prim.weights.transpose() * phase_modulation({p, u}, prim.bank);
}

Eigen::VectorXd position_acceleration(const PositionState& s, const Eigen::VectorXd& f,
                                      const Eigen::VectorXd& coupling, const PositionPrimitive& prim) {
  const double tau = prim.tau();
  return (prim.gains.alpha * (prim.gains.beta * (s.goal - s.y) - tau * s.yd) + f + coupling) / (tau * tau);
}

PositionState position_transformation_step(const PositionState& s, const Eigen::VectorXd& f,
                                           const Eigen::VectorXd& coupling, const PositionPrimitive& prim,
                                           double dt) {
  if (!(dt > 0.0)) throw ValidationError("position_transformation_step: dt must be positive");
  const Eigen::VectorXd ydd = position_acceleration(s, f, coupling, prim);
  PositionState next;
  next.y = s.y + dt * s.yd;
  next.yd = s.yd + dt * ydd;
  next.goal = prim.goal_evolution ? Eigen::VectorXd(s.goal + dt * prim.gains.alpha_g * (prim.goal - s.goal) / prim.tau())
                                  : prim.goal;
  next.phase = canonical_step(s.phase, prim.canonical, dt);
  return next;
}

Eigen::MatrixXd position_goal_trajectory(const Eigen::VectorXd& start, const Eigen::VectorXd& goal, double tau,
                                         const DmpGains& gains, bool goal_evolution, double dt, std::size_t n) {
  Eigen::MatrixXd out = goal.transpose().replicate(static_cast<Eigen::Index>(n), 1);
  if (!goal_evolution || n == 0) return out;
  out.row(0) = start.transpose();
  for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(n); ++i) {
    out.row(i) = out.row(i - 1) + dt * gains.alpha_g * (goal.transpose() - out.row(i - 1)) / tau;
  }
  return out;
}

Eigen::MatrixXd extract_position_forcing_target(const PositionTrajectory& demo, const Eigen::VectorXd& goal,
                                                double tau, const DmpGains& gains, bool goal_evolution) {
  if (demo.size() < 3) throw DataError("extract_position_forcing_target: demo shorter than 3 samples");
  demo.validate();
  if (goal.size() != demo.dims()) throw ValidationError("extract_position_forcing_target: goal dimension mismatch");
  const Eigen::MatrixXd g =
      position_goal_trajectory(demo.y.row(0).transpose(), goal, tau, gains, goal_evolution, demo.dt, demo.size());
  return -gains.alpha * (gains.beta * (g - demo.y) - tau * demo.yd) + tau * tau * demo.ydd;
}

PositionPrimitive fit_position_primitive_on(const std::vector<PositionTrajectory>& demos,
                                            const CanonicalParams& canonical, const PhaseKernelBank& bank,
                                            double duration, const DmpGains& gains, bool goal_evolution,
                                            double ridge) {
  if (demos.empty()) throw ValidationError("fit_position_primitive: no demonstrations");
  canonical.validate();
  bank.validate();
  const Eigen::Index dims = demos.front().dims();
  Eigen::VectorXd goal = Eigen::VectorXd::Zero(dims);
  for (const auto& d : demos) {
    if (d.size() < 3) throw DataError("fit_position_primitive: demo shorter than 3 samples");
    if (d.dims() != dims) throw DataError("fit_position_primitive: dimension mismatch across demos");
    d.validate();
    goal += d.y.row(d.y.rows() - 1).transpose();
  }
  goal /= static_cast<double>(demos.size());

  PositionPrimitive prim;
  prim.canonical = canonical;
  prim.bank = bank;
  prim.gains = gains;
  prim.goal = goal;
  prim.duration = duration;
  prim.goal_evolution = goal_evolution;

  const double scale = canonical.tau / duration;
  const auto n_basis = static_cast<Eigen::Index>(bank.size());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_basis, n_basis);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n_basis, dims);
  double rows = 0.0;
  for (const auto& d : demos) {
    const double tau = scale * d.duration();
    const auto c = CanonicalParams::with_tau(tau, canonical.alpha_u);
    const Eigen::MatrixXd phi = detail::phase_design(c, bank, d.dt, d.size());
    const Eigen::MatrixXd target = extract_position_forcing_target(d, goal, tau, gains, goal_evolution);
    gram.noalias() += phi.transpose() * phi;
    rhs.noalias() += phi.transpose() * target;
    rows += static_cast<double>(d.size());
  }
  prim.weights = detail::ridge_solve(gram / rows, rhs / rows, ridge);
  return prim;
}

PositionPrimitive fit_position_primitive(const std::vector<PositionTrajectory>& demos, const FitOptions& options) {
  options.validate();
  if (demos.empty()) throw ValidationError("fit_position_primitive: no demonstrations");
  double mean_duration = 0.0;
  for (const auto& d : demos) mean_duration += d.duration();
  mean_duration /= static_cast<double>(demos.size());
  if (!(mean_duration > 0.0)) throw DataError("fit_position_primitive: zero-length demonstrations");
  const auto canonical = CanonicalParams::with_tau(options.tau_scale * mean_duration, options.alpha_u);
  const auto bank = default_kernel_bank(options.n_basis, canonical, mean_duration);
  return fit_position_primitive_on(demos, canonical, bank, mean_duration, options.gains, options.goal_evolution,
                                   options.ridge);
}

PositionTrajectory position_unroll(const PositionPrimitive& prim, const Eigen::VectorXd& start,
                                   const PositionCouplingSource& coupling, double dt, const UnrollOptions& options) {
  if (!(dt > 0.0)) throw ValidationError("position_unroll: dt must be positive");
  if (!(options.duration_factor > 0.0)) throw ValidationError("position_unroll: duration_factor must be positive");
  prim.validate();
  const auto steps = static_cast<std::size_t>(std::ceil(options.duration_factor * prim.duration / dt - 1e-9));
  const auto n = static_cast<Eigen::Index>(steps + 1);
  const Eigen::Index dims = prim.dims();

  PositionTrajectory out;
  out.dt = dt;
  out.t = uniform_times(steps + 1, dt);
  out.y.resize(n, dims);
  out.yd.resize(n, dims);
  out.ydd.resize(n, dims);

  PositionState s = initial_position_state(prim, start);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dims);
  for (std::size_t i = 0;; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd f = position_forcing_term(s.phase.p, s.phase.u, prim);
    const Eigen::VectorXd c = coupling ? coupling(s, out.t[i]) : zero;
    out.y.row(r) = s.y.transpose();
    out.yd.row(r) = s.yd.transpose();
    out.ydd.row(r) = position_acceleration(s, f, c, prim).transpose();
    if (i == steps) break;
    s = position_transformation_step(s, f, c, prim, dt);
  }
  return out;
}

}  // namespace fbmp
