#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "fbmp/canonical.hpp"
#include "fbmp/so3.hpp"
#include "fbmp/trajectory.hpp"

namespace fbmp {

/// Spring-damper gains shared by the transformation and goal systems.
struct DmpGains {
  double alpha = 25.0;
  double beta = 25.0 / 4.0;
  double alpha_g = 25.0 / 2.0;

  static DmpGains with_alpha(double alpha) { return {alpha, alpha / 4.0, alpha / 2.0}; }
  void validate() const;
  bool operator==(const DmpGains&) const = default;
};

/// Options shared by quaternion and position fitting.
struct FitOptions {
  std::size_t n_basis = 25;
  /// tau = tau_scale * demonstrated duration.
  double tau_scale = 1.0;
  double alpha_u = 25.0;
  DmpGains gains{};
  double ridge = 1e-8;
  bool goal_evolution = true;

  void validate() const;
};

struct QuaternionPrimitive {
  CanonicalParams canonical;
  PhaseKernelBank bank;
  DmpGains gains;
  Eigen::MatrixXd weights;  // N x 3
  UnitQuaternion goal;
  /// Length of the demonstrated movement; unrolls run for duration_factor * duration.
  double duration = 1.0;
  bool goal_evolution = true;

  double tau() const { return canonical.tau; }
  void validate() const;
};

struct PrimitiveState {
  UnitQuaternion q;
  RotVec3 omega = RotVec3::Zero();
  UnitQuaternion goal;
  PhaseState phase;
};

/// Start state at rest. With goal evolution the moving goal starts at `start`, so the
/// first commanded acceleration is zero; otherwise it is pinned to the final goal.
PrimitiveState initial_state(const QuaternionPrimitive& prim, const UnitQuaternion& start);

/// f = (sum_i psi_i(p) w_i / sum_j psi_j(p)) u, one entry per axis.
Vec3 forcing_term(double p, double u, const QuaternionPrimitive& prim);

/// omega_dot = (alpha (beta 2 log(Q_g ∘ Q*) - tau omega) + f + C) / tau^2.
RotVec3 angular_acceleration(const PrimitiveState& s, const Vec3& f, const Vec3& coupling,
                             const QuaternionPrimitive& prim);

/// Q_g advanced by omega_g = alpha_g 2 log(Q_G ∘ Q_g*) / tau.
UnitQuaternion goal_step(const UnitQuaternion& moving_goal, const UnitQuaternion& final_goal,
                         const QuaternionPrimitive& prim, double dt);

/// One explicit Euler step of the full system: orientation (integrated with the old omega),
/// angular velocity, moving goal and phase.
PrimitiveState transformation_step(const PrimitiveState& s, const Vec3& f, const Vec3& coupling,
                                   const QuaternionPrimitive& prim, double dt);

/// Moving-goal trajectory on a uniform grid of n samples.
std::vector<UnitQuaternion> goal_trajectory(const UnitQuaternion& start, const UnitQuaternion& goal, double tau,
                                            const DmpGains& gains, bool goal_evolution, double dt, std::size_t n);

/// Per-sample forcing target -alpha (beta 2 log(Q_g ∘ Q*) - tau omega) + tau^2 omega_dot (n x 3).
Eigen::MatrixX3d extract_forcing_target(const OrientationTrajectory& demo, const UnitQuaternion& goal, double tau,
                                        const DmpGains& gains = {}, bool goal_evolution = true);

/// Log-mean of quaternions around the first one.
UnitQuaternion mean_orientation(const std::vector<UnitQuaternion>& qs);

/// Pooled ridge regression of the forcing weights. Each demo uses tau = tau_scale * its duration;
/// the primitive keeps tau_scale * mean duration. Throws NumericalError on a degenerate design.
QuaternionPrimitive fit_quaternion_primitive(const std::vector<OrientationTrajectory>& demos,
                                             const FitOptions& options = {});

using CouplingSource = std::function<Vec3(const PrimitiveState&, double)>;

struct UnrollOptions {
  double duration_factor = 1.0;
};

/// Records Q, omega, omega_dot for ceil(duration_factor * duration / dt) steps.
OrientationTrajectory unroll(const QuaternionPrimitive& prim, const UnitQuaternion& start,
                             const CouplingSource& coupling, double dt, const UnrollOptions& options = {});

// ---------------------------------------------------------------------------
// Position DMP: identical structure with subtraction in place of 2 log.

struct PositionPrimitive {
  CanonicalParams canonical;
  PhaseKernelBank bank;
  DmpGains gains;
  Eigen::MatrixXd weights;  // N x D
  Eigen::VectorXd goal;
  double duration = 1.0;
  bool goal_evolution = true;

  double tau() const { return canonical.tau; }
  Eigen::Index dims() const { return goal.size(); }
  void validate() const;
};

struct PositionState {
  Eigen::VectorXd y;
  Eigen::VectorXd yd;
  Eigen::VectorXd goal;
  PhaseState phase;
};

PositionState initial_position_state(const PositionPrimitive& prim, const Eigen::VectorXd& start);

Eigen::VectorXd position_forcing_term(double p, double u, const PositionPrimitive& prim);

Eigen::VectorXd position_acceleration(const PositionState& s, const Eigen::VectorXd& f,
                                      const Eigen::VectorXd& coupling, const PositionPrimitive& prim);

PositionState position_transformation_step(const PositionState& s, const Eigen::VectorXd& f,
                                           const Eigen::VectorXd& coupling, const PositionPrimitive& prim,
                                           double dt);

Eigen::MatrixXd position_goal_trajectory(const Eigen::VectorXd& start, const Eigen::VectorXd& goal, double tau,
                                         const DmpGains& gains, bool goal_evolution, double dt, std::size_t n);

Eigen::MatrixXd extract_position_forcing_target(const PositionTrajectory& demo, const Eigen::VectorXd& goal,
                                                double tau, const DmpGains& gains = {}, bool goal_evolution = true);

PositionPrimitive fit_position_primitive(const std::vector<PositionTrajectory>& demos, const FitOptions& options = {});

/// Refits weights and goal on a fixed canonical system and kernel bank (used for expected
/// sensor traces, which share the motion primitive's phase).
PositionPrimitive fit_position_primitive_on(const std::vector<PositionTrajectory>& demos,
                                            const CanonicalParams& canonical, const PhaseKernelBank& bank,
                                            double duration, const DmpGains& gains, bool goal_evolution,
                                            double ridge = 1e-8);

using PositionCouplingSource = std::function<Eigen::VectorXd(const PositionState&, double)>;

/// Pass an empty coupling source for a coupling-free unroll.
PositionTrajectory position_unroll(const PositionPrimitive& prim, const Eigen::VectorXd& start,
                                   const PositionCouplingSource& coupling, double dt,
                                   const UnrollOptions& options = {});

// ---------------------------------------------------------------------------
// Zero-velocity-crossing segmentation into three primitives.

struct ZvcOptions {
  /// A crossing is |v| <= threshold * peak |v| or a sign change.
  double threshold = 0.02;
  Eigen::Index descend_axis = 2;  // z
  Eigen::Index slide_axis = 1;    // y
};

struct Segmentation {
  std::size_t prim1_end = 0;    // last sample of primitive 1 (first of primitive 2)
  std::size_t prim3_start = 0;  // first sample of primitive 3 (last of primitive 2)
  std::size_t samples = 0;

  /// Inclusive [begin, end] of primitive k in {1, 2, 3}.
  std::pair<std::size_t, std::size_t> range(int k) const;
};

/// Throws SegmentationError when either boundary has no qualifying crossing.
Segmentation segment_zvc(const PositionTrajectory& traj, const ZvcOptions& options = {});

}  // namespace fbmp
