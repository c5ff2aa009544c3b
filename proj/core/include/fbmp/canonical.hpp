#pragma once

#include <Eigen/Core>
#include <vector>

namespace fbmp {

/// Phase variable p and phase velocity u of the second-order canonical system.
/// Starts at (1, 0); both decay to 0. u is non-positive along a rollout.
struct PhaseState {
  double p = 1.0;
  double u = 0.0;

  bool operator==(const PhaseState&) const = default;
};

struct CanonicalParams {
  double alpha_u = 25.0;
  double beta_u = 25.0 / 4.0;
  double tau = 1.0;

  static CanonicalParams with_tau(double tau, double alpha_u = 25.0) {
    return {alpha_u, alpha_u / 4.0, tau};
  }

  /// Throws ValidationError unless alpha_u > 0, tau > 0 and beta_u = alpha_u / 4.
  void validate() const;
};

/// One explicit Euler step of tau u' = alpha_u (beta_u (0 - p) - u), tau p' = u.
PhaseState canonical_step(const PhaseState& s, const CanonicalParams& params, double dt);

/// Closed-form p(t) of the critically damped system started at (1, 0).
double phase_at(double t, const CanonicalParams& params);

/// Euler rollout of `steps` steps; returns steps + 1 states including the initial one.
std::vector<PhaseState> canonical_rollout(const CanonicalParams& params, double dt, std::size_t steps);

/// Gaussian phase kernels psi_i(p) = exp(-h_i (p - c_i)^2).
struct PhaseKernelBank {
  std::vector<double> centers;
  std::vector<double> widths;

  std::size_t size() const { return centers.size(); }
  void validate() const;

  bool operator==(const PhaseKernelBank&) const = default;
};

Eigen::VectorXd phase_kernels(double p, const PhaseKernelBank& bank);

/// psi_i / sum_j psi_j, evaluated in log space so it stays finite far from all centers.
Eigen::VectorXd normalized_phase_kernels(double p, const PhaseKernelBank& bank);

/// Modulation vector G_i = psi_i(p) / sum_j psi_j(p) * u.
Eigen::VectorXd phase_modulation(const PhaseState& s, const PhaseKernelBank& bank);

/// Centers at the phase reached after N equally spaced times in [0, span]; widths
/// 1 / (2 (c_{i+1} - c_i)^2), last width copied from its neighbor. span defaults to tau.
PhaseKernelBank default_kernel_bank(std::size_t n, const CanonicalParams& params, double span = 0.0);

}  // namespace fbmp
