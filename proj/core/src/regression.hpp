#pragma once

// Internal helpers shared by the quaternion and position fits.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>

#include "fbmp/canonical.hpp"
#include "fbmp/errors.hpp"

namespace fbmp::detail {

/// Rows psi_bar(p_t) u_t along an Euler canonical rollout of n samples.
inline Eigen::MatrixXd phase_design(const CanonicalParams& canonical, const PhaseKernelBank& bank, double dt,
                                    std::size_t n) {
  const auto phases = canonical_rollout(canonical, dt, n - 1);
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(bank.size()));
  for (std::size_t i = 0; i < n; ++i) {
    phi.row(static_cast<Eigen::Index>(i)) = phase_modulation(phases[i], bank).transpose();
  }
  return phi;
}

/// Solves (Phi^T Phi + lambda I) W = Phi^T Y from accumulated normal equations.
inline Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& rhs, double lambda) {
  if (!(gram.trace() > 0.0)) throw NumericalError("regression: phase velocity is zero on every sample");
  Eigen::MatrixXd a = gram;
  a.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw NumericalError("regression: singular design");
  Eigen::MatrixXd w = ldlt.solve(rhs);
  if (!w.allFinite()) throw NumericalError("regression: non-finite weights");
  return w;
}

}  // namespace fbmp::detail
