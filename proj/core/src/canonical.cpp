#include "fbmp/canonical.hpp"

#include <cmath>
#include <limits>

#include "fbmp/errors.hpp"

namespace fbmp {

void CanonicalParams::validate() const {
  if (!(alpha_u > 0.0)) throw ValidationError("canonical: alpha_u must be positive");
  if (!(tau > 0.0)) throw ValidationError("canonical: tau must be positive");
  if (std::abs(beta_u - alpha_u / 4.0) > 1e-12 * alpha_u) {
    throw ValidationError("canonical: beta_u must equal alpha_u / 4");
  }
}

PhaseState canonical_step(const PhaseState& s, const CanonicalParams& params, double dt) {
  const double du = params.alpha_u * (params.beta_u * (0.0 - s.p) - s.u) / params.tau;
  const double dp = s.u / params.tau;
  return {s.p + dt * dp, s.u + dt * du};
}

double phase_at(double t, const CanonicalParams& params) {
  const double rate = params.alpha_u / (2.0 * params.tau);
  return (1.0 + rate * t) * std::exp(-rate * t);
}

std::vector<PhaseState> canonical_rollout(const CanonicalParams& params, double dt, std::size_t steps) {
  std::vector<PhaseState> out;
  out.reserve(steps + 1);
  PhaseState s;
  out.push_back(s);
  for (std::size_t i = 0; i < steps; ++i) {
    s = canonical_step(s, params, dt);
    out.push_back(s);
  }
  return out;
}

void PhaseKernelBank::validate() const {
  if (centers.size() != widths.size()) throw ValidationError("kernel bank: centers/widths size mismatch");
  if (centers.empty()) throw ValidationError("kernel bank: empty");
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (!std::isfinite(centers[i]) || !(widths[i] > 0.0) || !std::isfinite(widths[i])) {
      throw ValidationError("kernel bank: non-finite center or non-positive width");
    }
    if (i > 0 && !(centers[i] < centers[i - 1])) {
      throw ValidationError("kernel bank: centers must be strictly decreasing");
    }
  }
}

Eigen::VectorXd phase_kernels(double p, const PhaseKernelBank& bank) {
  Eigen::VectorXd psi(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double d = p - bank.centers[i];
    psi[i] = std::exp(-bank.widths[i] * d * d);
  }
  return psi;
}

Eigen::VectorXd normalized_phase_kernels(double p, const PhaseKernelBank& bank) {
  Eigen::VectorXd e(bank.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double d = p - bank.centers[i];
    e[i] = -bank.widths[i] * d * d;
    top = std::max(top, e[i]);
  }
  e = (e.array() - top).exp();
  return e / e.sum();
}

Eigen::VectorXd phase_modulation(const PhaseState& s, const PhaseKernelBank& bank) {
  return normalized_phase_kernels(s.p, bank) * s.u;
}

PhaseKernelBank default_kernel_bank(std::size_t n, const CanonicalParams& params, double span) {
  if (n < 1) throw ValidationError("default_kernel_bank: need at least 1 kernel");
  params.validate();
  if (span <= 0.0) span = params.tau;
  PhaseKernelBank bank;
  if (n == 1) {
    // Normalization makes the lone kernel's width irrelevant.
    bank.centers = {1.0};
    bank.widths = {1.0};
    bank.validate();
    return bank;
  }
  bank.centers.resize(n);
  bank.widths.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = span * static_cast<double>(i) / static_cast<double>(n - 1);
    bank.centers[i] = phase_at(t, params);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dc = bank.centers[i + 1] - bank.centers[i];
    bank.widths[i] = 1.0 / (2.0 * dc * dc);
  }
  bank.widths[n - 1] = bank.widths[n - 2];
  bank.validate();
  return bank;
}

}  // namespace fbmp
