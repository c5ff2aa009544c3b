#include "fbmp/pca.hpp"

#include <Eigen/Eigenvalues>

#include "fbmp/errors.hpp"

namespace fbmp {

Pca pca_fit(const Eigen::MatrixXd& data, double fraction) {
  if (data.rows() < 2) throw ValidationError("pca_fit: need at least 2 rows");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("pca_fit: fraction must be in (0, 1]");
  if (!data.allFinite()) throw DataError("pca_fit: non-finite data");

  Pca pca;
  pca.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - pca.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("pca_fit: eigen-decomposition failed");

  // Eigen returns ascending eigenvalues; clamp tiny negatives from rounding.
  const Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
  const double total = values.sum();
  if (!(total > 0.0)) throw NumericalError("pca_fit: data has zero variance");

  Eigen::Index k = 0;
  double acc = 0.0;
  while (k < values.size()) {
    acc += values[k++];
    if (acc >= fraction * total * (1.0 - 1e-12)) break;
  }
  pca.components = eig.eigenvectors().rowwise().reverse().leftCols(k);
  pca.variances = values.head(k);
  pca.retained_fraction = acc / total;
  return pca;
}

Eigen::MatrixXd Pca::transform(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim()) throw ValidationError("pca transform: dimension mismatch");
  return (x.rowwise() - mean.transpose()) * components;
}

Eigen::VectorXd Pca::transform(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw ValidationError("pca transform: dimension mismatch");
  return components.transpose() * (x - mean);
}

Eigen::MatrixXd Pca::inverse_transform(const Eigen::MatrixXd& z) const {
  if (z.cols() != output_dim()) throw ValidationError("pca inverse transform: dimension mismatch");
  return (z * components.transpose()).rowwise() + mean.transpose();
}

}  // namespace fbmp
