#pragma once

#include <Eigen/Core>

namespace fbmp {

struct Pca {
  Eigen::VectorXd mean;           // D
  Eigen::MatrixXd components;     // D x k, orthonormal columns, descending variance
  Eigen::VectorXd variances;      // k retained eigenvalues
  double retained_fraction = 0.0;

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const { return components.cols(); }

  /// Rows of x (n x D) -> rows of reduced features (n x k).
  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd transform(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& z) const;
};

/// Smallest set of principal components whose eigenvalue share reaches `fraction`.
/// Throws NumericalError on zero-variance data.
Pca pca_fit(const Eigen::MatrixXd& data, double fraction = 0.99);

}  // namespace fbmp
