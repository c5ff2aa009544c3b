#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "fbmp/canonical.hpp"
#include "fbmp/networks.hpp"
#include "fbmp/pca.hpp"
#include "fbmp/primitives.hpp"

namespace fbmp {

/// Supervised rows (deviation, phase) -> coupling target. u follows the canonical system
/// and is therefore <= 0; only finiteness is enforced.
struct CouplingDataset {
  std::vector<int> demo_id;
  std::vector<double> setting;
  Eigen::VectorXd p;
  Eigen::VectorXd u;
  Eigen::MatrixXd ds;  // rows x K
  Eigen::MatrixXd c;   // rows x M

  std::size_t rows() const { return demo_id.size(); }
  Eigen::Index input_dim() const { return ds.cols(); }
  Eigen::Index output_dim() const { return c.cols(); }
  void validate() const;
  CouplingDataset subset(const std::vector<std::size_t>& idx) const;
  void append(const CouplingDataset& other);
  std::vector<int> demo_ids() const;  // sorted, unique
};

enum class ModelKind { pmnn, ffnn, pca_pmnn };

struct ArchitectureSpec {
  ModelKind kind = ModelKind::pmnn;
  std::vector<int> hidden{100};
  bool phase_inputs = true;      // FFNN only
  double pca_fraction = 0.99;    // PCA pipeline only

  static ArchitectureSpec pmnn(std::vector<int> hidden = {100}) { return {ModelKind::pmnn, std::move(hidden), true, 0.99}; }
  static ArchitectureSpec ffnn(std::vector<int> hidden = {100, 25}, bool phase_inputs = true) {
    return {ModelKind::ffnn, std::move(hidden), phase_inputs, 0.99};
  }
  static ArchitectureSpec pca_pmnn(double fraction = 0.99) { return {ModelKind::pca_pmnn, {}, true, fraction}; }

  /// Parses "pmnn-100", "pmnn-0", "ffnn-100-25", "ffnn-100-25-nophase", "pca-pmnn".
  static ArchitectureSpec parse(const std::string& text);
  std::string label() const;
  void validate() const;
};

/// Per-channel z-score; channels with zero spread keep scale 1.
struct InputNormalization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static InputNormalization fit(const Eigen::MatrixXd& rows);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
};

/// M independent networks over shared input features and kernel bank. Network outputs are
/// multiplied by output_scale, which preserves the PMNN zero at u = 0.
struct FeedbackModel {
  ArchitectureSpec arch;
  InputNormalization normalization;
  std::optional<Pca> pca;
  Eigen::VectorXd output_scale;
  PhaseKernelBank bank;
  std::vector<Network> networks;

  Eigen::Index input_dim() const { return normalization.mean.size(); }
  Eigen::Index outputs() const { return static_cast<Eigen::Index>(networks.size()); }
  void validate() const;

  /// Network inputs for raw deviation rows (n x K) and phases.
  NetworkBatch features(const Eigen::MatrixXd& ds, const Eigen::VectorXd& p, const Eigen::VectorXd& u) const;
};

/// Model whose networks output exactly zero (open-loop reference).
FeedbackModel zero_feedback_model(Eigen::Index input_dim, const PhaseKernelBank& bank, Eigen::Index outputs = 1);

Eigen::VectorXd predict_coupling(const FeedbackModel& model, const Eigen::VectorXd& ds, const PhaseState& phase);

/// rows x M predictions for a dataset.
Eigen::MatrixXd predict_coupling(const FeedbackModel& model, const CouplingDataset& data);

/// C_target = -alpha (beta 2 log(Q_g ∘ Q*) - tau omega) + tau^2 omega_dot - f on the primitive's phase grid.
Eigen::MatrixX3d extract_coupling_target(const OrientationTrajectory& corrected, const QuaternionPrimitive& prim);

/// For every kernel, hidden-feature indices sorted by |W_m| (descending, stable).
std::vector<std::vector<Eigen::Index>> dominance_analysis(const FeedbackModel& model, std::size_t output = 0);

}  // namespace fbmp
