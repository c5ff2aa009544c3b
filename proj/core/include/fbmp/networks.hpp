#pragma once

#include <Eigen/Core>
#include <string>
#include <variant>
#include <vector>

#include "fbmp/canonical.hpp"
#include "fbmp/random.hpp"

namespace fbmp {

/// Flat, mutable view of one parameter tensor (column-major storage of a matrix or a vector).
struct TensorView {
  std::string name;
  Eigen::Map<Eigen::VectorXd> data;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  bool operator==(const DenseLayer&) const = default;
};

/// Phase-modulated network for one coupling dimension:
///   h_l = tanh(W_l h_{l-1} + b_l)             (regular layers, dropout-able)
///   m   = G ⊙ (W_m h_L + b_m),  G_i = psi_bar_i(p) u
///   C   = w_c · m                              (no output bias)
struct PmnnParams {
  std::vector<DenseLayer> hidden;
  DenseLayer modulated;    // N x |h_L|
  Eigen::VectorXd output;  // N

  Eigen::Index input_dim() const { return hidden.empty() ? modulated.weight.cols() : hidden.front().weight.cols(); }
  Eigen::Index kernels() const { return modulated.weight.rows(); }
  std::vector<TensorView> tensors();
  bool operator==(const PmnnParams&) const = default;
};

/// Plain tanh network with an output bias. With phase_inputs, (p, u) are appended to the input.
struct FfnnParams {
  std::vector<DenseLayer> hidden;
  Eigen::VectorXd output;       // |h_L|
  Eigen::VectorXd output_bias;  // size 1
  bool phase_inputs = true;

  Eigen::Index input_dim() const;
  std::vector<TensorView> tensors();
  bool operator==(const FfnnParams&) const = default;
};

using Network = std::variant<PmnnParams, FfnnParams>;

std::vector<TensorView> tensors(Network& net);
Network zeros_like(const Network& net);

/// Glorot-uniform weights, zero biases.
PmnnParams init_pmnn(Eigen::Index input_dim, const std::vector<int>& hidden, Eigen::Index kernels, Rng& rng);
FfnnParams init_ffnn(Eigen::Index input_dim, const std::vector<int>& hidden, bool phase_inputs, Rng& rng);

/// Column-per-sample inputs for batched evaluation.
struct NetworkBatch {
  Eigen::MatrixXd x;       // features x B
  Eigen::MatrixXd g;       // N x B phase modulation (PMNN)
  Eigen::RowVectorXd p;    // 1 x B (FFNN phase inputs)
  Eigen::RowVectorXd u;    // 1 x B
  Eigen::RowVectorXd target;

  Eigen::Index size() const { return x.cols(); }
};

/// Inverted dropout on regular hidden layers; rate 0 or null rng disables it.
struct DropoutSpec {
  double rate = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rate > 0.0 && rng != nullptr; }
};

Eigen::RowVectorXd forward(const Network& net, const NetworkBatch& batch);

/// Loss 0.5 mean (C - target)^2 and its exact gradient written into `grad` (same shapes as net).
double loss_and_gradient(const Network& net, const NetworkBatch& batch, const DropoutSpec& dropout, Network& grad);

double pmnn_forward(const PmnnParams& net, const Eigen::VectorXd& input, const PhaseState& phase,
                    const PhaseKernelBank& bank);
double ffnn_forward(const FfnnParams& net, const Eigen::VectorXd& input, const PhaseState& phase);

double pmnn_gradient(const PmnnParams& net, const NetworkBatch& batch, const DropoutSpec& dropout, PmnnParams& grad);
double ffnn_gradient(const FfnnParams& net, const NetworkBatch& batch, const DropoutSpec& dropout, FfnnParams& grad);

/// N x B modulation matrix for phases (p_b, u_b).
Eigen::MatrixXd modulation_matrix(const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& u,
                                  const PhaseKernelBank& bank);

}  // namespace fbmp
