#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fbmp/feedback.hpp"
#include "fbmp/networks.hpp"

namespace fbmp {

enum class Selection { generalization, validation };

struct TrainConfig {
  double learning_rate = 1e-3;
  double decay = 0.9;
  double epsilon = 1e-8;
  int batch_size = 64;
  int max_steps = 5000;
  double dropout = 0.5;
  int check_interval = 50;
  std::uint64_t seed = 1;
  Selection selection = Selection::generalization;
  /// Off: checks evaluate only the selection split and curves hold just that column (NaN
  /// elsewhere); the selected snapshot is the same either way.
  bool record_curves = true;

  void validate() const;
};

/// mean((pred - target)^2) / var(target), population variance over the evaluated set.
double nmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

struct RmsPropState {
  std::vector<Eigen::VectorXd> mean_square;
};

/// v <- rho v + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(v) + eps).
void rmsprop_step(std::vector<TensorView>& params, const std::vector<TensorView>& grads, RmsPropState& state,
                  const TrainConfig& config);

struct DatasetSplit {
  std::vector<std::size_t> train, val, test, gen;
};

/// All rows of demo `fold_demo` go to gen; the rest are shuffled and split 85 / 7.5 / 7.5.
DatasetSplit split_dataset(const CouplingDataset& data, int fold_demo, std::uint64_t seed);

struct SplitNmse {
  double train = 0.0, val = 0.0, test = 0.0, gen = 0.0;
};

struct LearningCurve {
  std::vector<int> step;
  std::vector<double> train, val, test, gen;
};

struct TrainResult {
  FeedbackModel model;
  std::vector<LearningCurve> curves;  // one per output dimension
  SplitNmse best;                     // mean over output dimensions at the selected snapshots
  std::vector<int> best_step;
};

TrainResult train_model(const CouplingDataset& data, const DatasetSplit& split, const ArchitectureSpec& arch,
                        const PhaseKernelBank& bank, const TrainConfig& config);

struct FoldResult {
  int demo = 0;
  SplitNmse nmse;
  std::map<double, double> gen_by_setting;  // setting -> generalization NMSE (NaN if undefined)
};

struct EvalReport {
  std::string model;
  std::string label;  // e.g. "prim2"
  std::vector<FoldResult> folds;

  SplitNmse mean() const;
  SplitNmse stddev() const;  // sample standard deviation across folds
  std::string table() const;
};

/// Leave-one-demonstration-out over every demo id; fold k uses seed + k. Folds may run on
/// `threads` workers without changing any fold's result.
EvalReport loo_evaluate(const CouplingDataset& data, const ArchitectureSpec& arch, const PhaseKernelBank& bank,
                        const TrainConfig& config, unsigned threads = 1);

/// Permutes the coupling targets across rows (control experiment).
CouplingDataset shuffle_targets(const CouplingDataset& data, std::uint64_t seed);

/// Markdown-style table of several reports side by side.
std::string report_table(const std::vector<EvalReport>& reports);

}  // namespace fbmp
