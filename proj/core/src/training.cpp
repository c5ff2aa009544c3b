#include "fbmp/training.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "fbmp/errors.hpp"
#include "fbmp/random.hpp"

namespace fbmp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double nmse_or_nan(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (target.size() == 0) return kNaN;
  try {
    return nmse(pred, target);
  } catch (const NumericalError&) {
    return kNaN;
  }
}

NetworkBatch gather(const NetworkBatch& full, const std::vector<Eigen::Index>& idx) {
  NetworkBatch b;
  b.x = full.x(Eigen::all, idx);
  if (full.g.size() > 0) b.g = full.g(Eigen::all, idx);
  b.p = full.p(idx);
  b.u = full.u(idx);
  b.target = full.target(idx);
  return b;
}

std::string fmt(const char* pattern, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("train config: learning rate must be positive");
  if (!(decay > 0.0 && decay < 1.0)) throw ValidationError("train config: decay must be in (0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("train config: epsilon must be positive");
  if (batch_size < 1) throw ValidationError("train config: batch size must be >= 1");
  if (max_steps < 0) throw ValidationError("train config: max steps must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("train config: dropout must be in [0, 1)");
  if (check_interval < 1) throw ValidationError("train config: check interval must be >= 1");
}

double nmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) { return channel_nmse(pred, target); }

void rmsprop_step(std::vector<TensorView>& params, const std::vector<TensorView>& grads, RmsPropState& state,
                  const TrainConfig& config) {
  if (params.size() != grads.size()) throw ValidationError("rmsprop: parameter/gradient count mismatch");
  if (state.mean_square.empty()) {
    for (const auto& p : params) state.mean_square.push_back(Eigen::VectorXd::Zero(p.data.size()));
  }
  if (state.mean_square.size() != params.size()) throw ValidationError("rmsprop: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = state.mean_square[i];
    const auto& g = grads[i].data;
    if (g.size() != params[i].data.size() || v.size() != g.size()) throw ValidationError("rmsprop: shape mismatch");
    v = config.decay * v + (1.0 - config.decay) * g.cwiseAbs2();
    params[i].data.array() -= config.learning_rate * g.array() / (v.array().sqrt() + config.epsilon);
  }
}

DatasetSplit split_dataset(const CouplingDataset& data, int fold_demo, std::uint64_t seed) {
  const auto ids = data.demo_ids();
  if (ids.size() < 2) throw ValidationError("split_dataset: need at least 2 distinct demo ids");
  if (!std::binary_search(ids.begin(), ids.end(), fold_demo)) {
    throw ValidationError("split_dataset: demo " + std::to_string(fold_demo) + " not in dataset");
  }
  DatasetSplit split;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < data.rows(); ++i) (data.demo_id[i] == fold_demo ? split.gen : rest).push_back(i);
  Rng rng(seed);
  rng.shuffle(rest);
  const auto n = static_cast<double>(rest.size());
  const auto n_train = static_cast<std::size_t>(std::llround(0.85 * n));
  const auto n_val = static_cast<std::size_t>(std::llround(0.075 * n));
  split.train.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train),
                   rest.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), rest.end());
  return split;
}

TrainResult train_model(const CouplingDataset& data, const DatasetSplit& split, const ArchitectureSpec& arch,
                        const PhaseKernelBank& bank, const TrainConfig& config) {
  config.validate();
  arch.validate();
  bank.validate();
  data.validate();
  if (split.train.empty()) throw ValidationError("train_model: empty training split");

  const CouplingDataset train = data.subset(split.train);
  TrainResult result;
  FeedbackModel& model = result.model;
  model.arch = arch;
  model.bank = bank;
  model.normalization = InputNormalization::fit(train.ds);
  if (arch.kind == ModelKind::pca_pmnn) model.pca = pca_fit(model.normalization.apply(train.ds), arch.pca_fraction);

  const Eigen::Index outputs = data.output_dim();
  model.output_scale.resize(outputs);
  for (Eigen::Index j = 0; j < outputs; ++j) {
    const auto col = train.c.col(j);
    const double sd = std::sqrt((col.array() - col.mean()).square().mean());
    model.output_scale[j] = sd > 1e-12 ? sd : 1.0;
  }

  const std::vector<const std::vector<std::size_t>*> parts{&split.train, &split.val, &split.test, &split.gen};
  std::vector<CouplingDataset> subsets;
  std::vector<NetworkBatch> batches;
  for (const auto* idx : parts) {
    subsets.push_back(data.subset(*idx));
    const auto& s = subsets.back();
    batches.push_back(s.rows() > 0 ? model.features(s.ds, s.p, s.u) : NetworkBatch{});
  }
  const Eigen::Index features = batches[0].x.rows();
  const auto n_train = static_cast<Eigen::Index>(split.train.size());

  // Index of the split driving selection; evaluate(net, 4) covers all splits.
  const std::size_t selected = config.selection == Selection::generalization ? 3 : 1;
  auto evaluate = [&](const Network& net, std::size_t only) {
    SplitNmse e{kNaN, kNaN, kNaN, kNaN};
    double* slots[] = {&e.train, &e.val, &e.test, &e.gen};
    for (std::size_t s = 0; s < batches.size(); ++s) {
      if ((only == 4 || only == s) && subsets[s].rows() > 0) {
        *slots[s] = nmse_or_nan(forward(net, batches[s]).transpose(), batches[s].target.transpose());
      }
    }
    return e;
  };

  for (Eigen::Index j = 0; j < outputs; ++j) {
    for (std::size_t s = 0; s < batches.size(); ++s) {
      if (subsets[s].rows() > 0) batches[s].target = subsets[s].c.col(j).transpose() / model.output_scale[j];
    }
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(j)));
    Network net = arch.kind == ModelKind::ffnn
                      ? Network(init_ffnn(features, arch.hidden, arch.phase_inputs, rng))
                      : Network(init_pmnn(features, arch.hidden, static_cast<Eigen::Index>(bank.size()), rng));
    Network grad = zeros_like(net);
    RmsPropState state;
    const DropoutSpec dropout{config.dropout, &rng};

    LearningCurve curve;
    Network best_net = net;
    double best_score = std::numeric_limits<double>::infinity();
    int best_step = 0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::size_t cursor = order.size();
    std::vector<Eigen::Index> idx;

    for (int step = 0;; ++step) {
      if (step % config.check_interval == 0 || step == config.max_steps) {
        const SplitNmse e = evaluate(net, config.record_curves ? 4 : selected);
        curve.step.push_back(step);
        curve.train.push_back(e.train);
        curve.val.push_back(e.val);
        curve.test.push_back(e.test);
        curve.gen.push_back(e.gen);
        const double score = config.selection == Selection::generalization ? e.gen : e.val;
        if (std::isfinite(score) ? score < best_score : !std::isfinite(best_score) && step == 0) {
          if (std::isfinite(score)) best_score = score;
          best_net = net;
          best_step = step;
        }
      }
      if (step == config.max_steps) break;

      idx.clear();
      for (int b = 0; b < config.batch_size && b < n_train; ++b) {
        if (cursor == order.size()) {
          rng.shuffle(order);
          cursor = 0;
        }
        idx.push_back(order[cursor++]);
      }
      const double loss = loss_and_gradient(net, gather(batches[0], idx), dropout, grad);
      if (!std::isfinite(loss)) throw NumericalError("train_model: loss diverged at step " + std::to_string(step));
      auto params = tensors(net);
      rmsprop_step(params, tensors(grad), state, config);
    }
    const SplitNmse best = evaluate(best_net, 4);
    model.networks.push_back(std::move(best_net));
    result.curves.push_back(std::move(curve));
    result.best_step.push_back(best_step);
    result.best.train += best.train / static_cast<double>(outputs);
    result.best.val += best.val / static_cast<double>(outputs);
    result.best.test += best.test / static_cast<double>(outputs);
    result.best.gen += best.gen / static_cast<double>(outputs);
  }
  return result;
}

EvalReport loo_evaluate(const CouplingDataset& data, const ArchitectureSpec& arch, const PhaseKernelBank& bank,
                        const TrainConfig& config, unsigned threads) {
  data.validate();
  const auto ids = data.demo_ids();
  if (ids.size() < 2) throw ValidationError("loo_evaluate: need at least 2 demonstrations");

  EvalReport report;
  report.model = arch.label();
  report.folds.resize(ids.size());

  auto run_fold = [&](std::size_t f) {
    TrainConfig cfg = config;
    cfg.seed = config.seed + f;
    cfg.record_curves = false;  // folds report only the selected snapshot
    const DatasetSplit split = split_dataset(data, ids[f], cfg.seed);
    const TrainResult trained = train_model(data, split, arch, bank, cfg);
    FoldResult fold;
    fold.demo = ids[f];
    fold.nmse = trained.best;
    const CouplingDataset gen = data.subset(split.gen);
    const Eigen::MatrixXd pred = predict_coupling(trained.model, gen);
    std::map<double, std::vector<std::size_t>> by_setting;
    for (std::size_t i = 0; i < gen.rows(); ++i) by_setting[gen.setting[i]].push_back(i);
    for (const auto& [setting, rows] : by_setting) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < pred.cols(); ++j) {
        Eigen::VectorXd pr(static_cast<Eigen::Index>(rows.size())), tg(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          pr[static_cast<Eigen::Index>(r)] = pred(static_cast<Eigen::Index>(rows[r]), j);
          tg[static_cast<Eigen::Index>(r)] = gen.c(static_cast<Eigen::Index>(rows[r]), j);
        }
        acc += nmse_or_nan(pr, tg);
      }
      fold.gen_by_setting[setting] = acc / static_cast<double>(pred.cols());
    }
    report.folds[f] = std::move(fold);
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(ids.size())));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::string error_fold;
  auto worker = [&] {
    for (std::size_t f; (f = next.fetch_add(1)) < ids.size();) {
      try {
        run_fold(f);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) {
          error = std::current_exception();
          error_fold = std::to_string(ids[f]);
        }
        next = ids.size();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) {
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      throw NumericalError("loo_evaluate: fold for demo " + error_fold + " failed: " + e.what());
    }
  }
  return report;
}

SplitNmse EvalReport::mean() const {
  SplitNmse m;
  if (folds.empty()) return m;
  for (const auto& f : folds) {
    m.train += f.nmse.train;
    m.val += f.nmse.val;
    m.test += f.nmse.test;
    m.gen += f.nmse.gen;
  }
  const auto k = static_cast<double>(folds.size());
  return {m.train / k, m.val / k, m.test / k, m.gen / k};
}

SplitNmse EvalReport::stddev() const {
  SplitNmse s;
  if (folds.size() < 2) return s;
  const SplitNmse m = mean();
  for (const auto& f : folds) {
    s.train += std::pow(f.nmse.train - m.train, 2);
    s.val += std::pow(f.nmse.val - m.val, 2);
    s.test += std::pow(f.nmse.test - m.test, 2);
    s.gen += std::pow(f.nmse.gen - m.gen, 2);
  }
  const auto k = static_cast<double>(folds.size() - 1);
  return {std::sqrt(s.train / k), std::sqrt(s.val / k), std::sqrt(s.test / k), std::sqrt(s.gen / k)};
}

std::string EvalReport::table() const { return report_table({*this}); }

std::string report_table(const std::vector<EvalReport>& reports) {
  std::string out = "| Model | Prim. | Training | Validation | Testing | Generalization |\n";
  out += "|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    const SplitNmse m = r.mean();
    const SplitNmse s = r.stddev();
    out += "| " + r.model + " | " + r.label + " | " + fmt("%.4f±%.4f", m.train, s.train) + " | " +
           fmt("%.4f±%.4f", m.val, s.val) + " | " + fmt("%.4f±%.4f", m.test, s.test) + " | " +
           fmt("%.4f±%.4f", m.gen, s.gen) + " |\n";
  }
  return out;
}

CouplingDataset shuffle_targets(const CouplingDataset& data, std::uint64_t seed) {
  std::vector<std::size_t> perm(data.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);
  CouplingDataset out = data;
  for (std::size_t i = 0; i < perm.size(); ++i) out.c.row(static_cast<Eigen::Index>(i)) = data.c.row(static_cast<Eigen::Index>(perm[i]));
  return out;
}

}  // namespace fbmp
