#include "fbmp/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "fbmp/errors.hpp"

namespace fbmp {

void CouplingDataset::validate() const {
  const auto n = static_cast<Eigen::Index>(rows());
  if (static_cast<Eigen::Index>(setting.size()) != n || p.size() != n || u.size() != n || ds.rows() != n ||
      c.rows() != n) {
    throw DataError("coupling dataset: column lengths differ");
  }
  if (!p.allFinite() || !u.allFinite() || !ds.allFinite() || !c.allFinite()) {
    throw DataError("coupling dataset: non-finite entries");
  }
}

CouplingDataset CouplingDataset::subset(const std::vector<std::size_t>& idx) const {
  CouplingDataset out;
  const auto n = static_cast<Eigen::Index>(idx.size());
  out.demo_id.reserve(idx.size());
  out.setting.reserve(idx.size());
  out.p.resize(n);
  out.u.resize(n);
  out.ds.resize(n, ds.cols());
  out.c.resize(n, c.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t i = idx[static_cast<std::size_t>(r)];
    if (i >= rows()) throw ValidationError("coupling dataset: subset index out of range");
    const auto src = static_cast<Eigen::Index>(i);
    out.demo_id.push_back(demo_id[i]);
    out.setting.push_back(setting[i]);
    out.p[r] = p[src];
    out.u[r] = u[src];
    out.ds.row(r) = ds.row(src);
    out.c.row(r) = c.row(src);
  }
  return out;
}

void CouplingDataset::append(const CouplingDataset& other) {
  if (rows() == 0) {
    *this = other;
    return;
  }
  if (other.ds.cols() != ds.cols() || other.c.cols() != c.cols()) throw DataError("coupling dataset: append shape mismatch");
  const Eigen::Index n0 = static_cast<Eigen::Index>(rows());
  const Eigen::Index n1 = static_cast<Eigen::Index>(other.rows());
  demo_id.insert(demo_id.end(), other.demo_id.begin(), other.demo_id.end());
  setting.insert(setting.end(), other.setting.begin(), other.setting.end());
  p.conservativeResize(n0 + n1);
  p.tail(n1) = other.p;
  u.conservativeResize(n0 + n1);
  u.tail(n1) = other.u;
  ds.conservativeResize(n0 + n1, Eigen::NoChange);
  ds.bottomRows(n1) = other.ds;
  c.conservativeResize(n0 + n1, Eigen::NoChange);
  c.bottomRows(n1) = other.c;
}

std::vector<int> CouplingDataset::demo_ids() const {
  std::set<int> ids(demo_id.begin(), demo_id.end());
  return {ids.begin(), ids.end()};
}

ArchitectureSpec ArchitectureSpec::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, '-');) parts.push_back(part);
  if (parts.empty()) throw ValidationError("architecture: empty spec");
  if (text == "pca-pmnn" || text == "pca") return pca_pmnn();
  auto widths = [&](std::size_t from, std::size_t to) {
    std::vector<int> out;
    for (std::size_t i = from; i < to; ++i) {
      int w = 0;
      try {
        w = std::stoi(parts[i]);
      } catch (const std::exception&) {
        throw ValidationError("architecture: bad layer width '" + parts[i] + "' in " + text);
      }
      if (w > 0) out.push_back(w);
    }
    return out;
  };
  if (parts[0] == "pmnn") return pmnn(widths(1, parts.size()));
  if (parts[0] == "ffnn") {
    const bool nophase = parts.back() == "nophase";
    return ffnn(widths(1, parts.size() - (nophase ? 1 : 0)), !nophase);
  }
  throw ValidationError("architecture: unknown model '" + text + "'");
}

std::string ArchitectureSpec::label() const {
  if (kind == ModelKind::pca_pmnn) return "pca-pmnn";
  std::string out = kind == ModelKind::pmnn ? "pmnn" : "ffnn";
  if (hidden.empty()) out += "-0";
  for (int w : hidden) out += "-" + std::to_string(w);
  if (kind == ModelKind::ffnn && !phase_inputs) out += "-nophase";
  return out;
}

void ArchitectureSpec::validate() const {
  for (int w : hidden) {
    if (w < 1) throw ValidationError("architecture: hidden widths must be positive");
  }
  if (kind == ModelKind::ffnn && hidden.empty()) throw ValidationError("architecture: ffnn needs a hidden layer");
  if (kind == ModelKind::pca_pmnn && !hidden.empty()) throw ValidationError("architecture: pca pipeline has no hidden layers");
  if (!(pca_fraction > 0.0 && pca_fraction <= 1.0)) throw ValidationError("architecture: pca fraction must be in (0, 1]");
}

InputNormalization InputNormalization::fit(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 1) throw ValidationError("normalization: no rows");
  InputNormalization out;
  out.mean = rows.colwise().mean().transpose();
  out.scale = ((rows.rowwise() - out.mean.transpose()).array().square().colwise().mean().sqrt()).transpose();
  for (Eigen::Index i = 0; i < out.scale.size(); ++i) {
    if (!(out.scale[i] > 1e-12)) out.scale[i] = 1.0;
  }
  return out;
}

Eigen::MatrixXd InputNormalization::apply(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != mean.size()) throw ValidationError("normalization: input dimension mismatch");
  return (rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

void FeedbackModel::validate() const {
  arch.validate();
  bank.validate();
  if (networks.empty()) throw ValidationError("feedback model: no networks");
  if (normalization.scale.size() != normalization.mean.size()) throw ValidationError("feedback model: bad normalization");
  if (output_scale.size() != outputs()) throw ValidationError("feedback model: output scale size mismatch");
  const Eigen::Index features = pca ? pca->output_dim() : input_dim();
  if (pca && pca->input_dim() != input_dim()) throw ValidationError("feedback model: pca dimension mismatch");
  for (const auto& net : networks) {
    if (const auto* pm = std::get_if<PmnnParams>(&net)) {
      if (pm->kernels() != static_cast<Eigen::Index>(bank.size())) {
        throw ValidationError("feedback model: network kernel count differs from bank");
      }
      if (pm->input_dim() != features) throw ValidationError("feedback model: network input dimension mismatch");
    } else if (std::get<FfnnParams>(net).input_dim() != features) {
      throw ValidationError("feedback model: network input dimension mismatch");
    }
  }
}

NetworkBatch FeedbackModel::features(const Eigen::MatrixXd& ds, const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& u) const {
  if (ds.rows() != p.size() || ds.rows() != u.size()) throw ValidationError("feedback model: row count mismatch");
  Eigen::MatrixXd z = normalization.apply(ds);
  if (pca) z = pca->transform(z);
  NetworkBatch batch;
  batch.x = z.transpose();
  batch.p = p.transpose();
  batch.u = u.transpose();
  if (arch.kind != ModelKind::ffnn) batch.g = modulation_matrix(batch.p, batch.u, bank);
  return batch;
}

FeedbackModel zero_feedback_model(Eigen::Index input_dim, const PhaseKernelBank& bank, Eigen::Index outputs) {
  FeedbackModel model;
  model.arch = ArchitectureSpec::pmnn({});
  model.normalization.mean = Eigen::VectorXd::Zero(input_dim);
  model.normalization.scale = Eigen::VectorXd::Ones(input_dim);
  model.output_scale = Eigen::VectorXd::Ones(outputs);
  model.bank = bank;
  PmnnParams net;
  const auto n = static_cast<Eigen::Index>(bank.size());
  net.modulated.weight = Eigen::MatrixXd::Zero(n, input_dim);
  net.modulated.bias = Eigen::VectorXd::Zero(n);
  net.output = Eigen::VectorXd::Zero(n);
  model.networks.assign(static_cast<std::size_t>(outputs), net);
  return model;
}

Eigen::VectorXd predict_coupling(const FeedbackModel& model, const Eigen::VectorXd& ds, const PhaseState& phase) {
  if (ds.size() != model.input_dim()) throw ValidationError("predict_coupling: input dimension mismatch");
  const NetworkBatch batch =
      model.features(ds.transpose(), Eigen::VectorXd::Constant(1, phase.p), Eigen::VectorXd::Constant(1, phase.u));
  Eigen::VectorXd out(model.outputs());
  for (Eigen::Index j = 0; j < model.outputs(); ++j) {
    out[j] = model.output_scale[j] * forward(model.networks[static_cast<std::size_t>(j)], batch)[0];
  }
  return out;
}

Eigen::MatrixXd predict_coupling(const FeedbackModel& model, const CouplingDataset& data) {
  if (data.input_dim() != model.input_dim()) throw ValidationError("predict_coupling: input dimension mismatch");
  const NetworkBatch batch = model.features(data.ds, data.p, data.u);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.rows()), model.outputs());
  for (Eigen::Index j = 0; j < model.outputs(); ++j) {
    out.col(j) = model.output_scale[j] * forward(model.networks[static_cast<std::size_t>(j)], batch).transpose();
  }
  return out;
}

Eigen::MatrixX3d extract_coupling_target(const OrientationTrajectory& corrected, const QuaternionPrimitive& prim) {
  prim.validate();
  if (std::abs(corrected.duration() - prim.duration) > 0.5 * corrected.dt) {
    throw DataError("extract_coupling_target: demo length does not match the primitive's phase grid");
  }
  Eigen::MatrixX3d c = extract_forcing_target(corrected, prim.goal, prim.tau(), prim.gains, prim.goal_evolution);
  const auto phases = canonical_rollout(prim.canonical, corrected.dt, corrected.size() - 1);
  for (std::size_t i = 0; i < phases.size(); ++i) {
    c.row(static_cast<Eigen::Index>(i)) -= forcing_term(phases[i].p, phases[i].u, prim).transpose();
  }
  return c;
}

std::vector<std::vector<Eigen::Index>> dominance_analysis(const FeedbackModel& model, std::size_t output) {
  if (output >= model.networks.size()) throw ValidationError("dominance_analysis: output index out of range");
  const auto* net = std::get_if<PmnnParams>(&model.networks[output]);
  if (!net || net->hidden.empty()) {
    throw ValidationError("dominance_analysis: model has no regular hidden layer");
  }
  const Eigen::MatrixXd& w = net->modulated.weight;
  std::vector<std::vector<Eigen::Index>> ranks(static_cast<std::size_t>(w.rows()));
  for (Eigen::Index k = 0; k < w.rows(); ++k) {
    auto& r = ranks[static_cast<std::size_t>(k)];
    r.resize(static_cast<std::size_t>(w.cols()));
    std::iota(r.begin(), r.end(), Eigen::Index{0});
    std::stable_sort(r.begin(), r.end(), [&](Eigen::Index a, Eigen::Index b) { return std::abs(w(k, a)) > std::abs(w(k, b)); });
  }
  return ranks;
}

}  // namespace fbmp
