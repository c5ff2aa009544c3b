#include "fbmp/networks.hpp"

#include <cmath>

#include "fbmp/errors.hpp"

namespace fbmp {

namespace {

Eigen::Map<Eigen::VectorXd> flat(Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
Eigen::Map<Eigen::VectorXd> flat(Eigen::VectorXd& v) { return {v.data(), v.size()}; }

void add_layers(std::vector<TensorView>& out, std::vector<DenseLayer>& layers, const std::string& prefix) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.push_back({prefix + std::to_string(l) + ".weight", flat(layers[l].weight)});
    out.push_back({prefix + std::to_string(l) + ".bias", flat(layers[l].bias)});
  }
}

DenseLayer glorot(Eigen::Index out, Eigen::Index in, Rng& rng) {
  DenseLayer layer;
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  layer.weight.resize(out, in);
  // Fill row by row so the draw order does not depend on storage order.
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
  }
  layer.bias = Eigen::VectorXd::Zero(out);
  return layer;
}

// Forward through the regular tanh layers. acts[0] is the input, acts[l+1] the post-dropout
// output of layer l; tanh_out[l] keeps the pre-dropout activation for backprop.
struct HiddenPass {
  std::vector<Eigen::MatrixXd> acts;
  std::vector<Eigen::MatrixXd> tanh_out;
  std::vector<Eigen::MatrixXd> masks;  // scaled keep masks, empty when dropout is off
};

HiddenPass hidden_forward(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& x,
                          const DropoutSpec& dropout) {
  HiddenPass pass;
  pass.acts.reserve(layers.size() + 1);
  pass.acts.push_back(x);
  for (const auto& layer : layers) {
    if (layer.weight.cols() != pass.acts.back().rows()) throw ValidationError("network: input dimension mismatch");
    Eigen::MatrixXd z = layer.weight * pass.acts.back();
    z.colwise() += layer.bias;
    Eigen::MatrixXd h = z.array().tanh().matrix();
    if (dropout.active()) {
      const double keep = 1.0 - dropout.rate;
      Eigen::MatrixXd mask(h.rows(), h.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c) {
        for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = dropout.rng->uniform() < keep ? 1.0 / keep : 0.0;
      }
      pass.tanh_out.push_back(h);
      pass.acts.push_back(h.cwiseProduct(mask));
      pass.masks.push_back(std::move(mask));
    } else {
      pass.tanh_out.push_back(h);
      pass.acts.push_back(std::move(h));
    }
  }
  return pass;
}

// Backprop from dL/d(acts.back()) through the regular layers, filling grads.
void hidden_backward(const std::vector<DenseLayer>& layers, const HiddenPass& pass, Eigen::MatrixXd d_act,
                     std::vector<DenseLayer>& grads) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (!pass.masks.empty()) d_act = d_act.cwiseProduct(pass.masks[l]);
    const Eigen::MatrixXd dz = d_act.cwiseProduct((1.0 - pass.tanh_out[l].array().square()).matrix());
    grads[l].weight.noalias() = dz * pass.acts[l].transpose();
    grads[l].bias = dz.rowwise().sum();
    if (l > 0) d_act.noalias() = layers[l].weight.transpose() * dz;
  }
}

Eigen::MatrixXd ffnn_input(const FfnnParams& net, const NetworkBatch& batch) {
  if (!net.phase_inputs) return batch.x;
  if (batch.p.size() != batch.x.cols() || batch.u.size() != batch.x.cols()) {
    throw ValidationError("ffnn: phase inputs missing from batch");
  }
  Eigen::MatrixXd in(batch.x.rows() + 2, batch.x.cols());
  in.topRows(batch.x.rows()) = batch.x;
  in.row(batch.x.rows()) = batch.p;
  in.row(batch.x.rows() + 1) = batch.u;
  return in;
}

Eigen::RowVectorXd pmnn_batch(const PmnnParams& net, const NetworkBatch& batch, const DropoutSpec& dropout,
                              HiddenPass* pass_out, Eigen::MatrixXd* m_out) {
  HiddenPass pass = hidden_forward(net.hidden, batch.x, dropout);
  const Eigen::MatrixXd& h = pass.acts.back();
  if (net.modulated.weight.cols() != h.rows()) throw ValidationError("pmnn: modulated layer dimension mismatch");
  if (batch.g.rows() != net.kernels() || batch.g.cols() != batch.x.cols()) {
    throw ValidationError("pmnn: modulation matrix does not match the kernel count");
  }
  Eigen::MatrixXd z = net.modulated.weight * h;
  z.colwise() += net.modulated.bias;
  Eigen::MatrixXd m = batch.g.cwiseProduct(z);
  Eigen::RowVectorXd c = net.output.transpose() * m;
  if (pass_out) *pass_out = std::move(pass);
  if (m_out) *m_out = std::move(m);
  return c;
}

Eigen::RowVectorXd ffnn_batch(const FfnnParams& net, const NetworkBatch& batch, const DropoutSpec& dropout,
                              HiddenPass* pass_out) {
  HiddenPass pass = hidden_forward(net.hidden, ffnn_input(net, batch), dropout);
  const Eigen::MatrixXd& h = pass.acts.back();
  if (net.output.size() != h.rows()) throw ValidationError("ffnn: output layer dimension mismatch");
  Eigen::RowVectorXd c = net.output.transpose() * h;
  c.array() += net.output_bias[0];
  if (pass_out) *pass_out = std::move(pass);
  return c;
}

}  // namespace

std::vector<TensorView> PmnnParams::tensors() {
  std::vector<TensorView> out;
  add_layers(out, hidden, "hidden");
  out.push_back({"modulated.weight", flat(modulated.weight)});
  out.push_back({"modulated.bias", flat(modulated.bias)});
  out.push_back({"output.weight", flat(output)});
  return out;
}

Eigen::Index FfnnParams::input_dim() const {
  const Eigen::Index raw = hidden.empty() ? output.size() : hidden.front().weight.cols();
  return phase_inputs ? raw - 2 : raw;
}

std::vector<TensorView> FfnnParams::tensors() {
  std::vector<TensorView> out;
  add_layers(out, hidden, "hidden");
  out.push_back({"output.weight", flat(output)});
  out.push_back({"output.bias", flat(output_bias)});
  return out;
}

std::vector<TensorView> tensors(Network& net) {
  return std::visit([](auto& n) { return n.tensors(); }, net);
}

Network zeros_like(const Network& net) {
  Network out = net;
  for (auto& t : tensors(out)) t.data.setZero();
  return out;
}

PmnnParams init_pmnn(Eigen::Index input_dim, const std::vector<int>& hidden, Eigen::Index kernels, Rng& rng) {
  if (input_dim < 1 || kernels < 1) throw ValidationError("init_pmnn: dimensions must be positive");
  PmnnParams net;
  Eigen::Index in = input_dim;
  for (int width : hidden) {
    if (width < 1) throw ValidationError("init_pmnn: hidden width must be positive");
    net.hidden.push_back(glorot(width, in, rng));
    in = width;
  }
  net.modulated = glorot(kernels, in, rng);
  const double limit = std::sqrt(6.0 / static_cast<double>(kernels + 1));
  net.output.resize(kernels);
  for (Eigen::Index i = 0; i < kernels; ++i) net.output[i] = rng.uniform(-limit, limit);
  return net;
}

FfnnParams init_ffnn(Eigen::Index input_dim, const std::vector<int>& hidden, bool phase_inputs, Rng& rng) {
  if (input_dim < 1) throw ValidationError("init_ffnn: input dimension must be positive");
  FfnnParams net;
  net.phase_inputs = phase_inputs;
  Eigen::Index in = input_dim + (phase_inputs ? 2 : 0);
  for (int width : hidden) {
    if (width < 1) throw ValidationError("init_ffnn: hidden width must be positive");
    net.hidden.push_back(glorot(width, in, rng));
    in = width;
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(in + 1));
  net.output.resize(in);
  for (Eigen::Index i = 0; i < in; ++i) net.output[i] = rng.uniform(-limit, limit);
  net.output_bias = Eigen::VectorXd::Zero(1);
  return net;
}

Eigen::MatrixXd modulation_matrix(const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& u,
                                  const PhaseKernelBank& bank) {
  if (p.size() != u.size()) throw ValidationError("modulation_matrix: p/u length mismatch");
  Eigen::MatrixXd g(static_cast<Eigen::Index>(bank.size()), p.size());
  for (Eigen::Index b = 0; b < p.size(); ++b) g.col(b) = phase_modulation({p[b], u[b]}, bank);
  return g;
}

Eigen::RowVectorXd forward(const Network& net, const NetworkBatch& batch) {
  const DropoutSpec off;
  if (const auto* pm = std::get_if<PmnnParams>(&net)) return pmnn_batch(*pm, batch, off, nullptr, nullptr);
  return ffnn_batch(std::get<FfnnParams>(net), batch, off, nullptr);
}

double pmnn_gradient(const PmnnParams& net, const NetworkBatch& batch, const DropoutSpec& dropout, PmnnParams& grad) {
  if (batch.size() == 0) throw ValidationError("pmnn_gradient: empty batch");
  HiddenPass pass;
  Eigen::MatrixXd m;
  const Eigen::RowVectorXd c = pmnn_batch(net, batch, dropout, &pass, &m);
  const Eigen::RowVectorXd err = c - batch.target;
  const double n = static_cast<double>(batch.size());
  const Eigen::RowVectorXd dc = err / n;

  grad.hidden.resize(net.hidden.size());
  grad.output.noalias() = m * dc.transpose();
  const Eigen::MatrixXd dz = (net.output * dc).cwiseProduct(batch.g);
  grad.modulated.weight.noalias() = dz * pass.acts.back().transpose();
  grad.modulated.bias = dz.rowwise().sum();
  if (!net.hidden.empty()) {
    hidden_backward(net.hidden, pass, net.modulated.weight.transpose() * dz, grad.hidden);
  }
  return 0.5 * err.squaredNorm() / n;
}

double ffnn_gradient(const FfnnParams& net, const NetworkBatch& batch, const DropoutSpec& dropout, FfnnParams& grad) {
  if (batch.size() == 0) throw ValidationError("ffnn_gradient: empty batch");
  HiddenPass pass;
  const Eigen::RowVectorXd c = ffnn_batch(net, batch, dropout, &pass);
  const Eigen::RowVectorXd err = c - batch.target;
  const double n = static_cast<double>(batch.size());
  const Eigen::RowVectorXd dc = err / n;

  grad.phase_inputs = net.phase_inputs;
  grad.hidden.resize(net.hidden.size());
  grad.output.noalias() = pass.acts.back() * dc.transpose();
  grad.output_bias = Eigen::VectorXd::Constant(1, dc.sum());
  if (!net.hidden.empty()) hidden_backward(net.hidden, pass, net.output * dc, grad.hidden);
  return 0.5 * err.squaredNorm() / n;
}

double loss_and_gradient(const Network& net, const NetworkBatch& batch, const DropoutSpec& dropout, Network& grad) {
  if (const auto* pm = std::get_if<PmnnParams>(&net)) {
    if (!std::holds_alternative<PmnnParams>(grad)) grad = PmnnParams{};
    return pmnn_gradient(*pm, batch, dropout, std::get<PmnnParams>(grad));
  }
  if (!std::holds_alternative<FfnnParams>(grad)) grad = FfnnParams{};
  return ffnn_gradient(std::get<FfnnParams>(net), batch, dropout, std::get<FfnnParams>(grad));
}

double pmnn_forward(const PmnnParams& net, const Eigen::VectorXd& input, const PhaseState& phase,
                    const PhaseKernelBank& bank) {
  if (input.size() != net.input_dim()) throw ValidationError("pmnn_forward: input dimension mismatch");
  if (static_cast<Eigen::Index>(bank.size()) != net.kernels()) throw ValidationError("pmnn_forward: bank size mismatch");
  NetworkBatch batch;
  batch.x = input;
  batch.g = phase_modulation(phase, bank);
  return pmnn_batch(net, batch, {}, nullptr, nullptr)[0];
}

double ffnn_forward(const FfnnParams& net, const Eigen::VectorXd& input, const PhaseState& phase) {
  if (input.size() != net.input_dim()) throw ValidationError("ffnn_forward: input dimension mismatch");
  NetworkBatch batch;
  batch.x = input;
  batch.p = Eigen::RowVectorXd::Constant(1, phase.p);
  batch.u = Eigen::RowVectorXd::Constant(1, phase.u);
  return ffnn_batch(net, batch, {}, nullptr)[0];
}

}  // namespace fbmp
