#include <benchmark/benchmark.h>

#include "fbmp/feedback.hpp"
#include "fbmp/networks.hpp"
#include "fbmp/primitives.hpp"
#include "fbmp/simulator.hpp"

using namespace fbmp;

namespace {

void BM_Compose(benchmark::State& state) {
  Rng rng(1);
  const UnitQuaternion a(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  UnitQuaternion b(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  for (auto _ : state) {
    b = compose(a, b);
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_Compose);

void BM_LogExp(benchmark::State& state) {
  Rng rng(2);
  UnitQuaternion q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  for (auto _ : state) {
    q = exp_map(log_map(q));
    benchmark::DoNotOptimize(q);
  }
}
BENCHMARK(BM_LogExp);

void BM_PmnnForwardSingle(benchmark::State& state) {
  Rng rng(3);
  const auto bank = default_kernel_bank(25, CanonicalParams::with_tau(4.0));
  const PmnnParams net = init_pmnn(38, {100}, 25, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(38);
  for (auto _ : state) benchmark::DoNotOptimize(pmnn_forward(net, x, {0.5, -0.4}, bank));
}
BENCHMARK(BM_PmnnForwardSingle);

void BM_PmnnTrainStep(benchmark::State& state) {
  Rng rng(4);
  const auto bank = default_kernel_bank(25, CanonicalParams::with_tau(4.0));
  std::vector<int> hidden;
  if (state.range(0) > 0) hidden.push_back(static_cast<int>(state.range(0)));
  Network net = init_pmnn(38, hidden, 25, rng);
  Network grad = zeros_like(net);
  NetworkBatch batch;
  batch.x = Eigen::MatrixXd::Random(38, 64);
  batch.p = Eigen::RowVectorXd::LinSpaced(64, 1.0, 0.01);
  batch.u = -Eigen::RowVectorXd::LinSpaced(64, 0.1, 2.0);
  batch.target = Eigen::RowVectorXd::Random(64);
  batch.g = modulation_matrix(batch.p, batch.u, bank);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(net, batch, {0.5, &rng}, grad));
}
BENCHMARK(BM_PmnnTrainStep)->Arg(0)->Arg(100);

void BM_QuaternionUnroll(benchmark::State& state) {
  QuaternionPrimitive prim;
  prim.canonical = CanonicalParams::with_tau(4.0);
  prim.bank = default_kernel_bank(25, prim.canonical, 1.0);
  prim.weights = Eigen::MatrixXd::Random(25, 3) * 50.0;
  prim.goal = axis_angle(Vec3::UnitY(), 0.3);
  prim.duration = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(unroll(prim, UnitQuaternion::identity(), {}, 0.01));
}
BENCHMARK(BM_QuaternionUnroll);

void BM_GenerateDemo(benchmark::State& state) {
  const SimulatorConfig cfg;
  const ContactModel contact = build_contact_model(cfg.channels, 7);
  int id = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_demo(cfg, contact, 10.0, id++));
}
BENCHMARK(BM_GenerateDemo);

}  // namespace

BENCHMARK_MAIN();
