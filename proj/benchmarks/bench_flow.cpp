#include <benchmark/benchmark.h>

#include "cgnf/flow.hpp"
#include "cgnf/graph.hpp"
#include "cgnf/rng.hpp"

namespace {

cgnf::Cgnf paper_scale_flow() {
  auto dag = cgnf::parse_dag(
      "C -> A, C -> L, C -> M, C -> Y\n"
      "A -> L, A -> M, A -> Y\n"
      "L -> M, L -> Y\nM -> Y\n",
      cgnf::DagFormat::EdgeList);
  cgnf::FlowConfig config;  // default 100..60 / 60..20 architecture
  return cgnf::make_cgnf(dag, config, 11);
}

void BM_LossGradientsBatch128(benchmark::State& state) {
  auto cgnf = paper_scale_flow();
  Eigen::MatrixXd batch = Eigen::MatrixXd::Random(5, 128);
  auto grads = cgnf::zero_gradients(cgnf);
  for (auto _ : state) {
    for (auto& g : grads.normalizers) g.set_zero();
    auto loss = cgnf::loss_gradients(cgnf, batch, grads);
    benchmark::DoNotOptimize(loss.total);
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_LossGradientsBatch128);

void BM_InvertNormalizer(benchmark::State& state) {
  auto cgnf = paper_scale_flow();
  const auto& norm = cgnf.normalizers.back();
  const int j_count = static_cast<int>(state.range(0));
  cgnf::Rng rng(3);
  Eigen::VectorXd z(j_count);
  Eigen::MatrixXd parents(norm.parent_count(), j_count);
  for (int j = 0; j < j_count; ++j) {
    z[j] = rng.normal();
    for (int p = 0; p < norm.parent_count(); ++p) parents(p, j) = rng.normal();
  }
  for (auto _ : state) {
    auto v = cgnf::invert_normalizer_batch(norm, z, parents);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetItemsProcessed(state.iterations() * j_count);
}
BENCHMARK(BM_InvertNormalizer)->Arg(256)->Arg(2048)->Arg(8192);

}  // namespace
