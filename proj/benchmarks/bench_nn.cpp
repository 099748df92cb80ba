#include <benchmark/benchmark.h>

#include "cgnf/nn.hpp"

namespace {

cgnf::DenseNet integrand_net() {
  return cgnf::init_network({11, 60, 50, 40, 30, 20, 1},
                            cgnf::OutputActivation::EluPlus, 7);
}

void BM_ForwardBatch(benchmark::State& state) {
  const auto net = integrand_net();
  Eigen::MatrixXd input = Eigen::MatrixXd::Random(11, state.range(0));
  for (auto _ : state) {
    auto out = cgnf::forward(net, input);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBatch)->Arg(128)->Arg(1024)->Arg(4096)->Arg(32768);

void BM_ForwardBackwardBatch(benchmark::State& state) {
  const auto net = integrand_net();
  Eigen::MatrixXd input = Eigen::MatrixXd::Random(11, state.range(0));
  Eigen::MatrixXd output_grad = Eigen::MatrixXd::Ones(1, state.range(0));
  for (auto _ : state) {
    cgnf::ForwardCache cache;
    auto out = cgnf::forward(net, input, &cache);
    auto grads = cgnf::zero_gradients(net);
    auto in_grad = cgnf::backward(net, cache, output_grad, grads);
    benchmark::DoNotOptimize(in_grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackwardBatch)->Arg(128)->Arg(1024)->Arg(4096);

}  // namespace
