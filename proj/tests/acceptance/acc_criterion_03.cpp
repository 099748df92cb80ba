// Flow bijectivity: |invert(forward(v)) - v| < 1e-6 across 1,000 random
// (v, parents) pairs on randomly initialized and trained normalizers.

#include <cmath>

#include "cgnf/bench.hpp"
#include "cgnf/flow.hpp"
#include "cgnf/rng.hpp"
#include "cgnf/train.hpp"
#include "support.hpp"

namespace {

std::size_t round_trip_failures(const cgnf::Normalizer& norm, int pairs,
                                cgnf::Rng& rng, double* worst) {
  Eigen::VectorXd v_true(pairs);
  Eigen::MatrixXd parents(norm.parent_count(), pairs);
  Eigen::RowVectorXd values(pairs);
  for (int i = 0; i < pairs; ++i) {
    v_true[i] = 3.5 * (2.0 * rng.uniform01() - 1.0);
    values[i] = v_true[i];
    for (int p = 0; p < norm.parent_count(); ++p) parents(p, i) = rng.normal();
  }
  Eigen::RowVectorXd z, ld;
  cgnf::normalizer_forward_batch(norm, values, parents, z, ld);
  Eigen::VectorXd v_back =
      cgnf::invert_normalizer_batch(norm, z.transpose(), parents);
  std::size_t failures = 0;
  for (int i = 0; i < pairs; ++i) {
    const double err = std::abs(v_back[i] - v_true[i]);
    *worst = std::max(*worst, err);
    if (err >= 1e-6) ++failures;
  }
  return failures;
}

}  // namespace

int main() {
  CriterionReport report{3};
  cgnf::Rng rng(20240303);
  double worst = 0.0;
  std::size_t failures = 0, pairs = 0;

  // 500 pairs on randomly initialized normalizers at the default
  // architecture (fresh nets, varying parent counts).
  for (int trial = 0; trial < 2; ++trial) {
    cgnf::Cgnf fresh =
        cgnf::make_cgnf(cgnf::dgm_dag(), cgnf::FlowConfig{}, 900 + trial);
    failures += round_trip_failures(fresh.normalizers[2 + trial], 250, rng,
                                    &worst);
    pairs += 250;
  }
  report.check(failures == 0,
               "randomly initialized normalizers: %zu/%zu pairs beyond 1e-6 "
               "(worst %.2e)",
               failures, pairs, worst);

  // 500 pairs on trained normalizers.
  cgnf::Dataset data = cgnf::simulate_dgm(cgnf::DgmKind::LinearGaussian, 4000, 31);
  cgnf::FlowConfig small;
  small.embedding_hidden = {16};
  small.embedding_width = 4;
  small.integrand_hidden = {16};
  small.quadrature_nodes = 16;
  cgnf::TrainConfig tc;
  tc.seed = 17;
  tc.learning_rate = 5e-4;
  tc.patience_epochs = 10;
  tc.max_epochs = 120;
  auto [model, history] = cgnf::fit(cgnf::make_cgnf(cgnf::dgm_dag(), small, 7),
                                    data, tc);
  double worst_trained = 0.0;
  std::size_t trained_failures = 0;
  for (int t = 1; t <= 2; ++t)
    trained_failures +=
        round_trip_failures(model.normalizers[t], 250, rng, &worst_trained);
  report.check(trained_failures == 0,
               "trained normalizers: %zu/500 pairs beyond 1e-6 (worst %.2e)",
               trained_failures, worst_trained);
  report.check(pairs + 500 == 1000, "1000 (v, parents) pairs in total");
  return report.finish();
}
