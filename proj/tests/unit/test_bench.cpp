#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cgnf/bench.hpp"
#include "cgnf/errors.hpp"

using namespace cgnf;

namespace {

FlowConfig tiny_flow() {
  FlowConfig config;
  config.embedding_hidden = {16};
  config.embedding_width = 4;
  config.integrand_hidden = {16};
  config.quadrature_nodes = 16;
  return config;
}

double column_mean(const Eigen::VectorXd& v) { return v.mean(); }

}  // namespace

TEST_CASE("linear model: sample moments match the structural equations") {
  const std::size_t n = 1000000;
  Dataset ds = simulate_dgm(DgmKind::LinearGaussian, n, 3);
  const double tol = 4.0 / std::sqrt(static_cast<double>(n));
  // All structural means are zero by construction.
  for (int c = 0; c < 5; ++c) CHECK(std::abs(column_mean(ds.values.col(c))) < 4 * tol);
  // E[A] = 0, Var(A) = 1 + 0.01 etc.; spot-check a covariance: cov(C, A) = 0.1.
  const double cov_ca =
      (ds.values.col(0).array() * ds.values.col(1).array()).mean();
  CHECK(std::abs(cov_ca - 0.1) < 5 * tol);
}

TEST_CASE("discrete model: columns stay on their support") {
  Dataset ds = simulate_dgm(DgmKind::DiscreteNonAdditive, 20000, 5);
  for (Eigen::Index r = 0; r < ds.values.rows(); ++r) {
    const double c = ds.values(r, 0), a = ds.values(r, 1), l = ds.values(r, 2);
    CHECK((c == 1.0 || c == 2.0 || c == 3.0));
    CHECK((a == 0.0 || a == 1.0));
    CHECK((l == 1.0 || l == 2.0 || l == 3.0));
    CHECK((ds.values(r, 3) == 0.0 || ds.values(r, 3) == 1.0));
    CHECK((ds.values(r, 4) == 0.0 || ds.values(r, 4) == 1.0));
  }
  // P(C = 2) = 0.5.
  const double p2 =
      (ds.values.col(0).array() == 2.0).cast<double>().mean();
  CHECK(std::abs(p2 - 0.5) < 0.02);
}

TEST_CASE("nonlinear model: conditional spread of Y grows with |C|") {
  Dataset ds = simulate_dgm(DgmKind::NonlinearHeteroskedastic, 400000, 7);
  // Bin |C| and compare the spread of the Y residual noise proxy across bins.
  std::vector<double> lo_bin, hi_bin;
  for (Eigen::Index r = 0; r < ds.values.rows(); ++r) {
    const double c = std::abs(ds.values(r, 0));
    const double y = ds.values(r, 4);
    if (c < 0.25) lo_bin.push_back(y);
    if (c > 1.5 && c < 2.5) hi_bin.push_back(y);
  }
  auto sd = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / v.size());
  };
  REQUIRE(lo_bin.size() > 1000);
  REQUIRE(hi_bin.size() > 1000);
  CHECK(sd(hi_bin) > sd(lo_bin));
}

TEST_CASE("dgm rejects n = 0") {
  CHECK_THROWS_AS(simulate_dgm(DgmKind::LinearGaussian, 0, 1), Error);
}

TEST_CASE("linear ground truths match path tracing") {
  CHECK(ground_truth(DgmKind::LinearGaussian, BenchEstimand::AteAtoM).value ==
        doctest::Approx(0.15).epsilon(1e-12));
  CHECK(ground_truth(DgmKind::LinearGaussian, BenchEstimand::NdeAtoM).value ==
        doctest::Approx(0.10).epsilon(1e-12));
  CHECK(ground_truth(DgmKind::LinearGaussian, BenchEstimand::NieAtoLtoM).value ==
        doctest::Approx(0.05).epsilon(1e-12));
  CHECK(ground_truth(DgmKind::LinearGaussian, BenchEstimand::AteAtoY).value ==
        doctest::Approx(0.1875).epsilon(1e-12));
  CHECK(ground_truth(DgmKind::LinearGaussian, BenchEstimand::PseDirectAtoY).value ==
        doctest::Approx(0.10).epsilon(1e-12));
  CHECK(ground_truth(DgmKind::LinearGaussian, BenchEstimand::PseViaLtoY).value ==
        doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(ground_truth(DgmKind::LinearGaussian, BenchEstimand::PseViaMtoY).value ==
        doctest::Approx(0.025).epsilon(1e-12));
}

TEST_CASE("linear ground truths agree with a 1e7-draw oracle") {
  for (auto e : all_bench_estimands()) {
    const double analytic = ground_truth(DgmKind::LinearGaussian, e).value;
    const double mc = mc_oracle(DgmKind::LinearGaussian, e, 10000000, 11);
    CHECK(std::abs(analytic - mc) < 0.005);
  }
}

TEST_CASE("discrete enumeration is close to the published table") {
  // The published values round (or approximate) the exact enumeration; they
  // agree to within 0.006 on every estimand.
  const std::vector<std::pair<BenchEstimand, double>> table{
      {BenchEstimand::AteAtoY, .143},    {BenchEstimand::PseDirectAtoY, .109},
      {BenchEstimand::PseViaLtoY, .022}, {BenchEstimand::PseViaMtoY, .012},
      {BenchEstimand::AteAtoM, .113},    {BenchEstimand::NdeAtoM, .092},
      {BenchEstimand::NieAtoLtoM, .020}};
  for (const auto& [e, value] : table) {
    auto truth = ground_truth(DgmKind::DiscreteNonAdditive, e);
    CHECK(truth.source == TruthSource::Enumeration);
    CHECK(std::abs(truth.value - value) < 0.006);
  }
}

TEST_CASE("discrete enumeration telescopes exactly") {
  const double ate =
      ground_truth(DgmKind::DiscreteNonAdditive, BenchEstimand::AteAtoY).value;
  const double parts =
      ground_truth(DgmKind::DiscreteNonAdditive, BenchEstimand::PseDirectAtoY).value +
      ground_truth(DgmKind::DiscreteNonAdditive, BenchEstimand::PseViaLtoY).value +
      ground_truth(DgmKind::DiscreteNonAdditive, BenchEstimand::PseViaMtoY).value;
  CHECK(ate == doctest::Approx(parts).epsilon(1e-12));
}

TEST_CASE("discrete enumeration agrees with its own simulator") {
  for (auto e : {BenchEstimand::AteAtoY, BenchEstimand::AteAtoM,
                 BenchEstimand::NieAtoLtoM}) {
    const double enumerated =
        ground_truth(DgmKind::DiscreteNonAdditive, e).value;
    const double mc = mc_oracle(DgmKind::DiscreteNonAdditive, e, 10000000, 13);
    CHECK(std::abs(enumerated - mc) < 0.002);
  }
}

TEST_CASE("nonlinear truths reproduce the published table at 1e7 draws") {
  const std::vector<std::pair<BenchEstimand, double>> table{
      {BenchEstimand::AteAtoY, .325},    {BenchEstimand::PseDirectAtoY, .189},
      {BenchEstimand::PseViaLtoY, .085}, {BenchEstimand::PseViaMtoY, .051},
      {BenchEstimand::AteAtoM, .207},    {BenchEstimand::NdeAtoM, .127},
      {BenchEstimand::NieAtoLtoM, .080}};
  for (const auto& [e, value] : table) {
    const double mc = mc_oracle(DgmKind::NonlinearHeteroskedastic, e, 10000000, 17);
    CHECK(std::abs(mc - value) < 0.003);
  }
}

TEST_CASE("unsupported model name is rejected") {
  CHECK_THROWS_AS(dgm_kind_from_string("cubic"), Error);
}

TEST_CASE("coverage DGM matches its marginals") {
  Dataset ds = simulate_coverage_dgm(200000, 19);
  CHECK(std::abs(column_mean(ds.values.col(0)) - 0.6) < 0.01);
  // P(A=1) = 0.4 + 0.2 * 0.6 = 0.52.
  CHECK(std::abs(column_mean(ds.values.col(1)) - 0.52) < 0.01);
  // E[Y] = 0.2 * 0.52 + 0.4 * 0.6 = 0.344.
  CHECK(std::abs(column_mean(ds.values.col(2)) - 0.344) < 0.02);
}

TEST_CASE("desk-scale mce run aggregates bias and writes reports") {
  MceConfig config;
  config.flow = tiny_flow();
  config.train.learning_rate = 5e-4;
  config.train.patience_epochs = 5;
  config.train.max_epochs = 40;
  config.train.seed = 1;
  config.sample_count = 5000;
  config.seed = 23;
  MceReport report = run_mce(DgmKind::LinearGaussian, {400}, 2, config);
  REQUIRE(report.cells.size() == 7);
  for (const auto& cell : report.cells) {
    CHECK(cell.replications == 2);
    CHECK(std::isfinite(cell.bias));
    CHECK(std::isfinite(cell.sd));
  }

  const std::string csv = "/tmp/cgnf_mce_test.csv";
  const std::string plot = "/tmp/cgnf_mce_plot.csv";
  write_mce_csv(report, csv, "test-config");
  write_mce_plot_data(report, plot, "test-config");
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line.find("dgm=linear") != std::string::npos);
  std::getline(in, line);
  CHECK(line.find("config") != std::string::npos);
  std::getline(in, line);
  CHECK(line == "estimand,n,bias,sd,replications,truth,truth_source");
  std::filesystem::remove(csv);
  std::filesystem::remove(plot);
}

TEST_CASE("single replication reports SD as absent") {
  MceConfig config;
  config.flow = tiny_flow();
  config.train.learning_rate = 5e-4;
  config.train.patience_epochs = 5;
  config.train.max_epochs = 30;
  config.sample_count = 2000;
  config.seed = 29;
  MceReport report = run_mce(DgmKind::LinearGaussian, {400}, 1, config);
  for (const auto& cell : report.cells) {
    CHECK(cell.replications == 1);
    CHECK(std::isnan(cell.sd));
  }
}

TEST_CASE("mce replication seeds are deterministic") {
  MceConfig config;
  config.flow = tiny_flow();
  config.train.learning_rate = 5e-4;
  config.train.patience_epochs = 5;
  config.train.max_epochs = 30;
  config.sample_count = 2000;
  config.seed = 31;
  MceReport a = run_mce(DgmKind::LinearGaussian, {400}, 2, config);
  MceReport b = run_mce(DgmKind::LinearGaussian, {400}, 2, config);
  auto same = [](double x, double y) {
    return x == y || (std::isnan(x) && std::isnan(y));
  };
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(same(a.cells[i].bias, b.cells[i].bias));
    CHECK(same(a.cells[i].sd, b.cells[i].sd));
  }
}

TEST_CASE("hyper-sweep variants modify the right knob") {
  FlowConfig flow = tiny_flow();
  TrainConfig train;
  auto v1 = make_variant("default", flow, train);
  CHECK(v1.flow.embedding_hidden == flow.embedding_hidden);
  auto v2 = make_variant("default - one hidden layer", flow, train);
  CHECK(v2.flow.embedding_hidden.size() == flow.embedding_hidden.size() - 1);
  CHECK(v2.flow.integrand_hidden.size() == flow.integrand_hidden.size() - 1);
  auto v3 = make_variant("default - 1/4 of nodes", flow, train);
  CHECK(v3.flow.embedding_hidden[0] == 12);  // 16 * 0.75
  auto v4 = make_variant("batch size of 512", flow, train);
  CHECK(v4.train.batch_size == 512);
  CHECK(v4.flow.embedding_hidden == flow.embedding_hidden);
  auto v5 = make_variant("learning rate of 0.001", flow, train);
  CHECK(v5.train.learning_rate == 0.001);
  CHECK_THROWS_AS(make_variant("bogus", flow, train), Error);
}

TEST_CASE("empty variant list runs the default only") {
  MceConfig config;
  config.flow = tiny_flow();
  config.train.patience_epochs = 2;
  config.train.max_epochs = 3;
  config.sample_count = 1000;
  config.seed = 37;
  auto reports = run_hyper_sweep(DgmKind::LinearGaussian, {}, 150, 1, config);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].first == "default");
  CHECK(reports[0].second.cells.size() == 7);
}
