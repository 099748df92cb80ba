#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cgnf/bench.hpp"
#include "cgnf/errors.hpp"
#include "cgnf/rng.hpp"
#include "cgnf/simulate.hpp"
#include "cgnf/train.hpp"

using namespace cgnf;

namespace {

std::string write_temp_csv(const std::string& content) {
  const std::string path = "/tmp/cgnf_test_data.csv";
  std::ofstream out(path, std::ios::trunc);
  out << content;
  out.close();
  return path;
}

FlowConfig tiny_flow() {
  FlowConfig config;
  config.embedding_hidden = {16};
  config.embedding_width = 4;
  config.integrand_hidden = {16};
  config.quadrature_nodes = 16;
  return config;
}

}  // namespace

TEST_CASE("load_csv parses numbers and infers kinds") {
  auto path = write_temp_csv("x,flag,score\n1.5,0,10\n2.5,1,20\n-0.25,1,30\n");
  Dataset ds = load_csv(path);
  REQUIRE(ds.row_count() == 3);
  REQUIRE(ds.column_count() == 3);
  CHECK(ds.values(0, 0) == 1.5);
  CHECK(ds.specs[0].kind == VariableKind::Continuous);
  CHECK(ds.specs[1].kind == VariableKind::Discrete);
  CHECK(ds.specs[1].support == std::vector<long>{0, 1});
  CHECK(ds.specs[2].kind == VariableKind::Discrete);  // 3 integer levels
  std::filesystem::remove(path);
}

TEST_CASE("load_csv rejects non-numeric cells") {
  auto path = write_temp_csv("a,b\n1,2\n3,NA\n");
  CHECK_THROWS_AS(load_csv(path), NonNumericCell);
  std::filesystem::remove(path);
}

TEST_CASE("load_csv reports ragged rows") {
  auto path = write_temp_csv("a,b\n1,2\n3\n");
  CHECK_THROWS_AS(load_csv(path), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("many-level integer columns stay continuous") {
  Eigen::MatrixXd values(40, 1);
  for (int i = 0; i < 40; ++i) values(i, 0) = i;
  Dataset ds = dataset_from_matrix({"n"}, values);
  CHECK(ds.specs[0].kind == VariableKind::Continuous);
}

TEST_CASE("dequantize adds N(0, 1/36) noise deterministically") {
  Eigen::VectorXd column = Eigen::VectorXd::Zero(100000);
  Eigen::VectorXd a = dequantize(column, 11, 0);
  Eigen::VectorXd b = dequantize(column, 11, 0);
  CHECK((a.array() == b.array()).all());
  Eigen::VectorXd c = dequantize(column, 11, 1);
  CHECK(!(a.array() == c.array()).all());

  const double mean = a.mean();
  const double var = (a.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.005);
  CHECK(std::abs(var - 1.0 / 36.0) < 0.001);
}

TEST_CASE("requantize recovers nearly all dequantized cells") {
  // 3 sigma = 0.5, so rounding recovers the level ~99.73% of the time.
  const int n = 1000000;
  Eigen::VectorXd column(n);
  Rng rng(5);
  for (int i = 0; i < n; ++i)
    column[i] = static_cast<long>(rng.uniform01() * 3);  // levels 0..2
  Eigen::VectorXd noisy = dequantize(column, 1, 0);
  Eigen::VectorXd back = requantize(noisy, {0, 1, 2});
  int matches = 0;
  for (int i = 0; i < n; ++i) matches += back[i] == column[i];
  CHECK(static_cast<double>(matches) / n >= 0.99);
  CHECK(static_cast<double>(matches) / n <= 0.9999);
}

TEST_CASE("requantize rounds then clamps to support") {
  Eigen::VectorXd v(5);
  v << 0.4, -0.7, 2.0, 7.3, 1.49;
  Eigen::VectorXd out = requantize(v, {0, 1, 2});
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);  // rounds to -1, clamps up
  CHECK(out[2] == 2.0);  // exact level unchanged
  CHECK(out[3] == 2.0);  // clamps down
  CHECK(out[4] == 1.0);
}

TEST_CASE("standardize z-scores and round-trips") {
  Eigen::MatrixXd m(4, 2);
  m << 1, 10, 2, 20, 3, 30, 4, 40;
  Eigen::MatrixXd orig = m;
  PreprocessInfo info = standardize(m, {"a", "b"});
  for (int c = 0; c < 2; ++c) {
    CHECK(std::abs(m.col(c).mean()) < 1e-12);
    CHECK(std::abs((m.col(c).array()).square().mean() - 1.0) < 1e-12);
    for (int r = 0; r < 4; ++r)
      CHECK(info.to_data(c, m(r, c)) == doctest::Approx(orig(r, c)).epsilon(1e-12));
  }
}

TEST_CASE("already standard columns are unchanged") {
  Eigen::MatrixXd m(2, 1);
  m << -1, 1;  // mean 0, population SD 1
  Eigen::MatrixXd orig = m;
  standardize(m, {"a"});
  CHECK((m - orig).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("constant columns are degenerate") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(5, 1, 3.0);
  CHECK_THROWS_AS(standardize(m, {"c"}), DegenerateColumn);
}

TEST_CASE("fit recovers a univariate normal") {
  // X ~ N(3, 4): inverse samples from the trained flow should reproduce the
  // moments. n is large enough that the sample's own deviation from the
  // population stays well inside the band.
  const int n = 20000;
  Rng rng(17);
  Eigen::MatrixXd values(n, 1);
  for (int i = 0; i < n; ++i) values(i, 0) = 3.0 + 2.0 * rng.normal();
  Dataset ds = dataset_from_matrix({"X"}, values);
  Dag dag = parse_dag("X", DagFormat::EdgeList);

  TrainConfig tc;
  tc.seed = 7;
  tc.batch_size = 128;
  tc.learning_rate = 1e-3;  // toy problem, converge fast
  tc.patience_epochs = 30;
  tc.max_epochs = 800;
  Cgnf init = make_cgnf(dag, tiny_flow(), 3);
  auto [model, history] = fit(init, ds, tc);

  Eigen::MatrixXd samples = sample_observational(model, 100000, 555);
  const double mean = samples.col(0).mean();
  const double sd = std::sqrt((samples.col(0).array() - mean).square().mean());
  CHECK(std::abs(mean - 3.0) < 0.05);
  CHECK(std::abs(sd - 2.0) < 0.05);
  CHECK(history.warnings.empty());  // lr = 0.001 sits exactly on the limit
}

TEST_CASE("fit is deterministic per seed") {
  Dataset ds = simulate_dgm(DgmKind::LinearGaussian, 400, 9);
  TrainConfig tc;
  tc.seed = 21;
  tc.batch_size = 64;
  tc.patience_epochs = 3;
  tc.max_epochs = 8;
  Cgnf init = make_cgnf(dgm_dag(), tiny_flow(), 4);
  auto [m1, h1] = fit(init, ds, tc);
  auto [m2, h2] = fit(init, ds, tc);
  REQUIRE(h1.train_loss.size() == h2.train_loss.size());
  for (std::size_t i = 0; i < h1.train_loss.size(); ++i) {
    CHECK(h1.train_loss[i] == h2.train_loss[i]);
    CHECK(h1.valid_loss[i] == h2.valid_loss[i]);
  }
  CHECK(model_hash(m1) == model_hash(m2));
}

TEST_CASE("training loss mostly decreases over the first epochs") {
  Dataset ds = simulate_dgm(DgmKind::LinearGaussian, 2000, 31);
  TrainConfig tc;
  tc.seed = 5;
  tc.patience_epochs = 10;
  tc.max_epochs = 5;
  Cgnf init = make_cgnf(dgm_dag(), tiny_flow(), 6);
  auto [model, history] = fit(init, ds, tc);
  REQUIRE(history.train_loss.size() == 5);
  int decreasing = 0;
  for (int i = 1; i < 5; ++i)
    decreasing += history.train_loss[i] < history.train_loss[i - 1];
  CHECK(decreasing >= 3);  // 4 of 5 steps in expectation; allow one slip
}

TEST_CASE("returned model has the best recorded validation loss") {
  Dataset ds = simulate_dgm(DgmKind::LinearGaussian, 600, 41);
  TrainConfig tc;
  tc.seed = 3;
  tc.patience_epochs = 5;
  tc.max_epochs = 40;
  Cgnf init = make_cgnf(dgm_dag(), tiny_flow(), 8);
  auto [model, history] = fit(init, ds, tc);

  double best = history.valid_loss[0];
  for (double v : history.valid_loss) best = std::min(best, v);
  CHECK(history.best_valid_loss == best);
  CHECK(history.valid_loss[history.best_epoch] == best);

  // Recompute the validation loss of the returned model: it must equal the
  // minimum, not the final epoch's value.
  auto [matrix, info] = preprocess_for_flow(ds, model.dag, tc.seed);
  const Eigen::Index n = matrix.cols();
  Rng split_rng = make_rng(tc.seed).derive("split");
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(split_rng.uniform01() * (i + 1));
    std::swap(order[i], order[j]);
  }
  Eigen::Index valid_n = static_cast<Eigen::Index>(
      std::llround(tc.validation_fraction * static_cast<double>(n)));
  valid_n = std::max<Eigen::Index>(1, std::min(valid_n, n - 1));
  Eigen::MatrixXd valid_set(matrix.rows(), valid_n);
  for (Eigen::Index i = 0; i < valid_n; ++i)
    valid_set.col(i) = matrix.col(order[n - valid_n + i]);
  const double recomputed = nll(model, valid_set).total / valid_n;
  CHECK(recomputed == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("validation split sizes match the configured fraction") {
  Dataset ds = simulate_dgm(DgmKind::LinearGaussian, 501, 43);
  TrainConfig tc;
  tc.seed = 1;
  tc.max_epochs = 1;
  tc.patience_epochs = 1;
  std::ostringstream log;
  tc.log = &log;
  Cgnf init = make_cgnf(dgm_dag(), tiny_flow(), 2);
  auto [model, history] = fit(init, ds, tc);
  CHECK(history.train_loss.size() == 1);
  // 20% of 501 = 100.2; within one row.
  // (exposed indirectly: training ran on n - valid rows; check via log line)
  CHECK(log.str().substr(0, 2) == "0,");
}

TEST_CASE("missing data column is reported") {
  Dataset ds = simulate_dgm(DgmKind::LinearGaussian, 100, 47);
  Dag dag = parse_dag("C -> A, C -> Q, A -> Q", DagFormat::EdgeList);
  TrainConfig tc;
  tc.max_epochs = 1;
  Cgnf init = make_cgnf(dag, tiny_flow(), 1);
  CHECK_THROWS_AS(fit(init, ds, tc), MissingColumn);
}

TEST_CASE("fit warns on out-of-range batch size") {
  Dataset ds = simulate_dgm(DgmKind::LinearGaussian, 300, 53);
  TrainConfig tc;
  tc.batch_size = 32;
  tc.max_epochs = 2;
  tc.patience_epochs = 2;
  Cgnf init = make_cgnf(dgm_dag(), tiny_flow(), 1);
  auto [model, history] = fit(init, ds, tc);
  REQUIRE(history.warnings.size() == 1);
  CHECK(history.warnings[0].find("batch_size") != std::string::npos);
}

TEST_CASE("invalid validation fraction is rejected") {
  Dataset ds = simulate_dgm(DgmKind::LinearGaussian, 100, 59);
  TrainConfig tc;
  tc.validation_fraction = 1.5;
  Cgnf init = make_cgnf(dgm_dag(), tiny_flow(), 1);
  CHECK_THROWS_AS(fit(init, ds, tc), Error);
}
