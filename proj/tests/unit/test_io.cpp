#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "cgnf/errors.hpp"
#include "cgnf/flow.hpp"
#include "cgnf/io.hpp"

using namespace cgnf;

namespace {

Cgnf sample_model() {
  Dag dag = parse_dag("C -> A, C -> Y, A -> Y", DagFormat::EdgeList);
  FlowConfig config;
  config.embedding_hidden = {6, 5};
  config.embedding_width = 3;
  config.integrand_hidden = {7};
  config.quadrature_nodes = 16;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(3, 3);
  sigma(0, 2) = sigma(2, 0) = 0.25;
  Cgnf cgnf = make_cgnf(dag, config, 2024, sigma);
  cgnf.preprocess.mean = {0.6, 0.5, 0.44};
  cgnf.preprocess.stddev = {0.49, 0.5, 1.1};
  cgnf.preprocess.discrete = {true, true, false};
  cgnf.preprocess.support = {{0, 1}, {0, 1}, {}};
  return cgnf;
}

}  // namespace

TEST_CASE("model serialization round trip") {
  Cgnf model = sample_model();
  const auto bytes = serialize_model(model, 0xdeadbeef, "{\"seed\":1}");
  auto loaded = deserialize_model(bytes);

  CHECK(loaded.data_hash == 0xdeadbeef);
  CHECK(loaded.config_echo == "{\"seed\":1}");
  CHECK(loaded.cgnf.dag.topo_order() == model.dag.topo_order());
  CHECK(loaded.cgnf.preprocess.mean == model.preprocess.mean);
  CHECK(loaded.cgnf.preprocess.support[0] == std::vector<long>{0, 1});
  CHECK((loaded.cgnf.sigma_z - model.sigma_z).cwiseAbs().maxCoeff() == 0.0);

  // Bit-identical behavior after the round trip.
  Eigen::VectorXd row(3);
  row << 0.5, -0.25, 1.5;
  auto [z_a, ld_a] = flow_forward(model, row);
  auto [z_b, ld_b] = flow_forward(loaded.cgnf, row);
  CHECK((z_a.array() == z_b.array()).all());
  CHECK((ld_a.array() == ld_b.array()).all());
}

TEST_CASE("serialization is byte-stable") {
  Cgnf model = sample_model();
  const auto a = serialize_model(model, 7, "echo");
  const auto b = serialize_model(model, 7, "echo");
  CHECK(a == b);
}

TEST_CASE("corrupted files are rejected") {
  Cgnf model = sample_model();
  auto bytes = serialize_model(model, 7, "echo");
  bytes[bytes.size() / 2] ^= 0x40;
  CHECK_THROWS_AS(deserialize_model(bytes), Error);
  std::vector<std::uint8_t> junk{'n', 'o', 'p', 'e'};
  CHECK_THROWS_AS(deserialize_model(junk), Error);
}

TEST_CASE("save and load through a file") {
  const std::string path = "/tmp/cgnf_test_model.bin";
  Cgnf model = sample_model();
  save_model(model, path, 99, "cfg");
  auto loaded = load_model(path);
  CHECK(loaded.data_hash == 99);
  CHECK(model_hash(loaded.cgnf) == model_hash(model));
  std::filesystem::remove(path);
}

TEST_CASE("missing files raise FileNotFound") {
  CHECK_THROWS_AS(load_model("/tmp/does_not_exist_cgnf.bin"), FileNotFound);
  CHECK_THROWS_AS(hash_file("/tmp/does_not_exist_cgnf.bin"), FileNotFound);
}

TEST_CASE("fnv hash distinguishes content") {
  const std::uint8_t a[] = {1, 2, 3};
  const std::uint8_t b[] = {1, 2, 4};
  CHECK(fnv1a_64(a, 3) != fnv1a_64(b, 3));
}
