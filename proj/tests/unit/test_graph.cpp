#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "cgnf/errors.hpp"
#include "cgnf/graph.hpp"
#include "cgnf/rng.hpp"

using namespace cgnf;

namespace {

const char* kFig1 = "V1->V2, V1->V3, V2->V3, V2->V4, V3->V4";

bool topo_respects_parents(const Dag& dag) {
  const auto& order = dag.topo_order();
  auto pos = [&](const std::string& n) {
    return std::find(order.begin(), order.end(), n) - order.begin();
  };
  for (const auto& v : dag.variables())
    for (const auto& p : dag.parents(v.name))
      if (pos(p) >= pos(v.name)) return false;
  return true;
}

}  // namespace

TEST_CASE("edge list parse of the four-variable example") {
  Dag dag = parse_dag(kFig1, DagFormat::EdgeList);
  REQUIRE(dag.size() == 4);
  CHECK(dag.parents("V3") == std::set<std::string>{"V1", "V2"});
  CHECK(dag.parents("V4") == std::set<std::string>{"V2", "V3"});
  CHECK(dag.parents("V1").empty());
  CHECK(topo_respects_parents(dag));
}

TEST_CASE("self loop is a cycle") {
  CHECK_THROWS_AS(parse_dag("A -> A", DagFormat::EdgeList), CycleDetected);
}

TEST_CASE("two-cycle names the loop") {
  try {
    parse_dag("A -> B\nB -> A", DagFormat::EdgeList);
    FAIL("expected CycleDetected");
  } catch (const CycleDetected& e) {
    CHECK(std::string(e.what()).find("A") != std::string::npos);
    CHECK(std::string(e.what()).find("B") != std::string::npos);
  }
}

TEST_CASE("bare names declare isolated variables") {
  Dag dag = parse_dag("A\nB\n", DagFormat::EdgeList);
  REQUIRE(dag.size() == 2);
  CHECK(dag.parents("A").empty());
  CHECK(dag.parents("B").empty());
  CHECK(topo_respects_parents(dag));
}

TEST_CASE("comments and blank lines are ignored") {
  Dag dag = parse_dag("# comment\nA -> B  # trailing\n\nB -> C\n",
                      DagFormat::EdgeList);
  CHECK(dag.size() == 3);
  CHECK(dag.parents("C") == std::set<std::string>{"B"});
}

TEST_CASE("malformed line reports its number") {
  try {
    parse_dag("A -> B\nA -> \n", DagFormat::EdgeList);
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("topological order of the example graph") {
  Dag dag = parse_dag(kFig1, DagFormat::EdgeList);
  CHECK(topological_order(dag) ==
        std::vector<std::string>{"V1", "V2", "V3", "V4"});
}

TEST_CASE("one-variable order") {
  Dag dag = parse_dag("X", DagFormat::EdgeList);
  CHECK(topological_order(dag) == std::vector<std::string>{"X"});
}

TEST_CASE("ties broken by declaration order") {
  Dag dag = parse_dag("B\nC -> A\nA -> Y\n", DagFormat::EdgeList);
  CHECK(topological_order(dag) == std::vector<std::string>{"B", "C", "A", "Y"});
  // Exhaustive pair check: every parent precedes every child.
  CHECK(topo_respects_parents(dag));
}

TEST_CASE("mutilate removes incoming edges of targets only") {
  Dag dag = parse_dag(kFig1, DagFormat::EdgeList);
  Dag cut = mutilate(dag, {"V3"});
  CHECK(cut.parents("V3").empty());
  CHECK(cut.parents("V2") == dag.parents("V2"));
  CHECK(cut.parents("V4") == dag.parents("V4"));
}

TEST_CASE("mutilate with empty target set is the identity") {
  Dag dag = parse_dag(kFig1, DagFormat::EdgeList);
  Dag same = mutilate(dag, {});
  for (const auto& v : dag.variables())
    CHECK(same.parents(v.name) == dag.parents(v.name));
}

TEST_CASE("mutilating every variable gives an edgeless graph") {
  Dag dag = parse_dag(kFig1, DagFormat::EdgeList);
  Dag cut = mutilate(dag, {"V1", "V2", "V3", "V4"});
  for (const auto& v : cut.variables()) CHECK(cut.parents(v.name).empty());
}

TEST_CASE("mutilate is idempotent") {
  Dag dag = parse_dag(kFig1, DagFormat::EdgeList);
  Dag once = mutilate(dag, {"V3", "V4"});
  Dag twice = mutilate(once, {"V3", "V4"});
  for (const auto& v : dag.variables())
    CHECK(once.parents(v.name) == twice.parents(v.name));
}

TEST_CASE("mutilate rejects unknown targets") {
  Dag dag = parse_dag(kFig1, DagFormat::EdgeList);
  CHECK_THROWS_AS(mutilate(dag, {"Q"}), UnknownVariable);
}

TEST_CASE("adjacency matrix agrees with the edge list") {
  const char* matrix =
      ",V1,V2,V3,V4\n"
      "V1,0,1,1,0\n"
      "V2,0,0,1,1\n"
      "V3,0,0,0,1\n"
      "V4,0,0,0,0\n";
  Dag a = parse_dag(matrix, DagFormat::AdjacencyMatrix);
  Dag b = parse_dag(kFig1, DagFormat::EdgeList);
  REQUIRE(a.size() == b.size());
  for (const auto& v : b.variables())
    CHECK(a.parents(v.name) == b.parents(v.name));
}

TEST_CASE("adjacency matrix rejects duplicate names") {
  CHECK_THROWS_AS(
      parse_dag(",A,A\nA,0,0\nA,0,0\n", DagFormat::AdjacencyMatrix),
      DuplicateVariable);
}

TEST_CASE("adjacency matrix rejects bad cells") {
  CHECK_THROWS_AS(
      parse_dag(",A,B\nA,0,2\nB,0,0\n", DagFormat::AdjacencyMatrix),
      MalformedLine);
}

TEST_CASE("random DAGs always topo-sort with parents first") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform01() * 6);
    std::string text;
    for (int i = 0; i < k; ++i) text += "N" + std::to_string(i) + "\n";
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        if (rng.uniform01() < 0.4)
          text += "N" + std::to_string(i) + " -> N" + std::to_string(j) + "\n";
    Dag dag = parse_dag(text, DagFormat::EdgeList);
    CHECK(topo_respects_parents(dag));
  }
}

TEST_CASE("is_ancestor walks transitive parents") {
  Dag dag = parse_dag(kFig1, DagFormat::EdgeList);
  CHECK(dag.is_ancestor("V1", "V4"));
  CHECK(dag.is_ancestor("V2", "V3"));
  CHECK(!dag.is_ancestor("V4", "V1"));
  CHECK(!dag.is_ancestor("V3", "V2"));
}
