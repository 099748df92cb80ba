#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cgnf {

enum class VariableKind { Continuous, Discrete };

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::Continuous;
  /// Discrete only: sorted integer levels the variable may take.
  std::vector<long> support;
};

/// Immutable causal skeleton: variables in declaration order, a parent map,
/// and a topological order with ties broken by declaration order.
class Dag {
 public:
  Dag() = default;  // empty graph
  Dag(std::vector<VariableSpec> variables,
      std::map<std::string, std::set<std::string>> parents);

  const std::vector<VariableSpec>& variables() const { return variables_; }
  const std::set<std::string>& parents(const std::string& name) const;
  const std::vector<std::string>& topo_order() const { return topo_order_; }

  std::size_t size() const { return variables_.size(); }
  bool has_variable(const std::string& name) const;
  /// Index into variables() (declaration order). Throws UnknownVariable.
  std::size_t index_of(const std::string& name) const;
  const VariableSpec& variable(const std::string& name) const;

  /// True when `ancestor` is reachable from above `name` via parent edges.
  bool is_ancestor(const std::string& ancestor, const std::string& name) const;

 private:
  std::vector<VariableSpec> variables_;
  std::map<std::string, std::set<std::string>> parents_;
  std::vector<std::string> topo_order_;
  std::map<std::string, std::size_t> index_;
};

enum class DagFormat { EdgeList, AdjacencyMatrix };

/// Parses a DAG description.
///
/// EdgeList: one or more "A -> B" pairs per line (comma separated), '#'
/// comments, bare names declare isolated variables. AdjacencyMatrix: CSV with
/// variable names as first row and column; a 1 in cell (r, c) makes the row
/// variable a parent of the column variable.
Dag parse_dag(const std::string& text, DagFormat format);

std::vector<std::string> topological_order(const Dag& dag);

/// Removes all incoming edges to each target; everything else is unchanged.
Dag mutilate(const Dag& dag, const std::set<std::string>& targets);

/// How one regime fixes (or not) a single variable.
struct Assignment {
  enum class Kind { Natural, Fixed, FromRegime } kind = Kind::Natural;
  double value = 0.0;       // Fixed: on the data scale
  std::string regime_ref;   // FromRegime: label of the source regime
  static Assignment natural() { return {}; }
  static Assignment fixed(double v) { return {Kind::Fixed, v, {}}; }
  static Assignment from_regime(std::string label) {
    return {Kind::FromRegime, 0.0, std::move(label)};
  }
};

/// One interventional world: variables not listed are Natural.
struct Regime {
  std::map<std::string, Assignment> assignments;
  Assignment assignment_for(const std::string& name) const {
    auto it = assignments.find(name);
    return it == assignments.end() ? Assignment::natural() : it->second;
  }
};

}  // namespace cgnf
