#include "cgnf/graph.hpp"

#include <algorithm>
#include <sstream>

#include "cgnf/errors.hpp"

namespace cgnf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Deterministic Kahn topological sort; among ready nodes the one declared
// first wins. On a cycle, reports one concrete cycle found by walking
// parents among the remaining nodes.
std::vector<std::string> compute_topo_order(
    const std::vector<VariableSpec>& variables,
    const std::map<std::string, std::set<std::string>>& parents) {
  std::map<std::string, std::size_t> remaining_in;
  for (const auto& v : variables)
    remaining_in[v.name] = parents.at(v.name).size();

  std::vector<std::string> order;
  std::vector<bool> placed(variables.size(), false);
  order.reserve(variables.size());
  while (order.size() < variables.size()) {
    bool advanced = false;
    for (std::size_t i = 0; i < variables.size(); ++i) {
      if (placed[i]) continue;
      if (remaining_in[variables[i].name] == 0) {
        placed[i] = true;
        order.push_back(variables[i].name);
        for (const auto& [child, ps] : parents)
          if (ps.count(variables[i].name)) --remaining_in[child];
        advanced = true;
        break;
      }
    }
    if (!advanced) {
      // Walk parent links among stuck nodes until a repeat closes the loop.
      std::string start;
      for (std::size_t i = 0; i < variables.size(); ++i)
        if (!placed[i]) { start = variables[i].name; break; }
      std::vector<std::string> path{start};
      std::set<std::string> seen{start};
      std::string cur = start;
      while (true) {
        std::string next;
        for (const auto& p : parents.at(cur)) {
          bool p_placed = false;
          // placed nodes cannot be on a cycle
          for (std::size_t i = 0; i < variables.size(); ++i)
            if (variables[i].name == p && placed[i]) p_placed = true;
          if (!p_placed) { next = p; break; }
        }
        if (seen.count(next)) {
          std::vector<std::string> cycle;
          auto it = std::find(path.begin(), path.end(), next);
          cycle.assign(it, path.end());
          cycle.push_back(next);
          std::reverse(cycle.begin(), cycle.end());
          std::string text;
          for (std::size_t i = 0; i < cycle.size(); ++i)
            text += (i ? " -> " : "") + cycle[i];
          throw CycleDetected(text);
        }
        seen.insert(next);
        path.push_back(next);
        cur = next;
      }
    }
  }
  return order;
}

}  // namespace

Dag::Dag(std::vector<VariableSpec> variables,
         std::map<std::string, std::set<std::string>> parents)
    : variables_(std::move(variables)), parents_(std::move(parents)) {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (index_.count(variables_[i].name))
      throw DuplicateVariable(variables_[i].name);
    index_[variables_[i].name] = i;
  }
  for (auto& v : variables_) parents_.try_emplace(v.name);
  for (const auto& [child, ps] : parents_) {
    if (!index_.count(child)) throw UnknownVariable(child);
    for (const auto& p : ps)
      if (!index_.count(p)) throw UnknownVariable(p);
  }
  for (const auto& v : variables_) {
    if (v.kind == VariableKind::Discrete) {
      if (!v.support.empty() &&
          !std::is_sorted(v.support.begin(), v.support.end(),
                          std::less_equal<long>()))
        throw Error("support of " + v.name + " must be strictly increasing");
    }
  }
  topo_order_ = compute_topo_order(variables_, parents_);
}

const std::set<std::string>& Dag::parents(const std::string& name) const {
  auto it = parents_.find(name);
  if (it == parents_.end()) throw UnknownVariable(name);
  return it->second;
}

bool Dag::has_variable(const std::string& name) const {
  return index_.count(name) > 0;
}

std::size_t Dag::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UnknownVariable(name);
  return it->second;
}

const VariableSpec& Dag::variable(const std::string& name) const {
  return variables_[index_of(name)];
}

bool Dag::is_ancestor(const std::string& ancestor,
                      const std::string& name) const {
  index_of(ancestor);
  std::vector<std::string> stack{name};
  std::set<std::string> seen;
  while (!stack.empty()) {
    std::string cur = stack.back();
    stack.pop_back();
    for (const auto& p : parents(cur)) {
      if (p == ancestor) return true;
      if (seen.insert(p).second) stack.push_back(p);
    }
  }
  return false;
}

namespace {

Dag parse_edge_list(const std::string& text) {
  std::vector<VariableSpec> variables;
  std::set<std::string> declared;
  std::map<std::string, std::set<std::string>> parents;
  auto declare = [&](const std::string& name) {
    if (declared.insert(name).second) {
      variables.push_back({name, VariableKind::Continuous, {}});
      parents.try_emplace(name);
    }
  };

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream items(line);
    std::string item;
    while (std::getline(items, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      const auto arrow = item.find("->");
      if (arrow == std::string::npos) {
        // bare name declares an isolated variable
        if (item.find_first_of(" \t<>") != std::string::npos)
          throw MalformedLine(line_no, "expected 'A -> B', got '" + item + "'");
        declare(item);
        continue;
      }
      const std::string from = trim(item.substr(0, arrow));
      const std::string to = trim(item.substr(arrow + 2));
      if (from.empty() || to.empty() ||
          to.find("->") != std::string::npos)
        throw MalformedLine(line_no, "expected 'A -> B', got '" + item + "'");
      declare(from);
      declare(to);
      parents[to].insert(from);
    }
  }
  return Dag(std::move(variables), std::move(parents));
}

Dag parse_adjacency_matrix(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> names;
  std::vector<VariableSpec> variables;
  std::map<std::string, std::set<std::string>> parents;

  // header: empty corner cell then column names
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  {
    std::stringstream cells(line);
    std::string cell;
    bool first = true;
    while (std::getline(cells, cell, ',')) {
      cell = trim(cell);
      if (first) {
        first = false;
        continue;
      }
      if (cell.empty()) throw MalformedLine(line_no, "empty column name");
      names.push_back(cell);
    }
  }
  if (names.empty()) throw MalformedLine(line_no, "no variables in header");
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size())
    throw DuplicateVariable("adjacency matrix header");
  for (const auto& n : names) {
    variables.push_back({n, VariableKind::Continuous, {}});
    parents.try_emplace(n);
  }

  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (row >= names.size())
      throw MalformedLine(line_no, "more rows than variables");
    std::stringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    const std::string row_name = trim(cell);
    if (row_name != names[row])
      throw MalformedLine(line_no, "row order must match header (expected '" +
                                       names[row] + "', got '" + row_name + "')");
    std::size_t col = 0;
    while (std::getline(cells, cell, ',')) {
      if (col >= names.size())
        throw MalformedLine(line_no, "more cells than variables");
      cell = trim(cell);
      if (cell == "1")
        parents[names[col]].insert(row_name);  // row causes column
      else if (cell != "0" && !cell.empty())
        throw MalformedLine(line_no, "cell must be 0 or 1, got '" + cell + "'");
      ++col;
    }
    if (col != names.size())
      throw MalformedLine(line_no, "expected " + std::to_string(names.size()) +
                                       " cells, got " + std::to_string(col));
    ++row;
  }
  if (row != names.size())
    throw MalformedLine(line_no, "expected one row per variable");
  return Dag(std::move(variables), std::move(parents));
}

}  // namespace

Dag parse_dag(const std::string& text, DagFormat format) {
  return format == DagFormat::EdgeList ? parse_edge_list(text)
                                       : parse_adjacency_matrix(text);
}

std::vector<std::string> topological_order(const Dag& dag) {
  return dag.topo_order();
}

Dag mutilate(const Dag& dag, const std::set<std::string>& targets) {
  for (const auto& t : targets)
    if (!dag.has_variable(t)) throw UnknownVariable(t);
  std::map<std::string, std::set<std::string>> parents;
  for (const auto& v : dag.variables())
    parents[v.name] = targets.count(v.name) ? std::set<std::string>{}
                                            : dag.parents(v.name);
  return Dag(dag.variables(), std::move(parents));
}

}  // namespace cgnf
