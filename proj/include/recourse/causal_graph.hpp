#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "recourse/errors.hpp"

namespace recourse {

enum class NodeKind { continuous, categorical };

struct NodeSpec {
  std::string name;
  NodeKind kind = NodeKind::continuous;
};

// Directed acyclic graph over named feature nodes. Immutable after
// construction: validation (unique names, known endpoints, no duplicate
// edges, acyclicity) happens in the constructor and the topological order is
// cached. Vectors over nodes follow declaration order throughout the library.
class CausalGraph {
 public:
  CausalGraph(std::vector<NodeSpec> nodes,
              std::vector<std::pair<std::string, std::string>> edges);

  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const NodeSpec& node(int v) const { return nodes_[static_cast<size_t>(v)]; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  // Declaration index of a node; throws UnknownNode.
  int index_of(const std::string& name) const;
  bool has_node(const std::string& name) const;

  // Parent indices of v, sorted by declaration order.
  const std::vector<int>& parents_of(int v) const {
    return parents_[static_cast<size_t>(v)];
  }
  bool is_root(int v) const { return parents_of(v).empty(); }
  std::vector<int> roots() const;

  // Every node appears after all its parents; ties broken by declaration
  // order, so the result is deterministic for a given graph.
  const std::vector<int>& topological_order() const { return topo_order_; }

 private:
  std::vector<NodeSpec> nodes_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> parents_;
  std::vector<int> topo_order_;
};

CausalGraph build_graph(std::vector<NodeSpec> nodes,
                        std::vector<std::pair<std::string, std::string>> edges);

// Node names in dependency order (parents before children).
std::vector<std::string> topological_order(const CausalGraph& g);

std::set<std::string> parents(const CausalGraph& g, const std::string& name);

}  // namespace recourse
