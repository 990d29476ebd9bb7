#include "recourse/causal_graph.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace recourse {

namespace {

// Walks backwards through parent links restricted to `remaining` until a node
// repeats, then formats the cycle for the error message.
std::string format_cycle(const std::vector<NodeSpec>& nodes,
                         const std::vector<std::vector<int>>& parents,
                         const std::vector<bool>& remaining) {
  int start = -1;
  for (size_t v = 0; v < nodes.size(); ++v) {
    if (remaining[v]) {
      start = static_cast<int>(v);
      break;
    }
  }
  std::vector<int> path;
  std::vector<int> seen_at(nodes.size(), -1);
  int cur = start;
  while (seen_at[static_cast<size_t>(cur)] < 0) {
    seen_at[static_cast<size_t>(cur)] = static_cast<int>(path.size());
    path.push_back(cur);
    for (int p : parents[static_cast<size_t>(cur)]) {
      if (remaining[static_cast<size_t>(p)]) {
        cur = p;
        break;
      }
    }
  }
  std::ostringstream out;
  for (size_t i = static_cast<size_t>(seen_at[static_cast<size_t>(cur)]);
       i < path.size(); ++i) {
    out << nodes[static_cast<size_t>(path[i])].name << " <- ";
  }
  out << nodes[static_cast<size_t>(cur)].name;
  return out.str();
}

}  // namespace

CausalGraph::CausalGraph(
    std::vector<NodeSpec> nodes,
    std::vector<std::pair<std::string, std::string>> edges)
    : nodes_(std::move(nodes)) {
  std::map<std::string, int> index;
  for (size_t v = 0; v < nodes_.size(); ++v) {
    auto [it, inserted] = index.emplace(nodes_[v].name, static_cast<int>(v));
    if (!inserted) throw DuplicateNode("duplicate node '" + nodes_[v].name + "'");
  }

  parents_.resize(nodes_.size());
  std::set<std::pair<int, int>> seen;
  for (const auto& [src, dst] : edges) {
    auto si = index.find(src);
    if (si == index.end()) throw UnknownNode("edge source '" + src + "' not declared");
    auto di = index.find(dst);
    if (di == index.end()) throw UnknownNode("edge target '" + dst + "' not declared");
    if (!seen.insert({si->second, di->second}).second) {
      throw DuplicateEdge("duplicate edge " + src + " -> " + dst);
    }
    edges_.emplace_back(si->second, di->second);
    parents_[static_cast<size_t>(di->second)].push_back(si->second);
  }
  for (auto& p : parents_) std::sort(p.begin(), p.end());

  // Kahn's algorithm, scanning in declaration order so ties are broken
  // deterministically.
  std::vector<int> pending(nodes_.size(), 0);
  for (size_t v = 0; v < nodes_.size(); ++v) {
    pending[v] = static_cast<int>(parents_[v].size());
  }
  std::vector<bool> remaining(nodes_.size(), true);
  topo_order_.reserve(nodes_.size());
  while (topo_order_.size() < nodes_.size()) {
    int picked = -1;
    for (size_t v = 0; v < nodes_.size(); ++v) {
      if (remaining[v] && pending[v] == 0) {
        picked = static_cast<int>(v);
        break;
      }
    }
    if (picked < 0) {
      throw CycleDetected("cycle detected: " +
                          format_cycle(nodes_, parents_, remaining));
    }
    remaining[static_cast<size_t>(picked)] = false;
    topo_order_.push_back(picked);
    for (const auto& [s, d] : edges_) {
      if (s == picked) --pending[static_cast<size_t>(d)];
    }
  }
}

int CausalGraph::index_of(const std::string& name) const {
  for (size_t v = 0; v < nodes_.size(); ++v) {
    if (nodes_[v].name == name) return static_cast<int>(v);
  }
  throw UnknownNode("unknown node '" + name + "'");
}

bool CausalGraph::has_node(const std::string& name) const {
  for (const auto& n : nodes_) {
    if (n.name == name) return true;
  }
  return false;
}

std::vector<int> CausalGraph::roots() const {
  std::vector<int> out;
  for (int v = 0; v < size(); ++v) {
    if (is_root(v)) out.push_back(v);
  }
  return out;
}

CausalGraph build_graph(
    std::vector<NodeSpec> nodes,
    std::vector<std::pair<std::string, std::string>> edges) {
  return CausalGraph(std::move(nodes), std::move(edges));
}

std::vector<std::string> topological_order(const CausalGraph& g) {
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(g.size()));
  for (int v : g.topological_order()) names.push_back(g.node(v).name);
  return names;
}

std::set<std::string> parents(const CausalGraph& g, const std::string& name) {
  std::set<std::string> out;
  for (int p : g.parents_of(g.index_of(name))) out.insert(g.node(p).name);
  return out;
}

}  // namespace recourse
