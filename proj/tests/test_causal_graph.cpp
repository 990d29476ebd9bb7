#include "recourse/causal_graph.hpp"

#include <algorithm>

#include "recourse/rng.hpp"

#include "doctest.h"

using namespace recourse;

namespace {

std::vector<NodeSpec> german_nodes() {
  return {{"age", NodeKind::continuous},
          {"gender", NodeKind::categorical},
          {"amount", NodeKind::continuous},
          {"duration", NodeKind::continuous}};
}

std::vector<std::pair<std::string, std::string>> german_edges() {
  return {{"age", "amount"}, {"gender", "amount"}, {"amount", "duration"}};
}

}  // namespace

TEST_CASE("credit-style graph validates with the expected roots") {
  const CausalGraph g = build_graph(german_nodes(), german_edges());
  CHECK(g.size() == 4);
  const auto roots = g.roots();
  REQUIRE(roots.size() == 2);
  CHECK(g.node(roots[0]).name == "age");
  CHECK(g.node(roots[1]).name == "gender");
}

TEST_CASE("single node graph") {
  const CausalGraph g = build_graph({{"X1", NodeKind::continuous}}, {});
  CHECK(g.roots() == std::vector<int>{0});
  CHECK(topological_order(g) == std::vector<std::string>{"X1"});
}

TEST_CASE("two-cycle is rejected") {
  CHECK_THROWS_AS(build_graph({{"A"}, {"B"}}, {{"A", "B"}, {"B", "A"}}),
                  CycleDetected);
}

TEST_CASE("unknown endpoint and duplicates are rejected") {
  CHECK_THROWS_AS(build_graph({{"A"}}, {{"A", "B"}}), UnknownNode);
  CHECK_THROWS_AS(build_graph({{"A"}, {"A"}}, {}), DuplicateNode);
  CHECK_THROWS_AS(build_graph({{"A"}, {"B"}}, {{"A", "B"}, {"A", "B"}}),
                  DuplicateEdge);
}

TEST_CASE("topological order breaks ties by declaration order") {
  const CausalGraph german = build_graph(german_nodes(), german_edges());
  CHECK(topological_order(german) ==
        std::vector<std::string>{"age", "gender", "amount", "duration"});

  const CausalGraph chain = build_graph({{"X1"}, {"X2"}}, {{"X1", "X2"}});
  CHECK(topological_order(chain) == std::vector<std::string>{"X1", "X2"});

  const CausalGraph loose = build_graph({{"c"}, {"a"}, {"b"}}, {});
  CHECK(topological_order(loose) == std::vector<std::string>{"c", "a", "b"});
}

TEST_CASE("parents accessor") {
  const CausalGraph g = build_graph(german_nodes(), german_edges());
  CHECK(parents(g, "amount") == std::set<std::string>{"age", "gender"});
  CHECK(parents(g, "age").empty());
  CHECK_THROWS_AS(parents(g, "nope"), UnknownNode);

  const CausalGraph synth = build_graph({{"X1"}, {"X2"}}, {{"X1", "X2"}});
  CHECK(parents(synth, "X2") == std::set<std::string>{"X1"});
}

TEST_CASE("parents precede children in topological order, random DAGs") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(8));
    std::vector<NodeSpec> nodes;
    for (int v = 0; v < n; ++v) nodes.push_back({"n" + std::to_string(v)});
    // random declaration permutation and edges along a hidden total order
    std::vector<int> order(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) order[static_cast<size_t>(v)] = v;
    rng.shuffle(order);
    std::vector<std::pair<std::string, std::string>> edges;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (rng.uniform01() < 0.4) {
          edges.emplace_back(nodes[static_cast<size_t>(order[static_cast<size_t>(a)])].name,
                             nodes[static_cast<size_t>(order[static_cast<size_t>(b)])].name);
        }
      }
    }
    const CausalGraph g = build_graph(nodes, edges);
    std::vector<int> pos(static_cast<size_t>(n));
    const auto& topo = g.topological_order();
    for (size_t i = 0; i < topo.size(); ++i) {
      pos[static_cast<size_t>(topo[i])] = static_cast<int>(i);
    }
    for (const auto& [s, d] : g.edges()) {
      CHECK(pos[static_cast<size_t>(s)] < pos[static_cast<size_t>(d)]);
    }
    // roots are exactly the nodes with no parents
    const std::vector<int> roots = g.roots();
    for (int v = 0; v < n; ++v) {
      const bool is_root = std::find(roots.begin(), roots.end(), v) != roots.end();
      CHECK(is_root == g.parents_of(v).empty());
    }

    // one injected back-edge must introduce a cycle
    if (!edges.empty()) {
      const auto& [s, d] = g.edges()[rng.below(g.edges().size())];
      auto bad = edges;
      bad.emplace_back(g.node(d).name, g.node(s).name);
      CHECK_THROWS_AS(build_graph(nodes, bad), CycleDetected);
    }
  }
}
