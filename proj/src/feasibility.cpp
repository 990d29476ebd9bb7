#include "recourse/feasibility.hpp"

#include <algorithm>

namespace recourse {

void FeasibilitySpec::validate(const CausalGraph& g) const {
  if (static_cast<int>(classes.size()) != g.size() ||
      static_cast<int>(monotone.size()) != g.size()) {
    throw KeyMismatch("feasibility spec does not cover the graph node set");
  }
  for (int v = 0; v < g.size(); ++v) {
    const auto& node = g.node(v);
    if (classes[static_cast<size_t>(v)] == ActionClass::immutable &&
        !g.is_root(v)) {
      throw IncompatibleSpec("immutable is only accepted for root nodes ('" +
                             node.name + "' has parents)");
    }
    if (node.kind == NodeKind::categorical &&
        classes[static_cast<size_t>(v)] == ActionClass::actionable) {
      throw IncompatibleSpec("categorical node '" + node.name +
                             "' cannot be actionable");
    }
  }
}

Eigen::VectorXd project_action(const Eigen::VectorXd& action,
                               const FeasibilitySpec& spec) {
  if (action.size() != static_cast<int>(spec.classes.size())) {
    throw KeyMismatch("action vector does not match spec key set");
  }
  Eigen::VectorXd out = action;
  for (int v = 0; v < action.size(); ++v) {
    if (spec.frozen(v)) {
      out[v] = 0.0;
    } else if (spec.monotone[static_cast<size_t>(v)] ==
               Monotonicity::increase_only) {
      out[v] = std::max(out[v], 0.0);
    } else if (spec.monotone[static_cast<size_t>(v)] ==
               Monotonicity::decrease_only) {
      out[v] = std::min(out[v], 0.0);
    }
  }
  return out;
}

bool is_feasible(const Eigen::VectorXd& action, const FeasibilitySpec& spec,
                 double tol) {
  if (action.size() != static_cast<int>(spec.classes.size())) {
    throw KeyMismatch("action vector does not match spec key set");
  }
  if (tol < 0.0) throw ValidationError("tolerance must be >= 0");
  for (int v = 0; v < action.size(); ++v) {
    if (spec.frozen(v)) {
      if (std::abs(action[v]) > tol) return false;
    } else if (spec.monotone[static_cast<size_t>(v)] ==
               Monotonicity::increase_only) {
      if (action[v] < -tol) return false;
    } else if (spec.monotone[static_cast<size_t>(v)] ==
               Monotonicity::decrease_only) {
      if (action[v] > tol) return false;
    }
  }
  return true;
}

CausalGraph derive_hard_intervention_graph(
    const CausalGraph& g, const std::set<std::string>& frozen) {
  std::vector<bool> cut(static_cast<size_t>(g.size()), false);
  for (const auto& name : frozen) {
    cut[static_cast<size_t>(g.index_of(name))] = true;
  }
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& [s, d] : g.edges()) {
    if (cut[static_cast<size_t>(d)]) continue;
    edges.emplace_back(g.node(s).name, g.node(d).name);
  }
  return CausalGraph(g.nodes(), std::move(edges));
}

ActionClass action_class_from_string(const std::string& s) {
  if (s == "actionable") return ActionClass::actionable;
  if (s == "non_actionable") return ActionClass::non_actionable;
  if (s == "immutable") return ActionClass::immutable;
  throw ParseError("unknown action class '" + s + "'");
}

Monotonicity monotonicity_from_string(const std::string& s) {
  if (s == "free") return Monotonicity::free;
  if (s == "increase_only") return Monotonicity::increase_only;
  if (s == "decrease_only") return Monotonicity::decrease_only;
  throw ParseError("unknown monotonicity '" + s + "'");
}

std::string to_string(ActionClass c) {
  switch (c) {
    case ActionClass::actionable: return "actionable";
    case ActionClass::non_actionable: return "non_actionable";
    case ActionClass::immutable: return "immutable";
  }
  return "actionable";
}

std::string to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::free: return "free";
    case Monotonicity::increase_only: return "increase_only";
    case Monotonicity::decrease_only: return "decrease_only";
  }
  return "free";
}

}  // namespace recourse
