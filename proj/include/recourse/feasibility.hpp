#pragma once

#include <Eigen/Dense>
#include <set>
#include <string>
#include <vector>

#include "recourse/causal_graph.hpp"

namespace recourse {

enum class ActionClass { actionable, non_actionable, immutable };
enum class Monotonicity { free, increase_only, decrease_only };

// Per-node actionability and monotonicity, aligned with graph declaration
// order. Non-actionable and immutable nodes get their latent coordinate
// frozen; monotone bounds clamp the sign of actions on actionable nodes.
struct FeasibilitySpec {
  std::vector<ActionClass> classes;
  std::vector<Monotonicity> monotone;

  static FeasibilitySpec all_actionable(int n) {
    return {std::vector<ActionClass>(static_cast<size_t>(n),
                                     ActionClass::actionable),
            std::vector<Monotonicity>(static_cast<size_t>(n),
                                      Monotonicity::free)};
  }

  bool frozen(int v) const {
    return classes[static_cast<size_t>(v)] != ActionClass::actionable;
  }

  // Checks alignment with the graph plus the structural rules: immutable only
  // at root nodes, categorical nodes never actionable.
  void validate(const CausalGraph& g) const;
};

// Zeroes frozen coordinates and clamps monotone ones. Idempotent; leaves
// already-feasible coordinates untouched.
Eigen::VectorXd project_action(const Eigen::VectorXd& action,
                               const FeasibilitySpec& spec);

// True iff every coordinate satisfies its constraint within tol.
bool is_feasible(const Eigen::VectorXd& action, const FeasibilitySpec& spec,
                 double tol = 1e-6);

// New graph with all incoming edges of the frozen nodes removed, turning them
// into roots (the hard-intervention reading of immutability for non-roots).
CausalGraph derive_hard_intervention_graph(const CausalGraph& g,
                                           const std::set<std::string>& frozen);

ActionClass action_class_from_string(const std::string& s);
Monotonicity monotonicity_from_string(const std::string& s);
std::string to_string(ActionClass c);
std::string to_string(Monotonicity m);

}  // namespace recourse
