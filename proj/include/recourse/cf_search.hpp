#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "recourse/feasibility.hpp"
#include "recourse/model.hpp"
#include "recourse/scm.hpp"

namespace recourse {

// Differentiable scalar objective over the search space. The axis is the
// caller's choice; validity is judged by value(x) crossing `threshold`.
struct ScoreFn {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

struct SearchConfig {
  double lambda0 = 0.1;        // initial weight of the distance term
  double lambda_growth = 2.0;  // multiplier applied after a stage finds validity
  int max_stages = 5;
  int max_iters_per_stage = 500;
  double step_size = 0.05;       // on scale-standardized coordinates
  double validity_margin = 0.05; // score offset from the threshold

  // Per-coordinate distance weights (1/MAD at the call sites; empty = ones).
  Eigen::VectorXd distance_weights;
  // Per-coordinate step scaling (empty = 1/weights, i.e. the MAD).
  Eigen::VectorXd step_scales;
  // Optional search domain (training data range at the call sites; empty =
  // unbounded). The domain is always widened to include the start point.
  Eigen::VectorXd lower_bounds;
  Eigen::VectorXd upper_bounds;

  int restarts = 0;  // extra seeded starts beyond the plain one
  std::uint64_t seed = 0;

  void validate() const;
};

struct SearchOutcome {
  Eigen::VectorXd candidate;
  bool valid = false;
  int iterations = 0;
  // Weighted-L1 distance of the accepted candidate at the end of each stage
  // that found validity; non-increasing by construction.
  std::vector<double> stage_accepted_distances;
};

// Staged-lambda proximal descent for the nearest valid candidate:
// minimizes hinge(margin - sign * (f(x) - threshold)) + lambda * ||w (x-x0)||_1
// with projection onto the constraints after every step. Lambda starts small
// (validity first) and grows whenever a stage found a valid candidate,
// restarting from the best valid one. Returns the valid candidate with the
// smallest weighted-L1 distance seen, else the last iterate flagged invalid.
SearchOutcome gradient_cf_search(const ScoreFn& f, const Eigen::VectorXd& x0,
                                 int target, double threshold, double margin,
                                 const std::vector<bool>& frozen,
                                 const std::vector<Monotonicity>& monotone,
                                 const SearchConfig& cfg);

enum class Method { baseline, ceils };

struct CounterfactualResult {
  Eigen::VectorXd factual;
  Eigen::VectorXd counterfactual;
  Eigen::VectorXd latent_factual;
  Eigen::VectorXd latent_counterfactual;
  Eigen::VectorXd action;
  bool valid = false;
  Method method = Method::baseline;
  int iterations = 0;
  int target = 1;
};

// Latent-space generation: abduction u0 = F^-1(x0), search against the
// composed score u -> R(F(u)) with freeze/monotone masks from the spec, then
// prediction x_cf = F(u_cf) and action a = u_cf - u0.
CounterfactualResult ceils_generate(const StructuralModel& scm,
                                    const ClassifierModel& clf,
                                    double threshold,
                                    const Eigen::VectorXd& x0,
                                    const FeasibilitySpec& spec,
                                    const SearchConfig& cfg,
                                    std::optional<int> target = std::nullopt);

// Feature-space generation: non-actionable and immutable features are frozen
// in feature space, monotone bounds apply to feature deltas. The action field
// is the ex-post one, abduct(x_cf) - abduct(x0).
CounterfactualResult baseline_generate(const StructuralModel& scm,
                                       const ClassifierModel& clf,
                                       double threshold,
                                       const Eigen::VectorXd& x0,
                                       const FeasibilitySpec& spec,
                                       const SearchConfig& cfg,
                                       std::optional<int> target = std::nullopt);

// Latent action implied by a feature-space counterfactual.
Eigen::VectorXd ex_post_action(const StructuralModel& scm,
                               const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& xcf);

}  // namespace recourse
