#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "recourse/causal_graph.hpp"
#include "recourse/scm.hpp"

#include "json.hpp"

namespace recourse {

// Median absolute deviation from the median. Throws EmptyInput.
double mad(const Eigen::VectorXd& values);

double median(Eigen::VectorXd values);

// Quantile with linear interpolation, q in [0, 1].
double quantile(Eigen::VectorXd values, double q);

struct ProximityResult {
  double continuous = 0.0;
  double categorical = 0.0;
  bool has_categorical = false;
};

// Continuous part: mean over continuous features of |delta| / MAD.
// Categorical part: mean indicator of changed codes; absent when there are no
// categorical features. `mads` is full-length; only continuous entries are
// read and must be positive (callers substitute 1.0 where MAD = 0).
ProximityResult proximity(const Eigen::VectorXd& xcf, const Eigen::VectorXd& x,
                          const std::vector<NodeKind>& kinds,
                          const Eigen::VectorXd& mads);

// Relevance threshold for sparsity: t = min(MAD(f), q10(|f~ - median(f~)|))
// where f~ drops the values equal to the median of f.
double sparsity_threshold(const Eigen::VectorXd& feature_values);

// Number of coordinates with |xcf - x| strictly above the per-feature
// threshold. Applied to action vectors it yields sparsity on actions.
int sparsity(const Eigen::VectorXd& xcf, const Eigen::VectorXd& x,
             const Eigen::VectorXd& thresholds);

// L1 norms on standardized coordinates: sum_i |delta_i| * inv_scale_i.
double l1_distance(const Eigen::VectorXd& xcf, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& inv_scale);
double action_cost(const Eigen::VectorXd& action,
                   const Eigen::VectorXd& inv_scale);

// L1 distance between xcf and its zero-residual projection onto the SCM
// (roots kept); equals the L1 norm of the non-root residuals of xcf. An
// optional inv_scale standardizes per coordinate (empty = raw values).
double causal_plausibility(const StructuralModel& scm,
                           const Eigen::VectorXd& xcf,
                           const Eigen::VectorXd& inv_scale = {});

// || (x_base_cf - x0) - a_ceils ||_1 on standardized coordinates; compares
// the direction of the two methods' recommendations on commonly-valid
// instances.
double direction_gap(const Eigen::VectorXd& x_base_cf,
                     const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& a_ceils,
                     const Eigen::VectorXd& inv_scale);

// Median and deviation-from-median (median absolute deviation) over the
// masked values; count 0 marks an empty set instead of fabricated zeros.
struct AggregateValue {
  double median = std::numeric_limits<double>::quiet_NaN();
  double deviation = std::numeric_limits<double>::quiet_NaN();
  int count = 0;
};

AggregateValue summarize(const std::vector<double>& values,
                         const std::vector<char>& mask);

// Per-instance metric values for one method.
struct InstanceMetrics {
  bool valid = false;
  bool feasible = false;
  double proximity_cont = 0.0;
  double proximity_cat = 0.0;
  bool has_categorical = false;
  double sparsity = 0.0;
  double sparsity_actions = 0.0;
  double distance = 0.0;
  double cost = 0.0;
  double causal_plausibility = 0.0;
};

struct MethodBlock {
  std::string method;
  int attempted = 0;
  int valid_count = 0;
  double validity = 0.0;     // valid / attempted
  double feasibility = 0.0;  // feasible-and-valid / valid (NaN if none valid)
  AggregateValue proximity_cont, proximity_cat, sparsity, distance,
      sparsity_actions, cost, causal_plausibility;
};

struct MetricsReport {
  MethodBlock baseline_all, ceils_all;        // each method's valid set
  MethodBlock baseline_common, ceils_common;  // intersection of valid sets
  int common_count = 0;
  AggregateValue direction_gap;  // intersection scope

  nlohmann::json to_json() const;
  // Flat table: one row per (method, scope). In intersection rows the
  // validity column carries the common count.
  std::string to_csv() const;
};

// Aggregates per-instance metrics for the two methods; `direction_gaps` is
// aligned with the instances and read where both methods are valid.
MetricsReport aggregate(const std::vector<InstanceMetrics>& baseline,
                        const std::vector<InstanceMetrics>& ceils,
                        const std::vector<double>& direction_gaps);

}  // namespace recourse
