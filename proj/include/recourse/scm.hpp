#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>

#include "recourse/causal_graph.hpp"
#include "recourse/model.hpp"

namespace recourse {

// Additive-noise structural model: one fitted regressor per non-root node.
// Feature and latent vectors are ordered by graph declaration order.
// abduct() computes residuals u_v = x_v - M_v(parents), roots pass through;
// forward() evaluates the recursive map x_v = M_v(parents) + u_v in
// topological order. forward(abduct(x)) == x up to floating point, by
// construction.
class StructuralModel {
 public:
  StructuralModel(CausalGraph graph,
                  std::map<std::string, RegressorModel> regressors);

  const CausalGraph& graph() const { return graph_; }
  bool has_regressor(int v) const;
  const RegressorModel& regressor(int v) const;

  Eigen::VectorXd abduct(const Eigen::VectorXd& x) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& u) const;
  Eigen::MatrixXd abduct_rows(const Eigen::MatrixXd& X) const;

  // Forward map together with its Jacobian dx/du (row v = dx_v/du). Root
  // rows are exact unit vectors.
  void forward_with_jacobian(const Eigen::VectorXd& u, Eigen::VectorXd& x,
                             Eigen::MatrixXd& jac) const;

  nlohmann::json to_json() const;
  static StructuralModel from_json(const nlohmann::json& j);

 private:
  Eigen::VectorXd gather_parents(const Eigen::VectorXd& values, int v) const;

  CausalGraph graph_;
  std::vector<RegressorModel> regressors_;  // indexed by node, roots unused
  std::vector<bool> has_regressor_;
};

struct ScmFitOptions {
  ArchSpec architecture = ArchSpec::linear();
  TrainConfig train;
};

// Fits one regressor per non-root node on (parent columns -> node column),
// walking the graph in dependency order. `data` columns follow graph node
// order.
StructuralModel fit_scm(const Eigen::MatrixXd& data, const CausalGraph& g,
                        const ScmFitOptions& opts);

}  // namespace recourse
