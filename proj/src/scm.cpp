#include "recourse/scm.hpp"

namespace recourse {

StructuralModel::StructuralModel(
    CausalGraph graph, std::map<std::string, RegressorModel> regressors)
    : graph_(std::move(graph)) {
  const size_t n = static_cast<size_t>(graph_.size());
  regressors_.resize(n);
  has_regressor_.assign(n, false);
  for (auto& [name, model] : regressors) {
    const int v = graph_.index_of(name);
    if (graph_.is_root(v)) {
      throw IncompatibleSpec("root node '" + name + "' cannot have a regressor");
    }
    const auto& parents = graph_.parents_of(v);
    if (model.input_names().size() != parents.size()) {
      throw IncompatibleSpec("regressor for '" + name +
                             "' does not match parent count");
    }
    for (size_t k = 0; k < parents.size(); ++k) {
      if (model.input_names()[k] != graph_.node(parents[k]).name) {
        throw IncompatibleSpec("regressor inputs for '" + name +
                               "' must equal its parents in declaration order");
      }
    }
    regressors_[static_cast<size_t>(v)] = std::move(model);
    has_regressor_[static_cast<size_t>(v)] = true;
  }
  for (int v = 0; v < graph_.size(); ++v) {
    if (!graph_.is_root(v) && !has_regressor_[static_cast<size_t>(v)]) {
      throw IncompatibleSpec("missing regressor for non-root node '" +
                             graph_.node(v).name + "'");
    }
  }
}

bool StructuralModel::has_regressor(int v) const {
  return has_regressor_[static_cast<size_t>(v)];
}

const RegressorModel& StructuralModel::regressor(int v) const {
  if (!has_regressor(v)) {
    throw IncompatibleSpec("node '" + graph_.node(v).name + "' has no regressor");
  }
  return regressors_[static_cast<size_t>(v)];
}

Eigen::VectorXd StructuralModel::gather_parents(const Eigen::VectorXd& values,
                                                int v) const {
  const auto& parents = graph_.parents_of(v);
  Eigen::VectorXd out(static_cast<int>(parents.size()));
  for (size_t k = 0; k < parents.size(); ++k) {
    out[static_cast<int>(k)] = values[parents[k]];
  }
  return out;
}

Eigen::VectorXd StructuralModel::abduct(const Eigen::VectorXd& x) const {
  if (x.size() != graph_.size()) {
    throw MissingColumn("feature vector does not cover all graph nodes");
  }
  Eigen::VectorXd u(x.size());
  for (int v = 0; v < graph_.size(); ++v) {
    if (graph_.is_root(v)) {
      u[v] = x[v];
    } else {
      u[v] = x[v] - regressors_[static_cast<size_t>(v)].predict(
                        gather_parents(x, v));
    }
  }
  return u;
}

Eigen::VectorXd StructuralModel::forward(const Eigen::VectorXd& u) const {
  if (u.size() != graph_.size()) {
    throw MissingColumn("latent vector does not cover all graph nodes");
  }
  Eigen::VectorXd x(u.size());
  for (int v : graph_.topological_order()) {
    if (graph_.is_root(v)) {
      x[v] = u[v];
    } else {
      x[v] = regressors_[static_cast<size_t>(v)].predict(gather_parents(x, v)) +
             u[v];
    }
  }
  return x;
}

Eigen::MatrixXd StructuralModel::abduct_rows(const Eigen::MatrixXd& X) const {
  if (X.cols() != graph_.size()) {
    throw MissingColumn("feature matrix does not cover all graph nodes");
  }
  Eigen::MatrixXd U(X.rows(), X.cols());
  for (int v = 0; v < graph_.size(); ++v) {
    if (graph_.is_root(v)) {
      U.col(v) = X.col(v);
    } else {
      const auto& parents = graph_.parents_of(v);
      Eigen::MatrixXd P(X.rows(), static_cast<int>(parents.size()));
      for (size_t k = 0; k < parents.size(); ++k) {
        P.col(static_cast<int>(k)) = X.col(parents[k]);
      }
      U.col(v) =
          X.col(v) - regressors_[static_cast<size_t>(v)].predict_batch(P);
    }
  }
  return U;
}

void StructuralModel::forward_with_jacobian(const Eigen::VectorXd& u,
                                            Eigen::VectorXd& x,
                                            Eigen::MatrixXd& jac) const {
  if (u.size() != graph_.size()) {
    throw MissingColumn("latent vector does not cover all graph nodes");
  }
  const int d = graph_.size();
  x.resize(d);
  jac = Eigen::MatrixXd::Zero(d, d);
  for (int v : graph_.topological_order()) {
    if (graph_.is_root(v)) {
      x[v] = u[v];
      jac(v, v) = 1.0;
      continue;
    }
    const auto& parents = graph_.parents_of(v);
    const Eigen::VectorXd pvals = gather_parents(x, v);
    const auto& model = regressors_[static_cast<size_t>(v)];
    x[v] = model.predict(pvals) + u[v];
    const Eigen::VectorXd g = model.input_gradient(pvals);
    jac(v, v) = 1.0;
    for (size_t k = 0; k < parents.size(); ++k) {
      jac.row(v) += g[static_cast<int>(k)] * jac.row(parents[k]);
    }
  }
}

StructuralModel fit_scm(const Eigen::MatrixXd& data, const CausalGraph& g,
                        const ScmFitOptions& opts) {
  if (data.cols() != g.size()) {
    throw MissingColumn("data columns must cover all graph nodes");
  }
  std::map<std::string, RegressorModel> regressors;
  // Walk in dependency order: a node is fitted only once all its parents are
  // available.
  for (int v : g.topological_order()) {
    if (g.is_root(v)) continue;
    if (g.node(v).kind == NodeKind::categorical) {
      throw ValidationError("categorical node '" + g.node(v).name +
                            "' must be a root");
    }
    const auto& parents = g.parents_of(v);
    Eigen::MatrixXd inputs(data.rows(), static_cast<int>(parents.size()));
    std::vector<std::string> names;
    std::vector<bool> passthrough;
    for (size_t k = 0; k < parents.size(); ++k) {
      inputs.col(static_cast<int>(k)) = data.col(parents[k]);
      names.push_back(g.node(parents[k]).name);
      passthrough.push_back(g.node(parents[k]).kind == NodeKind::categorical);
    }
    regressors.emplace(
        g.node(v).name,
        fit_regressor(inputs, data.col(v), names, opts.architecture, opts.train,
                      passthrough));
  }
  return StructuralModel(g, std::move(regressors));
}

nlohmann::json StructuralModel::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : graph_.nodes()) {
    nodes.push_back({{"name", n.name},
                     {"kind", n.kind == NodeKind::categorical ? "categorical"
                                                              : "continuous"}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [s, d] : graph_.edges()) {
    edges.push_back({graph_.node(s).name, graph_.node(d).name});
  }
  nlohmann::json regs = nlohmann::json::object();
  for (int v = 0; v < graph_.size(); ++v) {
    if (has_regressor(v)) {
      regs[graph_.node(v).name] = regressors_[static_cast<size_t>(v)].to_json();
    }
  }
  return {{"graph", {{"nodes", nodes}, {"edges", edges}}},
          {"regressors", regs}};
}

StructuralModel StructuralModel::from_json(const nlohmann::json& j) {
  std::vector<NodeSpec> nodes;
  for (const auto& n : j.at("graph").at("nodes")) {
    NodeSpec spec;
    spec.name = n.at("name").get<std::string>();
    spec.kind = n.value("kind", "continuous") == "categorical"
                    ? NodeKind::categorical
                    : NodeKind::continuous;
    nodes.push_back(std::move(spec));
  }
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& e : j.at("graph").at("edges")) {
    edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  }
  std::map<std::string, RegressorModel> regressors;
  for (const auto& [name, rj] : j.at("regressors").items()) {
    regressors.emplace(name, RegressorModel::from_json(rj));
  }
  return StructuralModel(CausalGraph(std::move(nodes), std::move(edges)),
                         std::move(regressors));
}

}  // namespace recourse
