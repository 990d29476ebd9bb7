#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "recourse/causal_graph.hpp"
#include "recourse/feasibility.hpp"

namespace recourse {

// Tabular dataset with named feature columns and a binary target. When bound
// to a graph the columns follow graph declaration order.
struct DatasetBundle {
  std::vector<std::string> columns;
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
  std::vector<NodeKind> kinds;
  std::vector<int> train_idx;
  std::vector<int> eval_idx;
  std::string provenance;
  // Categorical column -> code strings; code = position in the sorted list.
  std::map<std::string, std::vector<std::string>> codebooks;

  int rows() const { return static_cast<int>(X.rows()); }
  int column_index(const std::string& name) const;
  Eigen::MatrixXd train_rows() const;
  Eigen::VectorXi train_labels() const;
};

// Two-feature toy generator: X1 = U1 ~ N(-1,1); X2 = X1 + U2, U2 ~ N(5,1);
// Y = 1{3 X2 - X1 + U_Y > t}, U_Y ~ N(0,1), with t the empirical median of
// the score so labels are balanced. Deterministic given the seed.
DatasetBundle generate_synthetic(int n, std::uint64_t seed);

// Demo credit-style generator over {age, gender, amount, duration} with the
// graph age -> amount <- gender, amount -> duration; gender is a categorical
// root. Ships so the credit-style configs are runnable without external data.
DatasetBundle generate_german_style(int n, std::uint64_t seed);

// Loads a CSV with a header row; feature columns are matched to graph nodes
// by name, categorical columns are integer-coded with a stored codebook,
// extra columns are ignored with a warning. Missing or unparseable cells are
// rejected with their row and column.
DatasetBundle load_csv(const std::string& path, const CausalGraph& g,
                       const std::string& label_column);

struct DagConfig {
  std::vector<NodeSpec> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  FeasibilitySpec feasibility;

  CausalGraph graph() const { return CausalGraph(nodes, edges); }
};

// Parses the DAG config JSON:
// { "nodes": [{"name", "kind", "class", "monotone"}], "edges": [[src,dst]] }
// and validates it through graph construction and the feasibility rules.
DagConfig load_dag_config(const std::string& path);

// 80/20-style split by seeded shuffle; fills train_idx / eval_idx.
void split_train_eval(DatasetBundle& bundle, double train_fraction,
                      std::uint64_t seed);

void write_csv(const DatasetBundle& bundle, const std::string& path,
               const std::string& label_column = "label");

}  // namespace recourse
