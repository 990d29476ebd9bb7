#include "recourse/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "recourse/metrics.hpp"
#include "recourse/rng.hpp"

#include "json.hpp"

namespace recourse {

int DatasetBundle::column_index(const std::string& name) const {
  for (size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) return static_cast<int>(c);
  }
  throw MissingColumn("column '" + name + "' not present");
}

Eigen::MatrixXd DatasetBundle::train_rows() const {
  Eigen::MatrixXd out(static_cast<int>(train_idx.size()), X.cols());
  for (size_t i = 0; i < train_idx.size(); ++i) {
    out.row(static_cast<int>(i)) = X.row(train_idx[i]);
  }
  return out;
}

Eigen::VectorXi DatasetBundle::train_labels() const {
  Eigen::VectorXi out(static_cast<int>(train_idx.size()));
  for (size_t i = 0; i < train_idx.size(); ++i) {
    out[static_cast<int>(i)] = y[train_idx[i]];
  }
  return out;
}

DatasetBundle generate_synthetic(int n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("need at least 2 samples");
  Rng rng(seed);
  DatasetBundle b;
  b.columns = {"X1", "X2"};
  b.kinds = {NodeKind::continuous, NodeKind::continuous};
  b.provenance = "synthetic";
  b.X.resize(n, 2);
  Eigen::VectorXd raw_score(n);
  for (int i = 0; i < n; ++i) {
    const double u1 = rng.normal(-1.0, 1.0);
    const double u2 = rng.normal(5.0, 1.0);
    const double uy = rng.normal(0.0, 1.0);
    const double x1 = u1;
    const double x2 = x1 + u2;
    b.X(i, 0) = x1;
    b.X(i, 1) = x2;
    raw_score[i] = 3.0 * x2 - x1 + uy;
  }
  const double t = median(raw_score);
  b.y.resize(n);
  for (int i = 0; i < n; ++i) b.y[i] = raw_score[i] > t ? 1 : 0;
  return b;
}

DatasetBundle generate_german_style(int n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("need at least 2 samples");
  Rng rng(seed);
  DatasetBundle b;
  b.columns = {"age", "gender", "amount", "duration"};
  b.kinds = {NodeKind::continuous, NodeKind::categorical,
             NodeKind::continuous, NodeKind::continuous};
  b.provenance = "german_synthetic";
  b.codebooks["gender"] = {"0", "1"};
  b.X.resize(n, 4);
  Eigen::VectorXd raw_score(n);
  for (int i = 0; i < n; ++i) {
    const double age = rng.normal(35.0, 10.0);
    const double gender = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    const double amount =
        2000.0 + 30.0 * age + 500.0 * gender + rng.normal(0.0, 800.0);
    const double duration = 6.0 + 0.004 * amount + rng.normal(0.0, 6.0);
    b.X(i, 0) = age;
    b.X(i, 1) = gender;
    b.X(i, 2) = amount;
    b.X(i, 3) = duration;
    raw_score[i] = 0.8 * (age - 35.0) / 10.0 - 1.2 * (amount - 3050.0) / 900.0 -
                   1.0 * (duration - 18.0) / 7.0 + rng.normal(0.0, 0.5);
  }
  const double t = median(raw_score);
  b.y.resize(n);
  for (int i = 0; i < n; ++i) b.y[i] = raw_score[i] > t ? 1 : 0;
  return b;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim whitespace and a trailing CR
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos
                        ? std::string()
                        : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

DatasetBundle load_csv(const std::string& path, const CausalGraph& g,
                       const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw EmptyFile("'" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);

  std::vector<int> feature_cells(static_cast<size_t>(g.size()), -1);
  int label_cell = -1;
  std::vector<bool> used(header.size(), false);
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) {
      label_cell = static_cast<int>(c);
      used[c] = true;
      continue;
    }
    if (g.has_node(header[c])) {
      feature_cells[static_cast<size_t>(g.index_of(header[c]))] =
          static_cast<int>(c);
      used[c] = true;
    }
  }
  for (int v = 0; v < g.size(); ++v) {
    if (feature_cells[static_cast<size_t>(v)] < 0) {
      throw MissingColumn("column '" + g.node(v).name + "' missing from '" +
                          path + "'");
    }
  }
  if (label_cell < 0) {
    throw MissingColumn("label column '" + label_column + "' missing from '" +
                        path + "'");
  }
  for (size_t c = 0; c < header.size(); ++c) {
    if (!used[c]) {
      std::cerr << "warning: ignoring extra column '" << header[c] << "'\n";
    }
  }

  std::vector<std::vector<std::string>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw UnparseableValue("row " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
    }
    for (size_t c = 0; c < cells.size(); ++c) {
      if (used[c] && cells[c].empty()) {
        throw UnparseableValue("row " + std::to_string(line_no) +
                               ": missing value in column '" + header[c] + "'");
      }
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw EmptyFile("'" + path + "' has no data rows");

  DatasetBundle b;
  b.provenance = path;
  for (int v = 0; v < g.size(); ++v) {
    b.columns.push_back(g.node(v).name);
    b.kinds.push_back(g.node(v).kind);
  }
  const int n = static_cast<int>(rows.size());
  b.X.resize(n, g.size());
  b.y.resize(n);

  for (int v = 0; v < g.size(); ++v) {
    const size_t cell = static_cast<size_t>(feature_cells[static_cast<size_t>(v)]);
    if (g.node(v).kind == NodeKind::categorical) {
      std::set<std::string> values;
      for (const auto& row : rows) values.insert(row[cell]);
      std::vector<std::string> codebook(values.begin(), values.end());
      for (int i = 0; i < n; ++i) {
        const auto it = std::lower_bound(codebook.begin(), codebook.end(),
                                         rows[static_cast<size_t>(i)][cell]);
        b.X(i, v) = static_cast<double>(it - codebook.begin());
      }
      b.codebooks[g.node(v).name] = std::move(codebook);
    } else {
      for (int i = 0; i < n; ++i) {
        double value;
        if (!parse_double(rows[static_cast<size_t>(i)][cell], value)) {
          throw UnparseableValue("row " + std::to_string(i + 2) +
                                 ", column '" + g.node(v).name +
                                 "': cannot parse '" +
                                 rows[static_cast<size_t>(i)][cell] + "'");
        }
        b.X(i, v) = value;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    const std::string& cell = rows[static_cast<size_t>(i)][static_cast<size_t>(label_cell)];
    double value;
    if (!parse_double(cell, value) || (value != 0.0 && value != 1.0)) {
      throw UnparseableValue("row " + std::to_string(i + 2) + ", column '" +
                             label_column + "': labels must be 0 or 1, got '" +
                             cell + "'");
    }
    b.y[i] = static_cast<int>(value);
  }
  return b;
}

DagConfig load_dag_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  DagConfig cfg;
  try {
    for (const auto& n : j.at("nodes")) {
      NodeSpec spec;
      spec.name = n.at("name").get<std::string>();
      const std::string kind = n.value("kind", "continuous");
      if (kind == "continuous") {
        spec.kind = NodeKind::continuous;
      } else if (kind == "categorical") {
        spec.kind = NodeKind::categorical;
      } else {
        throw ParseError("node '" + spec.name + "': unknown kind '" + kind + "'");
      }
      cfg.nodes.push_back(spec);
      cfg.feasibility.classes.push_back(
          action_class_from_string(n.value("class", "actionable")));
      cfg.feasibility.monotone.push_back(
          monotonicity_from_string(n.value("monotone", "free")));
    }
    for (const auto& e : j.at("edges")) {
      cfg.edges.emplace_back(e.at(0).get<std::string>(),
                             e.at(1).get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  const CausalGraph g = cfg.graph();  // validates structure
  cfg.feasibility.validate(g);
  return cfg;
}

void split_train_eval(DatasetBundle& bundle, double train_fraction,
                      std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train fraction must be in (0, 1)");
  }
  std::vector<int> order(static_cast<size_t>(bundle.rows()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const int n_train = std::max(
      1, static_cast<int>(std::floor(train_fraction *
                                     static_cast<double>(bundle.rows()))));
  bundle.train_idx.assign(order.begin(), order.begin() + n_train);
  bundle.eval_idx.assign(order.begin() + n_train, order.end());
  std::sort(bundle.train_idx.begin(), bundle.train_idx.end());
  std::sort(bundle.eval_idx.begin(), bundle.eval_idx.end());
}

void write_csv(const DatasetBundle& bundle, const std::string& path,
               const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write '" + path + "'");
  for (const auto& c : bundle.columns) out << c << ',';
  out << label_column << '\n';
  char buf[32];
  for (int i = 0; i < bundle.rows(); ++i) {
    for (int c = 0; c < bundle.X.cols(); ++c) {
      auto res = std::to_chars(buf, buf + sizeof(buf), bundle.X(i, c));
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << bundle.y[i] << '\n';
  }
}

}  // namespace recourse
