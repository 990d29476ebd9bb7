#include "recourse/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "recourse/metrics.hpp"

#include "doctest.h"

using namespace recourse;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
  const fs::path path = fs::temp_directory_path() / name;
  std::ofstream out(path);
  out << contents;
  return path;
}

CausalGraph german_graph() {
  return CausalGraph({{"age"},
                      {"gender", NodeKind::categorical},
                      {"amount"},
                      {"duration"}},
                     {{"age", "amount"}, {"gender", "amount"}, {"amount", "duration"}});
}

}  // namespace

TEST_CASE("synthetic generator moments at scale") {
  const DatasetBundle b = generate_synthetic(100000, 1234);
  CHECK(b.X.col(0).mean() == doctest::Approx(-1.0).epsilon(0.02));
  CHECK(b.X.col(1).mean() == doctest::Approx(4.0).epsilon(0.005));
  // median threshold splits an even sample exactly in half
  CHECK(b.y.cast<double>().mean() == 0.5);
}

TEST_CASE("synthetic generator is deterministic per seed") {
  const DatasetBundle a = generate_synthetic(500, 7);
  const DatasetBundle b = generate_synthetic(500, 7);
  CHECK(a.X == b.X);
  CHECK(a.y == b.y);
  const DatasetBundle c = generate_synthetic(500, 8);
  CHECK(a.X != c.X);
}

TEST_CASE("regressing X2 on X1 over the sample recovers unit slope") {
  const DatasetBundle b = generate_synthetic(100000, 42);
  // closed-form simple regression as the oracle
  const double mx = b.X.col(0).mean();
  const double my = b.X.col(1).mean();
  const double cov =
      ((b.X.col(0).array() - mx) * (b.X.col(1).array() - my)).sum();
  const double var = (b.X.col(0).array() - mx).square().sum();
  CHECK(cov / var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("credit-style generator matches its declared schema") {
  const DatasetBundle b = generate_german_style(2000, 5);
  CHECK(b.columns ==
        std::vector<std::string>{"age", "gender", "amount", "duration"});
  CHECK(b.kinds[1] == NodeKind::categorical);
  for (int i = 0; i < b.rows(); ++i) {
    CHECK((b.X(i, 1) == 0.0 || b.X(i, 1) == 1.0));
  }
  CHECK(b.y.cast<double>().mean() == 0.5);
}

TEST_CASE("csv loader binds columns by name and codes categoricals") {
  const auto path = temp_file(
      "german_ok.csv",
      "duration,gender,age,amount,label,extra\n"
      "24,male,30,4000,1,x\n"
      "12,female,45,2500,0,y\n"
      "36,male,52,7800,1,z\n");
  const DatasetBundle b = load_csv(path.string(), german_graph(), "label");
  CHECK(b.rows() == 3);
  CHECK(b.columns ==
        std::vector<std::string>{"age", "gender", "amount", "duration"});
  CHECK(b.X(0, 0) == 30.0);      // age bound by name, not position
  CHECK(b.X(0, 3) == 24.0);      // duration
  CHECK(b.codebooks.at("gender") ==
        std::vector<std::string>{"female", "male"});
  CHECK(b.X(0, 1) == 1.0);  // male
  CHECK(b.X(1, 1) == 0.0);  // female
  CHECK(b.y[0] == 1);
  CHECK(b.y[1] == 0);
}

TEST_CASE("csv loader rejects missing columns and bad cells") {
  const auto missing = temp_file("german_missing.csv",
                                 "age,gender,amount,label\n30,male,4000,1\n");
  CHECK_THROWS_AS(load_csv(missing.string(), german_graph(), "label"),
                  MissingColumn);

  const auto bad_cell = temp_file(
      "german_bad.csv",
      "age,gender,amount,duration,label\n30,male,oops,24,1\n31,male,100,12,0\n");
  CHECK_THROWS_WITH_AS(load_csv(bad_cell.string(), german_graph(), "label"),
                       doctest::Contains("amount"), UnparseableValue);

  const auto hole = temp_file(
      "german_hole.csv",
      "age,gender,amount,duration,label\n30,male,4000,24,1\n,male,100,12,0\n");
  CHECK_THROWS_WITH_AS(load_csv(hole.string(), german_graph(), "label"),
                       doctest::Contains("row 3"), UnparseableValue);

  const auto empty = temp_file("empty.csv", "");
  CHECK_THROWS_AS(load_csv(empty.string(), german_graph(), "label"), EmptyFile);
}

TEST_CASE("csv round trip through write_csv") {
  const DatasetBundle b = generate_synthetic(50, 3);
  const fs::path path = fs::temp_directory_path() / "synth_roundtrip.csv";
  write_csv(b, path.string());
  const CausalGraph g({{"X1"}, {"X2"}}, {{"X1", "X2"}});
  const DatasetBundle loaded = load_csv(path.string(), g, "label");
  CHECK(loaded.rows() == 50);
  CHECK((loaded.X - b.X).cwiseAbs().maxCoeff() == 0.0);  // shortest round-trip
  CHECK(loaded.y == b.y);
}

TEST_CASE("dag config parsing") {
  const auto path = temp_file(
      "german_dag.json",
      R"({"nodes": [
            {"name": "age", "kind": "continuous", "class": "actionable", "monotone": "increase_only"},
            {"name": "gender", "kind": "categorical", "class": "immutable"},
            {"name": "amount", "kind": "continuous", "class": "actionable"},
            {"name": "duration", "kind": "continuous", "class": "actionable"}],
          "edges": [["age","amount"],["gender","amount"],["amount","duration"]]})");
  const DagConfig cfg = load_dag_config(path.string());
  CHECK(cfg.nodes.size() == 4);
  CHECK(cfg.edges.size() == 3);
  CHECK(cfg.feasibility.classes[1] == ActionClass::immutable);
  CHECK(cfg.feasibility.monotone[0] == Monotonicity::increase_only);
  CHECK(cfg.feasibility.classes[2] == ActionClass::actionable);

  const auto non_actionable = temp_file(
      "synth2_dag.json",
      R"({"nodes": [{"name": "X1"}, {"name": "X2", "class": "non_actionable"}],
          "edges": [["X1","X2"]]})");
  const DagConfig s2 = load_dag_config(non_actionable.string());
  CHECK(s2.feasibility.classes[1] == ActionClass::non_actionable);

  const auto bad = temp_file(
      "bad_dag.json",
      R"({"nodes": [{"name": "g", "kind": "categorical", "class": "actionable"}],
          "edges": []})");
  CHECK_THROWS_AS(load_dag_config(bad.string()), IncompatibleSpec);

  const auto garbled = temp_file("garbled.json", "{nodes: [");
  CHECK_THROWS_AS(load_dag_config(garbled.string()), ParseError);
}

TEST_CASE("train/eval split covers the data without overlap") {
  DatasetBundle b = generate_synthetic(1000, 11);
  split_train_eval(b, 0.8, 5);
  CHECK(b.train_idx.size() == 800);
  CHECK(b.eval_idx.size() == 200);
  std::vector<char> seen(1000, 0);
  for (int i : b.train_idx) seen[static_cast<size_t>(i)] += 1;
  for (int i : b.eval_idx) seen[static_cast<size_t>(i)] += 1;
  for (char c : seen) CHECK(c == 1);

  DatasetBundle b2 = generate_synthetic(1000, 11);
  split_train_eval(b2, 0.8, 5);
  CHECK(b2.train_idx == b.train_idx);
}
