#include "recourse/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"

using namespace recourse;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_dag(const std::string& name, const std::string& contents) {
  const fs::path path = fs::temp_directory_path() / name;
  std::ofstream(path) << contents;
  return path;
}

ExperimentConfig tiny_config(const fs::path& dag, const fs::path& out) {
  ExperimentConfig cfg;
  cfg.name = "tiny";
  cfg.dag_config_path = dag.string();
  cfg.data.source = DataSpec::Source::synthetic;
  cfg.data.n = 600;
  cfg.eval_instances = 12;
  cfg.seed = 4;
  cfg.regressor.arch = ArchSpec::linear();
  cfg.regressor.train.epochs = 400;
  cfg.regressor.train.learning_rate = 0.3;
  cfg.classifier.arch = ArchSpec::make_mlp({8, 8}, Activation::relu);
  cfg.classifier.train.epochs = 300;
  cfg.classifier.train.learning_rate = 0.2;
  cfg.search.max_iters_per_stage = 150;
  cfg.search.max_stages = 3;
  cfg.output_dir = out.string();
  return cfg;
}

const char* kSynthDag =
    R"({"nodes": [{"name": "X1"}, {"name": "X2", "class": "non_actionable"}],
        "edges": [["X1","X2"]]})";

}  // namespace

TEST_CASE("experiment writes the full output set") {
  const fs::path dag = write_dag("exp_dag.json", kSynthDag);
  const fs::path out = fs::temp_directory_path() / "exp_out_a";
  fs::remove_all(out);
  const ExperimentOutcome outcome = run_experiment(tiny_config(dag, out));

  CHECK(outcome.instances == 12);
  for (const char* file :
       {"metrics.csv", "metrics.json", "results.jsonl", "manifest.json",
        "scm.json", "classifier.json", "stats.json", "dag.json"}) {
    CHECK(fs::exists(out / file));
  }
  const nlohmann::json manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("complete").get<bool>());
  CHECK(manifest.at("instances").get<int>() == 12);

  // results.jsonl: two lines per instance, vectors present
  std::istringstream lines(slurp(out / "results.jsonl"));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.at("factual").size() == 2);
    CHECK(j.at("action").size() == 2);
    ++count;
  }
  CHECK(count == 24);

  // histogram bins sum to the number of valid results per method
  const nlohmann::json metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
  for (const auto& block : metrics.at("all")) {
    const std::string method = block.at("method").get<std::string>();
    const int valid = block.at("valid_count").get<int>();
    const std::string hist = slurp(out / "histograms" / ("X1_" + method + ".csv"));
    std::istringstream hs(hist);
    std::string row;
    std::getline(hs, row);  // header
    int total = 0;
    while (std::getline(hs, row)) {
      const auto comma = row.rfind(',');
      total += std::stoi(row.substr(comma + 1));
    }
    CHECK(total == valid);
  }
}

TEST_CASE("experiment outputs are byte-identical across reruns") {
  const fs::path dag = write_dag("exp_dag_det.json", kSynthDag);
  const fs::path out1 = fs::temp_directory_path() / "exp_det_1";
  const fs::path out2 = fs::temp_directory_path() / "exp_det_2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  ExperimentConfig cfg = tiny_config(dag, out1);
  run_experiment(cfg);
  cfg.output_dir = out2.string();
  run_experiment(cfg);
  CHECK(slurp(out1 / "metrics.csv") == slurp(out2 / "metrics.csv"));
  CHECK(slurp(out1 / "results.jsonl") == slurp(out2 / "results.jsonl"));
  CHECK(slurp(out1 / "metrics.json") == slurp(out2 / "metrics.json"));
}

TEST_CASE("worker pool does not change the outputs") {
  const fs::path dag = write_dag("exp_dag_workers.json", kSynthDag);
  const fs::path out1 = fs::temp_directory_path() / "exp_w1";
  const fs::path out2 = fs::temp_directory_path() / "exp_w4";
  fs::remove_all(out1);
  fs::remove_all(out2);
  ExperimentConfig cfg = tiny_config(dag, out1);
  run_experiment(cfg, 1);
  cfg.output_dir = out2.string();
  run_experiment(cfg, 4);
  CHECK(slurp(out1 / "results.jsonl") == slurp(out2 / "results.jsonl"));
  CHECK(slurp(out1 / "metrics.csv") == slurp(out2 / "metrics.csv"));
}

TEST_CASE("evaluation instances come from the held-out split") {
  const fs::path dag = write_dag("exp_dag_split.json", kSynthDag);
  const fs::path out = fs::temp_directory_path() / "exp_split";
  fs::remove_all(out);
  ExperimentConfig cfg = tiny_config(dag, out);
  run_experiment(cfg);

  // reproduce the split and check the selected rows are eval rows
  const DagConfig dagc = load_dag_config(cfg.dag_config_path);
  const DatasetBundle data = load_bundle_data(cfg, dagc);
  std::set<int> eval_rows(data.eval_idx.begin(), data.eval_idx.end());
  std::istringstream lines(slurp(out / "results.jsonl"));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(eval_rows.count(j.at("row").get<int>()) == 1);
  }
}

TEST_CASE("metrics recompute reproduces the run's metrics files") {
  const fs::path dag = write_dag("exp_dag_recompute.json", kSynthDag);
  const fs::path out = fs::temp_directory_path() / "exp_recompute";
  const fs::path redo = fs::temp_directory_path() / "exp_recompute_redo";
  fs::remove_all(out);
  fs::remove_all(redo);
  run_experiment(tiny_config(dag, out));
  recompute_metrics(out, redo);
  CHECK(slurp(out / "metrics.csv") == slurp(redo / "metrics.csv"));
  CHECK(slurp(out / "metrics.json") == slurp(redo / "metrics.json"));
}

TEST_CASE("failures leave a manifest marking the stage") {
  ExperimentConfig cfg;
  cfg.dag_config_path = "/nonexistent/dag.json";
  cfg.output_dir =
      (fs::temp_directory_path() / "exp_fail").string();
  fs::remove_all(cfg.output_dir);
  CHECK_THROWS(run_experiment(cfg));
  const nlohmann::json manifest =
      nlohmann::json::parse(slurp(fs::path(cfg.output_dir) / "manifest.json"));
  CHECK_FALSE(manifest.at("complete").get<bool>());
  CHECK(manifest.at("stage").get<std::string>() == "validate");
}

TEST_CASE("pipeline save/load round-trips predictions") {
  const fs::path dag = write_dag("exp_dag_bundle.json", kSynthDag);
  const fs::path out = fs::temp_directory_path() / "exp_bundle";
  fs::remove_all(out);
  ExperimentConfig cfg = tiny_config(dag, out);
  const DagConfig dagc = load_dag_config(cfg.dag_config_path);
  const DatasetBundle data = load_bundle_data(cfg, dagc);
  const FittedPipeline pipe = fit_pipeline(cfg, dagc, data);
  save_pipeline(pipe, out);
  const FittedPipeline loaded = load_pipeline(out);
  const Eigen::VectorXd x = data.X.row(0).transpose();
  CHECK(pipe.clf.score(x) == loaded.clf.score(x));
  CHECK(pipe.scm.abduct(x) == loaded.scm.abduct(x));
  CHECK(pipe.threshold == loaded.threshold);
}
