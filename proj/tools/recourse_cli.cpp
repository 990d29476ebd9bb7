#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "recourse/experiment.hpp"

#include "CLI11.hpp"
#include "json_util.hpp"

namespace {

using namespace recourse;

int cmd_synth_gen(const std::string& dataset, int n, std::uint64_t seed,
                  const std::string& out) {
  DatasetBundle bundle;
  if (dataset == "synthetic") {
    bundle = generate_synthetic(n, seed);
  } else if (dataset == "german") {
    bundle = generate_german_style(n, seed);
  } else {
    throw ValidationError("unknown dataset '" + dataset +
                          "' (use synthetic or german)");
  }
  write_csv(bundle, out);
  std::cout << "wrote " << bundle.rows() << " rows to " << out << "\n";
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& dag_path,
            const std::string& label, const std::string& out_dir,
            std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.dag_config_path = dag_path;
  cfg.data.source = DataSpec::Source::csv;
  cfg.data.path = data_path;
  cfg.data.label = label;
  cfg.seed = seed;

  const DagConfig dag = load_dag_config(dag_path);
  DatasetBundle data = load_csv(data_path, dag.graph(), label);
  // Model bundles are fitted on the full dataset.
  data.train_idx.resize(static_cast<size_t>(data.rows()));
  for (int i = 0; i < data.rows(); ++i) data.train_idx[static_cast<size_t>(i)] = i;

  FittedPipeline pipe = fit_pipeline(cfg, dag, data);
  save_pipeline(pipe, out_dir);
  std::cout << "fitted SCM + classifier (train accuracy "
            << pipe.clf.train_accuracy() << "), bundle in " << out_dir << "\n";
  return 0;
}

int cmd_explain(const std::string& bundle_dir, const std::string& data_path,
                int row, const std::string& method, const std::string& label,
                std::uint64_t seed) {
  FittedPipeline pipe = load_pipeline(bundle_dir);
  const CausalGraph g = pipe.dag.graph();
  DatasetBundle data = load_csv(data_path, g, label);
  if (row < 0 || row >= data.rows()) {
    throw ValidationError("row " + std::to_string(row) + " out of range (0.." +
                          std::to_string(data.rows() - 1) + ")");
  }
  const Eigen::VectorXd x0 = data.X.row(row).transpose();

  SearchConfig base;
  base.seed = seed;
  nlohmann::json out = nlohmann::json::array();
  const auto emit = [&](const CounterfactualResult& r) {
    nlohmann::json j;
    j["method"] = r.method == Method::ceils ? "ceils" : "baseline";
    j["target"] = r.target;
    j["valid"] = r.valid;
    j["feasible"] = is_feasible(r.action, pipe.dag.feasibility, 1e-6);
    j["iterations"] = r.iterations;
    nlohmann::json names = nlohmann::json::array();
    for (int v = 0; v < g.size(); ++v) names.push_back(g.node(v).name);
    j["nodes"] = names;
    j["factual"] = recourse::detail::to_json_array(r.factual);
    j["counterfactual"] = recourse::detail::to_json_array(r.counterfactual);
    j["action"] = recourse::detail::to_json_array(r.action);
    out.push_back(j);
  };
  if (method == "baseline" || method == "both") {
    emit(baseline_generate(pipe.scm, pipe.clf, pipe.threshold, x0,
                           pipe.dag.feasibility,
                           pipe.search_for(Method::baseline, base, true)));
  }
  if (method == "ceils" || method == "both") {
    emit(ceils_generate(pipe.scm, pipe.clf, pipe.threshold, x0,
                        pipe.dag.feasibility,
                        pipe.search_for(Method::ceils, base, true)));
  }
  if (out.empty()) {
    throw ValidationError("unknown method '" + method +
                          "' (use baseline, ceils or both)");
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_experiment(const std::string& config_path,
                   const std::optional<std::string>& out_dir,
                   const std::optional<std::uint64_t>& seed, int workers) {
  ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
  if (out_dir) cfg.output_dir = *out_dir;
  if (seed) cfg.seed = *seed;
  ExperimentOutcome outcome = run_experiment(cfg, workers);
  std::cout << outcome.report.to_csv();
  std::cout << "outputs in " << outcome.output_dir.string() << "\n";
  return 0;
}

int cmd_metrics(const std::string& run_dir, const std::string& out_dir) {
  MetricsReport report = recompute_metrics(run_dir, out_dir);
  std::cout << report.to_csv();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causally-feasible counterfactual explanations and recourse"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-gen", "Generate a seeded dataset CSV");
  std::string sg_dataset = "synthetic", sg_out = "data.csv";
  int sg_n = 10000;
  std::uint64_t sg_seed = 0;
  synth->add_option("--dataset", sg_dataset, "synthetic | german");
  synth->add_option("--n", sg_n, "number of rows");
  synth->add_option("--seed", sg_seed, "generator seed");
  synth->add_option("--out", sg_out, "output CSV path")->required();

  auto* fit = app.add_subcommand("fit", "Fit SCM + classifier into a bundle");
  std::string f_data, f_dag, f_label = "label", f_out = "bundle";
  std::uint64_t f_seed = 0;
  fit->add_option("--data", f_data, "dataset CSV")->required();
  fit->add_option("--dag", f_dag, "DAG config JSON")->required();
  fit->add_option("--label", f_label, "label column name");
  fit->add_option("--out", f_out, "bundle directory");
  fit->add_option("--seed", f_seed, "training seed");

  auto* explain = app.add_subcommand("explain", "Explain one CSV row");
  std::string e_bundle, e_data, e_method = "both", e_label = "label";
  int e_row = 0;
  std::uint64_t e_seed = 0;
  explain->add_option("--bundle", e_bundle, "fitted bundle directory")->required();
  explain->add_option("--data", e_data, "dataset CSV")->required();
  explain->add_option("--row", e_row, "0-based data row")->required();
  explain->add_option("--method", e_method, "baseline | ceils | both");
  explain->add_option("--label", e_label, "label column name");
  explain->add_option("--seed", e_seed, "search seed");

  auto* experiment = app.add_subcommand("experiment", "Run a full experiment");
  std::string x_config;
  std::string x_out;
  std::uint64_t x_seed = 0;
  bool x_seed_set = false, x_out_set = false;
  int x_workers = 1;
  experiment->add_option("--config", x_config, "experiment config JSON")->required();
  experiment->add_option("--output-dir", x_out, "override output directory")
      ->each([&](const std::string&) { x_out_set = true; });
  experiment->add_option("--seed", x_seed, "override seed")
      ->each([&](const std::string&) { x_seed_set = true; });
  experiment->add_option("--workers", x_workers, "worker threads (default 1)");

  auto* metrics = app.add_subcommand("metrics", "Recompute metrics from results.jsonl");
  std::string m_run, m_out;
  metrics->add_option("--run-dir", m_run, "experiment output directory")->required();
  metrics->add_option("--out-dir", m_out, "where to write metrics files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth_gen(sg_dataset, sg_n, sg_seed, sg_out);
    if (fit->parsed()) return cmd_fit(f_data, f_dag, f_label, f_out, f_seed);
    if (explain->parsed()) {
      return cmd_explain(e_bundle, e_data, e_row, e_method, e_label, e_seed);
    }
    if (experiment->parsed()) {
      return cmd_experiment(
          x_config, x_out_set ? std::optional<std::string>(x_out) : std::nullopt,
          x_seed_set ? std::optional<std::uint64_t>(x_seed) : std::nullopt,
          x_workers);
    }
    if (metrics->parsed()) {
      return cmd_metrics(m_run, m_out.empty() ? m_run : m_out);
    }
  } catch (const recourse::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
