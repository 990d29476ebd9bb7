#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "recourse/cf_search.hpp"
#include "recourse/dataset.hpp"
#include "recourse/metrics.hpp"

#include "json.hpp"

namespace recourse {

struct DataSpec {
  enum class Source { synthetic, german_synthetic, csv };
  Source source = Source::synthetic;
  int n = 10000;           // for generated sources
  std::string path;        // for csv
  std::string label = "label";
};

struct ThresholdPolicy {
  enum class Kind { fixed, median_score };
  Kind kind = Kind::fixed;
  double value = 0.5;
};

struct ModelSpec {
  ArchSpec arch;
  TrainConfig train;

  static ModelSpec linear_regressor() { return {ArchSpec::linear(), {}}; }
  static ModelSpec default_classifier() {
    return {ArchSpec::make_mlp({16, 16}, Activation::relu), {}};
  }
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string dag_config_path;
  DataSpec data;
  double train_fraction = 0.8;
  int eval_instances = 100;
  std::uint64_t seed = 0;
  ThresholdPolicy threshold;
  ModelSpec regressor = ModelSpec::linear_regressor();  // per-node SCM regressors
  ModelSpec classifier = ModelSpec::default_classifier();
  SearchConfig search;   // weights/scales/bounds are filled per space
  bool domain_from_data = true;  // clamp searches to the training data range
  std::string output_dir = "out";

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_json_file(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
};

// Per-axis statistics computed on the training split; used for search
// weights, metric scalings and sparsity thresholds.
struct AxisStats {
  Eigen::VectorXd mean, stddev, mad, lo, hi, sparsity_thresholds;

  Eigen::VectorXd mad_fallback() const;     // MAD with 1.0 where it is 0
  Eigen::VectorXd inv_std() const;          // 1/std (std has its own fallback)
  static AxisStats compute(const Eigen::MatrixXd& rows);
  nlohmann::json to_json() const;
  static AxisStats from_json(const nlohmann::json& j);
};

// Everything fitted for a dataset + DAG config: SCM, classifier, decision
// threshold and the feature/latent statistics.
struct FittedPipeline {
  DagConfig dag;
  StructuralModel scm;
  ClassifierModel clf;
  double threshold = 0.5;
  AxisStats feature_stats;
  AxisStats latent_stats;

  SearchConfig search_for(Method m, const SearchConfig& base,
                          bool domain_from_data) const;
};

DatasetBundle load_bundle_data(const ExperimentConfig& cfg, const DagConfig& dag);

FittedPipeline fit_pipeline(const ExperimentConfig& cfg, const DagConfig& dag,
                            const DatasetBundle& data);

void save_pipeline(const FittedPipeline& p, const std::filesystem::path& dir);
FittedPipeline load_pipeline(const std::filesystem::path& dir);

struct ExperimentOutcome {
  MetricsReport report;
  std::filesystem::path output_dir;
  int instances = 0;
};

// Full run: fit on the training split, generate baseline and latent-space
// counterfactuals for held-out instances, compute the metric suite and write
// metrics.csv/json, results.jsonl, per-feature action histograms and
// manifest.json. Identical configs produce byte-identical outputs.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, int workers = 1);

// Recomputes the metric suite from a previous run's output directory.
MetricsReport recompute_metrics(const std::filesystem::path& run_dir,
                                const std::filesystem::path& out_dir);

}  // namespace recourse
