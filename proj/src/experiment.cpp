#include "recourse/experiment.hpp"

#include <array>
#include <atomic>
#include <charconv>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "recourse/rng.hpp"

#include "json_util.hpp"

namespace recourse {

namespace fs = std::filesystem;
using detail::from_json_array;
using detail::to_json_array;

namespace {

TrainConfig train_from_json(const nlohmann::json& j) {
  TrainConfig t;
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.seed = j.value("seed", t.seed);
  t.l2 = j.value("l2", t.l2);
  t.momentum = j.value("momentum", t.momentum);
  return t;
}

nlohmann::json train_to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"epochs", t.epochs},
          {"batch_size", t.batch_size},       {"seed", t.seed},
          {"l2", t.l2},                       {"momentum", t.momentum}};
}

ModelSpec model_from_json(const nlohmann::json& j, ModelSpec defaults) {
  if (j.contains("architecture")) {
    defaults.arch = arch_from_json(j.at("architecture"));
  }
  if (j.contains("train")) defaults.train = train_from_json(j.at("train"));
  return defaults;
}

nlohmann::json model_to_json(const ModelSpec& m) {
  return {{"architecture", arch_to_json(m.arch)}, {"train", train_to_json(m.train)}};
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.name = j.value("name", cfg.name);
  cfg.dag_config_path = j.at("dag_config").get<std::string>();
  if (j.contains("data")) {
    const auto& d = j.at("data");
    const std::string source = d.value("source", "synthetic");
    if (source == "synthetic") {
      cfg.data.source = DataSpec::Source::synthetic;
    } else if (source == "german_synthetic") {
      cfg.data.source = DataSpec::Source::german_synthetic;
    } else if (source == "csv") {
      cfg.data.source = DataSpec::Source::csv;
      cfg.data.path = d.at("path").get<std::string>();
    } else {
      throw ParseError("unknown data source '" + source + "'");
    }
    cfg.data.n = d.value("n", cfg.data.n);
    cfg.data.label = d.value("label", cfg.data.label);
  }
  cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
  cfg.eval_instances = j.value("eval_instances", cfg.eval_instances);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("threshold")) {
    const auto& t = j.at("threshold");
    const std::string policy = t.value("policy", "fixed");
    if (policy == "fixed") {
      cfg.threshold.kind = ThresholdPolicy::Kind::fixed;
    } else if (policy == "median_score") {
      cfg.threshold.kind = ThresholdPolicy::Kind::median_score;
    } else {
      throw ParseError("unknown threshold policy '" + policy + "'");
    }
    cfg.threshold.value = t.value("value", cfg.threshold.value);
  }
  if (j.contains("regressor")) {
    cfg.regressor = model_from_json(j.at("regressor"), cfg.regressor);
  }
  if (j.contains("classifier")) {
    cfg.classifier = model_from_json(j.at("classifier"), cfg.classifier);
  }
  if (j.contains("search")) {
    const auto& s = j.at("search");
    cfg.search.lambda0 = s.value("lambda0", cfg.search.lambda0);
    cfg.search.lambda_growth = s.value("growth", cfg.search.lambda_growth);
    cfg.search.max_stages = s.value("stages", cfg.search.max_stages);
    cfg.search.max_iters_per_stage = s.value("iters", cfg.search.max_iters_per_stage);
    cfg.search.step_size = s.value("step", cfg.search.step_size);
    cfg.search.validity_margin = s.value("margin", cfg.search.validity_margin);
    cfg.search.restarts = s.value("restarts", cfg.search.restarts);
    cfg.domain_from_data = s.value("domain_from_data", cfg.domain_from_data);
  }
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  ExperimentConfig cfg = from_json(j);
  // Referenced files resolve relative to the config file's directory.
  const fs::path base = fs::path(path).parent_path();
  const auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) {
      p = (base / p).string();
    }
  };
  resolve(cfg.dag_config_path);
  resolve(cfg.data.path);
  cfg.validate();
  return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json d;
  switch (data.source) {
    case DataSpec::Source::synthetic: d["source"] = "synthetic"; break;
    case DataSpec::Source::german_synthetic: d["source"] = "german_synthetic"; break;
    case DataSpec::Source::csv: d["source"] = "csv"; break;
  }
  d["n"] = data.n;
  if (!data.path.empty()) d["path"] = data.path;
  d["label"] = data.label;

  nlohmann::json j;
  j["name"] = name;
  j["dag_config"] = dag_config_path;
  j["data"] = d;
  j["train_fraction"] = train_fraction;
  j["eval_instances"] = eval_instances;
  j["seed"] = seed;
  j["threshold"] = {
      {"policy",
       threshold.kind == ThresholdPolicy::Kind::fixed ? "fixed" : "median_score"},
      {"value", threshold.value}};
  j["regressor"] = model_to_json(regressor);
  j["classifier"] = model_to_json(classifier);
  j["search"] = {{"lambda0", search.lambda0},
                 {"growth", search.lambda_growth},
                 {"stages", search.max_stages},
                 {"iters", search.max_iters_per_stage},
                 {"step", search.step_size},
                 {"margin", search.validity_margin},
                 {"restarts", search.restarts},
                 {"domain_from_data", domain_from_data}};
  j["output_dir"] = output_dir;
  return j;
}

void ExperimentConfig::validate() const {
  if (dag_config_path.empty()) throw ValidationError("dag_config is required");
  if (!fs::exists(dag_config_path)) {
    throw ValidationError("dag_config '" + dag_config_path + "' does not exist");
  }
  if (data.source == DataSpec::Source::csv && !data.path.empty() &&
      !fs::exists(data.path)) {
    throw ValidationError("dataset '" + data.path + "' does not exist");
  }
  if (eval_instances <= 0) throw ValidationError("eval_instances must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train_fraction must be in (0, 1)");
  }
  if (data.source == DataSpec::Source::csv && data.path.empty()) {
    throw ValidationError("csv data source needs a path");
  }
  if (data.source != DataSpec::Source::csv && data.n < 10) {
    throw ValidationError("generated datasets need n >= 10");
  }
  if (threshold.kind == ThresholdPolicy::Kind::fixed &&
      !(threshold.value > 0.0 && threshold.value < 1.0)) {
    throw ValidationError("fixed threshold must be in (0, 1)");
  }
  regressor.train.validate();
  classifier.train.validate();
  search.validate();
}

Eigen::VectorXd AxisStats::mad_fallback() const {
  Eigen::VectorXd out = mad;
  for (int i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0)) out[i] = 1.0;
  }
  return out;
}

Eigen::VectorXd AxisStats::inv_std() const {
  Eigen::VectorXd out(stddev.size());
  for (int i = 0; i < out.size(); ++i) {
    out[i] = stddev[i] > 1e-12 ? 1.0 / stddev[i] : 1.0;
  }
  return out;
}

AxisStats AxisStats::compute(const Eigen::MatrixXd& rows) {
  AxisStats s;
  const int d = static_cast<int>(rows.cols());
  s.mean.resize(d);
  s.stddev.resize(d);
  s.mad.resize(d);
  s.lo.resize(d);
  s.hi.resize(d);
  s.sparsity_thresholds.resize(d);
  for (int c = 0; c < d; ++c) {
    s.mean[c] = rows.col(c).mean();
    s.stddev[c] = std::sqrt((rows.col(c).array() - s.mean[c]).square().sum() /
                            static_cast<double>(rows.rows()));
    s.mad[c] = recourse::mad(rows.col(c));
    s.lo[c] = rows.col(c).minCoeff();
    s.hi[c] = rows.col(c).maxCoeff();
    s.sparsity_thresholds[c] = sparsity_threshold(rows.col(c));
  }
  return s;
}

nlohmann::json AxisStats::to_json() const {
  return {{"mean", to_json_array(mean)},
          {"stddev", to_json_array(stddev)},
          {"mad", to_json_array(mad)},
          {"lo", to_json_array(lo)},
          {"hi", to_json_array(hi)},
          {"sparsity_thresholds", to_json_array(sparsity_thresholds)}};
}

AxisStats AxisStats::from_json(const nlohmann::json& j) {
  AxisStats s;
  s.mean = from_json_array(j.at("mean"));
  s.stddev = from_json_array(j.at("stddev"));
  s.mad = from_json_array(j.at("mad"));
  s.lo = from_json_array(j.at("lo"));
  s.hi = from_json_array(j.at("hi"));
  s.sparsity_thresholds = from_json_array(j.at("sparsity_thresholds"));
  return s;
}

SearchConfig FittedPipeline::search_for(Method m, const SearchConfig& base,
                                        bool domain_from_data) const {
  const AxisStats& stats = m == Method::ceils ? latent_stats : feature_stats;
  SearchConfig cfg = base;
  const Eigen::VectorXd mads = stats.mad_fallback();
  cfg.distance_weights = mads.cwiseInverse();
  cfg.step_scales = mads;
  if (domain_from_data) {
    cfg.lower_bounds = stats.lo;
    cfg.upper_bounds = stats.hi;
  } else {
    cfg.lower_bounds.resize(0);
    cfg.upper_bounds.resize(0);
  }
  return cfg;
}

DatasetBundle load_bundle_data(const ExperimentConfig& cfg, const DagConfig& dag) {
  DatasetBundle data;
  switch (cfg.data.source) {
    case DataSpec::Source::synthetic:
      data = generate_synthetic(cfg.data.n, derive_seed(cfg.seed, 0));
      break;
    case DataSpec::Source::german_synthetic:
      data = generate_german_style(cfg.data.n, derive_seed(cfg.seed, 0));
      break;
    case DataSpec::Source::csv:
      data = load_csv(cfg.data.path, dag.graph(), cfg.data.label);
      break;
  }
  const CausalGraph g = dag.graph();
  if (static_cast<int>(data.columns.size()) != g.size()) {
    throw MissingColumn("dataset columns do not cover the DAG nodes");
  }
  for (int v = 0; v < g.size(); ++v) {
    if (data.columns[static_cast<size_t>(v)] != g.node(v).name) {
      throw MissingColumn("dataset column order does not match the DAG");
    }
  }
  split_train_eval(data, cfg.train_fraction, derive_seed(cfg.seed, 1));
  return data;
}

FittedPipeline fit_pipeline(const ExperimentConfig& cfg, const DagConfig& dag,
                            const DatasetBundle& data) {
  const CausalGraph g = dag.graph();
  dag.feasibility.validate(g);

  const Eigen::MatrixXd train_X = data.train_rows();
  const Eigen::VectorXi train_y = data.train_labels();

  ScmFitOptions scm_opts;
  scm_opts.architecture = cfg.regressor.arch;
  scm_opts.train = cfg.regressor.train;
  scm_opts.train.seed = derive_seed(cfg.seed, 2 + cfg.regressor.train.seed);
  StructuralModel scm = fit_scm(train_X, g, scm_opts);

  std::vector<std::string> names;
  std::vector<bool> passthrough;
  for (int v = 0; v < g.size(); ++v) {
    names.push_back(g.node(v).name);
    passthrough.push_back(g.node(v).kind == NodeKind::categorical);
  }
  TrainConfig clf_train = cfg.classifier.train;
  clf_train.seed = derive_seed(cfg.seed, 3 + cfg.classifier.train.seed);
  ClassifierModel clf = fit_classifier(train_X, train_y, names,
                                       cfg.classifier.arch, clf_train,
                                       passthrough);

  double threshold = cfg.threshold.value;
  if (cfg.threshold.kind == ThresholdPolicy::Kind::median_score) {
    threshold = median(clf.score_batch(train_X));
  }

  FittedPipeline p{dag, std::move(scm), std::move(clf), threshold,
                   AxisStats::compute(train_X), AxisStats{}};
  p.latent_stats = AxisStats::compute(p.scm.abduct_rows(train_X));
  return p;
}

void save_pipeline(const FittedPipeline& p, const fs::path& dir) {
  fs::create_directories(dir);
  const CausalGraph g = p.dag.graph();
  nlohmann::json dag_j;
  dag_j["nodes"] = nlohmann::json::array();
  for (int v = 0; v < g.size(); ++v) {
    dag_j["nodes"].push_back(
        {{"name", g.node(v).name},
         {"kind", g.node(v).kind == NodeKind::categorical ? "categorical"
                                                          : "continuous"},
         {"class", to_string(p.dag.feasibility.classes[static_cast<size_t>(v)])},
         {"monotone",
          to_string(p.dag.feasibility.monotone[static_cast<size_t>(v)])}});
  }
  dag_j["edges"] = nlohmann::json::array();
  for (const auto& [s, d] : g.edges()) {
    dag_j["edges"].push_back({g.node(s).name, g.node(d).name});
  }

  std::ofstream(dir / "dag.json") << dag_j.dump(2) << '\n';
  std::ofstream(dir / "scm.json") << p.scm.to_json().dump(2) << '\n';
  std::ofstream(dir / "classifier.json") << p.clf.to_json().dump(2) << '\n';
  nlohmann::json stats;
  stats["threshold"] = p.threshold;
  stats["feature_stats"] = p.feature_stats.to_json();
  stats["latent_stats"] = p.latent_stats.to_json();
  std::ofstream(dir / "stats.json") << stats.dump(2) << '\n';
}

namespace {

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
  return j;
}

DagConfig dag_config_from_json(const nlohmann::json& j) {
  DagConfig cfg;
  for (const auto& n : j.at("nodes")) {
    NodeSpec spec;
    spec.name = n.at("name").get<std::string>();
    spec.kind = n.value("kind", "continuous") == "categorical"
                    ? NodeKind::categorical
                    : NodeKind::continuous;
    cfg.nodes.push_back(spec);
    cfg.feasibility.classes.push_back(
        action_class_from_string(n.value("class", "actionable")));
    cfg.feasibility.monotone.push_back(
        monotonicity_from_string(n.value("monotone", "free")));
  }
  for (const auto& e : j.at("edges")) {
    cfg.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  }
  return cfg;
}

}  // namespace

FittedPipeline load_pipeline(const fs::path& dir) {
  DagConfig dag = dag_config_from_json(read_json_file(dir / "dag.json"));
  const CausalGraph g = dag.graph();
  dag.feasibility.validate(g);
  StructuralModel scm = StructuralModel::from_json(read_json_file(dir / "scm.json"));
  ClassifierModel clf = ClassifierModel::from_json(read_json_file(dir / "classifier.json"));
  const nlohmann::json stats = read_json_file(dir / "stats.json");
  FittedPipeline p{std::move(dag), std::move(scm), std::move(clf),
                   stats.at("threshold").get<double>(),
                   AxisStats::from_json(stats.at("feature_stats")),
                   AxisStats::from_json(stats.at("latent_stats"))};
  return p;
}

namespace {

struct InstanceRecord {
  int index = 0;
  int row = 0;
  CounterfactualResult baseline;
  CounterfactualResult ceils;
};

void check_result_invariants(const CounterfactualResult& r,
                             const StructuralModel& scm,
                             const ClassifierModel& clf, double threshold) {
  const double tol = 1e-9;
  if (r.method == Method::ceils) {
    const Eigen::VectorXd rebuilt =
        scm.forward(r.latent_factual + r.action);
    if ((rebuilt - r.counterfactual).cwiseAbs().maxCoeff() > tol) {
      throw RuntimeFailure("latent-space result is inconsistent with forward map");
    }
    if ((r.latent_counterfactual - (r.latent_factual + r.action))
            .cwiseAbs()
            .maxCoeff() > tol) {
      throw RuntimeFailure("latent counterfactual does not equal u0 + action");
    }
  } else {
    const Eigen::VectorXd expost =
        scm.abduct(r.counterfactual) - scm.abduct(r.factual);
    if ((expost - r.action).cwiseAbs().maxCoeff() > tol) {
      throw RuntimeFailure("baseline action is not the ex-post action");
    }
  }
  const bool flips =
      clf.classify(r.counterfactual, threshold) == r.target;
  if (r.valid != flips) {
    throw RuntimeFailure("validity flag disagrees with the classifier");
  }
}

nlohmann::json result_to_json(const InstanceRecord& rec,
                              const CounterfactualResult& r, bool feasible) {
  nlohmann::json j;
  j["instance"] = rec.index;
  j["row"] = rec.row;
  j["method"] = r.method == Method::ceils ? "ceils" : "baseline";
  j["target"] = r.target;
  j["valid"] = r.valid;
  j["feasible"] = feasible;
  j["iterations"] = r.iterations;
  j["factual"] = to_json_array(r.factual);
  j["counterfactual"] = to_json_array(r.counterfactual);
  j["latent_factual"] = to_json_array(r.latent_factual);
  j["latent_counterfactual"] = to_json_array(r.latent_counterfactual);
  j["action"] = to_json_array(r.action);
  return j;
}

InstanceMetrics compute_instance_metrics(const CounterfactualResult& r,
                                         const FittedPipeline& p,
                                         const std::vector<NodeKind>& kinds) {
  InstanceMetrics m;
  m.valid = r.valid;
  m.feasible = is_feasible(r.action, p.dag.feasibility, 1e-6);
  const ProximityResult prox = proximity(r.counterfactual, r.factual, kinds,
                                         p.feature_stats.mad_fallback());
  m.proximity_cont = prox.continuous;
  m.proximity_cat = prox.categorical;
  m.has_categorical = prox.has_categorical;
  m.sparsity = sparsity(r.counterfactual, r.factual,
                        p.feature_stats.sparsity_thresholds);
  m.sparsity_actions = sparsity(r.action, Eigen::VectorXd::Zero(r.action.size()),
                                p.latent_stats.sparsity_thresholds);
  m.distance = l1_distance(r.counterfactual, r.factual, p.feature_stats.inv_std());
  m.cost = action_cost(r.action, p.latent_stats.inv_std());
  m.causal_plausibility =
      causal_plausibility(p.scm, r.counterfactual, p.feature_stats.inv_std());
  return m;
}

std::string histogram_csv(const std::vector<double>& values) {
  constexpr int kBins = 30;
  double maxabs = 0.0;
  for (double v : values) maxabs = std::max(maxabs, std::abs(v));
  const double scale = maxabs > 0.0 ? maxabs : 1.0;
  std::array<int, kBins> counts{};
  for (double v : values) {
    const double r = v / scale;  // in [-1, 1]
    int idx = static_cast<int>(std::floor((r + 1.0) * 0.5 * kBins));
    idx = std::clamp(idx, 0, kBins - 1);
    ++counts[static_cast<size_t>(idx)];
  }
  std::ostringstream out;
  out << "bin_left,bin_right,count\n";
  char buf[32];
  for (int k = 0; k < kBins; ++k) {
    const double left = -1.0 + 2.0 * k / kBins;
    const double right = -1.0 + 2.0 * (k + 1) / kBins;
    auto r1 = std::to_chars(buf, buf + sizeof(buf), left);
    out.write(buf, r1.ptr - buf);
    out << ',';
    auto r2 = std::to_chars(buf, buf + sizeof(buf), right);
    out.write(buf, r2.ptr - buf);
    out << ',' << counts[static_cast<size_t>(k)] << '\n';
  }
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, int workers) {
  if (workers < 1) throw ValidationError("worker count must be >= 1");
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  fs::create_directories(out_dir / "histograms");

  nlohmann::json manifest;
  manifest["name"] = cfg.name;
  manifest["config"] = cfg.to_json();
  manifest["version"] = "0.1.0";
  manifest["complete"] = false;
  std::string stage = "validate";

  try {
    cfg.validate();
    stage = "load_config";
    const DagConfig dag = load_dag_config(cfg.dag_config_path);
    const CausalGraph g = dag.graph();

    stage = "load_data";
    DatasetBundle data = load_bundle_data(cfg, dag);

    stage = "fit";
    FittedPipeline pipe = fit_pipeline(cfg, dag, data);
    save_pipeline(pipe, out_dir);

    manifest["context"] = {
        {"nodes", nlohmann::json::array()},
        {"threshold", pipe.threshold},
        {"train_rows", static_cast<int>(data.train_idx.size())},
        {"eval_rows", static_cast<int>(data.eval_idx.size())},
        {"classifier_train_accuracy", pipe.clf.train_accuracy()}};
    for (int v = 0; v < g.size(); ++v) {
      manifest["context"]["nodes"].push_back(g.node(v).name);
    }

    stage = "select_instances";
    std::vector<int> pool = data.eval_idx;
    Rng rng(derive_seed(cfg.seed, 4));
    rng.shuffle(pool);
    int count = cfg.eval_instances;
    if (count > static_cast<int>(pool.size())) {
      std::cerr << "warning: only " << pool.size()
                << " held-out rows available, capping eval_instances\n";
      count = static_cast<int>(pool.size());
    }
    std::vector<int> chosen(pool.begin(), pool.begin() + count);
    std::sort(chosen.begin(), chosen.end());

    stage = "generate";
    const SearchConfig search_base =
        pipe.search_for(Method::baseline, cfg.search, cfg.domain_from_data);
    const SearchConfig search_latent =
        pipe.search_for(Method::ceils, cfg.search, cfg.domain_from_data);

    std::vector<InstanceRecord> records(chosen.size());
    std::atomic<size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;
    auto work = [&]() {
      for (;;) {
        const size_t i = cursor.fetch_add(1);
        if (i >= chosen.size() || failed.load()) break;
        try {
          InstanceRecord rec;
          rec.index = static_cast<int>(i);
          rec.row = chosen[i];
          const Eigen::VectorXd x0 = data.X.row(rec.row).transpose();
          const int target = 1 - pipe.clf.classify(x0, pipe.threshold);
          SearchConfig sb = search_base;
          SearchConfig sc = search_latent;
          sb.seed = derive_seed(cfg.seed, 100000 + static_cast<std::uint64_t>(i));
          sc.seed = sb.seed;
          rec.baseline = baseline_generate(pipe.scm, pipe.clf, pipe.threshold,
                                           x0, dag.feasibility, sb, target);
          rec.ceils = ceils_generate(pipe.scm, pipe.clf, pipe.threshold, x0,
                                     dag.feasibility, sc, target);
          records[i] = std::move(rec);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          failed.store(true);
          failure = e.what();
          break;
        }
      }
    };
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < workers; ++w) threads.emplace_back(work);
      for (auto& t : threads) t.join();
    }
    if (failed.load()) throw RuntimeFailure("generation failed: " + failure);

    stage = "metrics";
    std::vector<NodeKind> kinds;
    for (int v = 0; v < g.size(); ++v) kinds.push_back(g.node(v).kind);
    std::vector<InstanceMetrics> base_metrics, ceils_metrics;
    std::vector<double> gaps;
    std::ostringstream results;
    for (const auto& rec : records) {
      check_result_invariants(rec.baseline, pipe.scm, pipe.clf, pipe.threshold);
      check_result_invariants(rec.ceils, pipe.scm, pipe.clf, pipe.threshold);
      InstanceMetrics bm = compute_instance_metrics(rec.baseline, pipe, kinds);
      InstanceMetrics cm = compute_instance_metrics(rec.ceils, pipe, kinds);
      gaps.push_back(direction_gap(rec.baseline.counterfactual, rec.baseline.factual,
                                   rec.ceils.action, pipe.feature_stats.inv_std()));
      results << result_to_json(rec, rec.baseline, bm.feasible).dump() << '\n';
      results << result_to_json(rec, rec.ceils, cm.feasible).dump() << '\n';
      base_metrics.push_back(bm);
      ceils_metrics.push_back(cm);
    }
    write_text(out_dir / "results.jsonl", results.str());

    MetricsReport report = aggregate(base_metrics, ceils_metrics, gaps);
    write_text(out_dir / "metrics.csv", report.to_csv());
    write_text(out_dir / "metrics.json", report.to_json().dump(2) + "\n");

    stage = "histograms";
    for (int v = 0; v < g.size(); ++v) {
      for (const auto method : {Method::baseline, Method::ceils}) {
        std::vector<double> values;
        for (const auto& rec : records) {
          const auto& r = method == Method::ceils ? rec.ceils : rec.baseline;
          if (r.valid) values.push_back(r.action[v]);
        }
        const std::string name = g.node(v).name + std::string("_") +
                                 (method == Method::ceils ? "ceils" : "baseline") +
                                 ".csv";
        write_text(out_dir / "histograms" / name, histogram_csv(values));
      }
    }

    manifest["complete"] = true;
    manifest["stage"] = "done";
    manifest["instances"] = static_cast<int>(records.size());
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

    return {std::move(report), out_dir, static_cast<int>(records.size())};
  } catch (...) {
    manifest["complete"] = false;
    manifest["stage"] = stage;
    try {
      write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (...) {
      // keep the original error
    }
    throw;
  }
}

MetricsReport recompute_metrics(const fs::path& run_dir, const fs::path& out_dir) {
  FittedPipeline pipe = load_pipeline(run_dir);
  const CausalGraph g = pipe.dag.graph();
  std::vector<NodeKind> kinds;
  for (int v = 0; v < g.size(); ++v) kinds.push_back(g.node(v).kind);

  std::ifstream in(run_dir / "results.jsonl");
  if (!in) throw ValidationError("cannot open results.jsonl in '" + run_dir.string() + "'");
  std::map<int, CounterfactualResult> base_by_idx, ceils_by_idx;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("results.jsonl: ") + e.what());
    }
    CounterfactualResult r;
    r.factual = from_json_array(j.at("factual"));
    r.counterfactual = from_json_array(j.at("counterfactual"));
    r.latent_factual = from_json_array(j.at("latent_factual"));
    r.latent_counterfactual = from_json_array(j.at("latent_counterfactual"));
    r.action = from_json_array(j.at("action"));
    r.valid = j.at("valid").get<bool>();
    r.target = j.at("target").get<int>();
    r.iterations = j.at("iterations").get<int>();
    const std::string method = j.at("method").get<std::string>();
    r.method = method == "ceils" ? Method::ceils : Method::baseline;
    const int idx = j.at("instance").get<int>();
    (r.method == Method::ceils ? ceils_by_idx : base_by_idx)[idx] = r;
  }
  if (base_by_idx.size() != ceils_by_idx.size()) {
    throw ValidationError("results.jsonl does not pair both methods per instance");
  }

  std::vector<InstanceMetrics> base_metrics, ceils_metrics;
  std::vector<double> gaps;
  for (const auto& [idx, br] : base_by_idx) {
    const auto it = ceils_by_idx.find(idx);
    if (it == ceils_by_idx.end()) {
      throw ValidationError("instance " + std::to_string(idx) + " lacks a ceils record");
    }
    base_metrics.push_back(compute_instance_metrics(br, pipe, kinds));
    ceils_metrics.push_back(compute_instance_metrics(it->second, pipe, kinds));
    gaps.push_back(direction_gap(br.counterfactual, br.factual, it->second.action,
                                 pipe.feature_stats.inv_std()));
  }
  MetricsReport report = aggregate(base_metrics, ceils_metrics, gaps);
  fs::create_directories(out_dir);
  write_text(out_dir / "metrics.csv", report.to_csv());
  write_text(out_dir / "metrics.json", report.to_json().dump(2) + "\n");
  return report;
}

}  // namespace recourse
