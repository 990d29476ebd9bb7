#include "recourse/metrics.hpp"

#include "recourse/rng.hpp"

#include "doctest.h"

using namespace recourse;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<int>(values.size()));
  int i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

StructuralModel exact_linear_scm() {
  CausalGraph g({{"X1"}, {"X2"}}, {{"X1", "X2"}});
  Mlp net(1, ArchSpec::linear());
  net.set_params((Eigen::VectorXd(2) << 1.0, 5.0).finished());
  Standardizer id{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  std::map<std::string, RegressorModel> regs;
  regs.emplace("X2", RegressorModel({"X1"}, net, id, 0.0, 1.0));
  return StructuralModel(g, std::move(regs));
}

}  // namespace

TEST_CASE("mad hand values") {
  CHECK(mad(vec({1, 2, 3, 4, 5})) == 1.0);
  CHECK(mad(vec({7, 7, 7, 7})) == 0.0);
  CHECK(mad(vec({0, 0, 0, 10})) == 0.0);
  CHECK_THROWS_AS(mad(Eigen::VectorXd()), EmptyInput);
}

TEST_CASE("median and quantile") {
  CHECK(median(vec({3, 1, 2})) == 2.0);
  CHECK(median(vec({4, 1, 2, 3})) == 2.5);
  CHECK(quantile(vec({1, 1, 2, 2}), 0.10) == 1.0);
  CHECK(quantile(vec({0, 10}), 0.25) == 2.5);  // linear interpolation
}

TEST_CASE("proximity on identical vectors is zero") {
  const std::vector<NodeKind> kinds{NodeKind::continuous, NodeKind::categorical};
  const auto p = proximity(vec({1.0, 2.0}), vec({1.0, 2.0}), kinds, vec({1.0, 1.0}));
  CHECK(p.continuous == 0.0);
  CHECK(p.categorical == 0.0);
  CHECK(p.has_categorical);
}

TEST_CASE("one continuous feature moved by exactly its MAD scores 1") {
  const std::vector<NodeKind> kinds{NodeKind::continuous};
  const auto p = proximity(vec({2.5}), vec({1.2}), kinds, vec({1.3}));
  CHECK(p.continuous == doctest::Approx(1.0));
  CHECK_FALSE(p.has_categorical);
}

TEST_CASE("one changed categorical of two scores a half") {
  const std::vector<NodeKind> kinds{NodeKind::categorical, NodeKind::categorical};
  const auto p = proximity(vec({1.0, 2.0}), vec({1.0, 3.0}), kinds, vec({1.0, 1.0}));
  CHECK(p.categorical == 0.5);
}

TEST_CASE("sparsity threshold formula") {
  // median 0, MAD 1; off-median deviations {1,1,2,2} -> q10 = 1
  CHECK(sparsity_threshold(vec({-2, -1, 0, 1, 2})) == 1.0);
  // constant-dominated: MAD 0 wins the min
  CHECK(sparsity_threshold(vec({0, 0, 0, 10})) == 0.0);
}

TEST_CASE("sparsity counts strictly-above-threshold changes") {
  const Eigen::VectorXd t = vec({0.3});
  CHECK(sparsity(vec({0.31}), vec({0.0}), t) == 1);
  CHECK(sparsity(vec({0.29}), vec({0.0}), t) == 0);
  CHECK(sparsity(vec({0.0}), vec({0.0}), t) == 0);

  const Eigen::VectorXd t3 = vec({0.1, 0.1, 0.1});
  CHECK(sparsity(vec({1, 1, 1}), vec({0, 0, 0}), t3) == 3);
}

TEST_CASE("distance and cost are weighted L1 norms") {
  CHECK(l1_distance(vec({0.3, -0.4}), vec({0.0, 0.0}), vec({1.0, 1.0})) ==
        doctest::Approx(0.7));
  CHECK(l1_distance(vec({1, 1}), vec({1, 1}), vec({1, 1})) == 0.0);
  CHECK(action_cost(vec({0, 0}), vec({1, 1})) == 0.0);
  CHECK(action_cost(vec({-2, 1}), vec({0.5, 1.0})) == doctest::Approx(2.0));
}

TEST_CASE("cost of a latent action equals the latent-space distance") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd u0 = vec({rng.normal(), rng.normal()});
    const Eigen::VectorXd ucf = vec({rng.normal(), rng.normal()});
    const Eigen::VectorXd scale = vec({0.7, 1.9});
    CHECK(action_cost(ucf - u0, scale) ==
          doctest::Approx(l1_distance(ucf, u0, scale)).epsilon(1e-12));
  }
}

TEST_CASE("causal plausibility hand values and residual cross-check") {
  const StructuralModel scm = exact_linear_scm();
  CHECK(causal_plausibility(scm, vec({0.0, 5.0})) == 0.0);  // on the manifold
  CHECK(causal_plausibility(scm, vec({0.0, 5.7})) == doctest::Approx(0.7));

  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = vec({rng.normal(0, 2), rng.normal(4, 3)});
    const Eigen::VectorXd u = scm.abduct(x);
    CHECK(causal_plausibility(scm, x) ==
          doctest::Approx(std::abs(u[1])).epsilon(1e-9));
  }
}

TEST_CASE("direction gap hand values") {
  const Eigen::VectorXd ones = vec({1, 1});
  CHECK(direction_gap(vec({1, 2}), vec({0, 2}), vec({1, 0}), ones) == 0.0);
  CHECK(direction_gap(vec({1, 0}), vec({0, 0}), vec({-1, 0}), ones) == 2.0);
}

TEST_CASE("continuous proximity is invariant to per-feature rescaling") {
  Rng rng(19);
  const std::vector<NodeKind> kinds{NodeKind::continuous, NodeKind::continuous};
  for (int i = 0; i < 30; ++i) {
    Eigen::MatrixXd train(41, 2);
    for (int r = 0; r < train.rows(); ++r) {
      train(r, 0) = rng.normal(0, 2);
      train(r, 1) = rng.normal(5, 1);
    }
    const Eigen::VectorXd x = train.row(3).transpose();
    const Eigen::VectorXd xcf = train.row(4).transpose();
    const Eigen::VectorXd mads = vec({mad(train.col(0)), mad(train.col(1))});
    const double before = proximity(xcf, x, kinds, mads).continuous;

    const double c = 0.1 + 5.0 * rng.uniform01();
    Eigen::MatrixXd scaled = train;
    scaled.col(0) *= c;
    const Eigen::VectorXd mads2 = vec({mad(scaled.col(0)), mad(scaled.col(1))});
    Eigen::VectorXd x2 = x, xcf2 = xcf;
    x2[0] *= c;
    xcf2[0] *= c;
    const double after = proximity(xcf2, x2, kinds, mads2).continuous;
    CHECK(before == doctest::Approx(after).epsilon(1e-9));
  }
}

TEST_CASE("aggregate medians, deviations and the intersection block") {
  std::vector<InstanceMetrics> base(4), ceils(4);
  // method A valid {0,1,2}; method B valid {1,2,3}
  for (int i = 0; i < 4; ++i) {
    base[static_cast<size_t>(i)].valid = i != 3;
    base[static_cast<size_t>(i)].feasible = true;
    base[static_cast<size_t>(i)].distance = i == 0 ? 1 : i == 1 ? 2 : i == 2 ? 3 : 10;
    ceils[static_cast<size_t>(i)].valid = i != 0;
    ceils[static_cast<size_t>(i)].feasible = i % 2 == 0;
    ceils[static_cast<size_t>(i)].distance = 5;
  }
  const std::vector<double> gaps{0.5, 0.25, 0.75, 0.1};
  const MetricsReport rep = aggregate(base, ceils, gaps);

  CHECK(rep.baseline_all.validity == doctest::Approx(0.75));
  CHECK(rep.ceils_all.validity == doctest::Approx(0.75));
  CHECK(rep.common_count == 2);  // instances {1,2}
  CHECK(rep.baseline_common.valid_count == 2);
  CHECK(rep.direction_gap.count == 2);
  CHECK(rep.direction_gap.median == doctest::Approx(0.5));  // {0.25, 0.75}

  // feasibility = feasible-and-valid / valid
  CHECK(rep.baseline_all.feasibility == doctest::Approx(1.0));
  CHECK(rep.ceils_all.feasibility == doctest::Approx(1.0 / 3.0));

  // distance over baseline's valid set {1,2,3}
  CHECK(rep.baseline_all.distance.median == 2.0);
  CHECK(rep.baseline_all.distance.deviation == 1.0);
}

TEST_CASE("median and deviation of the worked four-value example") {
  const std::vector<double> values{1, 2, 3, 10};
  const std::vector<char> all(4, 1);
  const AggregateValue a = summarize(values, all);
  CHECK(a.median == 2.5);
  CHECK(a.deviation == 1.0);
  CHECK(a.count == 4);
}

TEST_CASE("empty valid sets produce explicit markers") {
  std::vector<InstanceMetrics> base(2), ceils(2);  // nothing valid
  const MetricsReport rep = aggregate(base, ceils, {0.0, 0.0});
  CHECK(rep.baseline_all.distance.count == 0);
  CHECK(std::isnan(rep.baseline_all.distance.median));
  CHECK(std::isnan(rep.baseline_all.feasibility));
  CHECK(rep.common_count == 0);
  const std::string csv = rep.to_csv();
  CHECK(csv.find("nan") == std::string::npos);  // empties stay empty cells
}

TEST_CASE("intersection equal to a method's valid set reproduces its block") {
  Rng rng(31);
  std::vector<InstanceMetrics> base(20), ceils(20);
  for (int i = 0; i < 20; ++i) {
    auto& b = base[static_cast<size_t>(i)];
    b.valid = rng.uniform01() < 0.7;
    b.feasible = rng.uniform01() < 0.5;
    b.distance = rng.uniform(0, 5);
    b.cost = rng.uniform(0, 5);
    b.sparsity = static_cast<double>(rng.below(3));
    ceils[static_cast<size_t>(i)] = b;  // identical valid sets
  }
  std::vector<double> gaps(20, 0.0);
  const MetricsReport rep = aggregate(base, ceils, gaps);
  CHECK(rep.baseline_common.valid_count == rep.baseline_all.valid_count);
  if (rep.baseline_all.valid_count > 0) {
    CHECK(rep.baseline_common.distance.median == rep.baseline_all.distance.median);
    CHECK(rep.baseline_common.distance.deviation ==
          rep.baseline_all.distance.deviation);
    CHECK(rep.baseline_common.cost.median == rep.baseline_all.cost.median);
  }
}

TEST_CASE("report serialization carries both scopes") {
  std::vector<InstanceMetrics> base(2), ceils(2);
  base[0].valid = true;
  ceils[0].valid = true;
  const MetricsReport rep = aggregate(base, ceils, {0.3, 0.0});
  const nlohmann::json j = rep.to_json();
  CHECK(j.at("all").size() == 2);
  CHECK(j.at("intersection").size() == 2);
  CHECK(j.at("common_count").get<int>() == 1);
  const std::string csv = rep.to_csv();
  CHECK(csv.find("baseline") != std::string::npos);
  CHECK(csv.find("ceils") != std::string::npos);
  CHECK(csv.find("intersection") != std::string::npos);
}
