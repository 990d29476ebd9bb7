#include "recourse/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace recourse {

double median(Eigen::VectorXd values) {
  if (values.size() == 0) throw EmptyInput("median of empty vector");
  std::sort(values.data(), values.data() + values.size());
  const int n = static_cast<int>(values.size());
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mad(const Eigen::VectorXd& values) {
  if (values.size() == 0) throw EmptyInput("mad of empty vector");
  const double m = median(values);
  return median((values.array() - m).abs().matrix());
}

double quantile(Eigen::VectorXd values, double q) {
  if (values.size() == 0) throw EmptyInput("quantile of empty vector");
  if (q < 0.0 || q > 1.0) throw ValidationError("quantile level must be in [0,1]");
  std::sort(values.data(), values.data() + values.size());
  const int n = static_cast<int>(values.size());
  const double pos = q * static_cast<double>(n - 1);
  const int lo = static_cast<int>(std::floor(pos));
  const int hi = static_cast<int>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ProximityResult proximity(const Eigen::VectorXd& xcf, const Eigen::VectorXd& x,
                          const std::vector<NodeKind>& kinds,
                          const Eigen::VectorXd& mads) {
  const int d = static_cast<int>(x.size());
  if (xcf.size() != d || static_cast<int>(kinds.size()) != d ||
      mads.size() != d) {
    throw ShapeMismatch("proximity inputs are not aligned");
  }
  ProximityResult out;
  int n_cont = 0, n_cat = 0;
  for (int p = 0; p < d; ++p) {
    if (kinds[static_cast<size_t>(p)] == NodeKind::categorical) {
      out.categorical += xcf[p] != x[p] ? 1.0 : 0.0;
      ++n_cat;
    } else {
      if (!(mads[p] > 0.0)) throw ValidationError("MAD must be positive after fallback");
      out.continuous += std::abs(xcf[p] - x[p]) / mads[p];
      ++n_cont;
    }
  }
  if (n_cont > 0) out.continuous /= static_cast<double>(n_cont);
  if (n_cat > 0) {
    out.categorical /= static_cast<double>(n_cat);
    out.has_categorical = true;
  }
  return out;
}

double sparsity_threshold(const Eigen::VectorXd& feature_values) {
  if (feature_values.size() == 0) throw EmptyInput("empty feature column");
  const double feature_mad = mad(feature_values);
  const double med = median(feature_values);
  std::vector<double> off_median;
  for (int i = 0; i < feature_values.size(); ++i) {
    if (feature_values[i] != med) off_median.push_back(feature_values[i]);
  }
  if (off_median.empty()) return feature_mad;  // constant feature: t = 0
  Eigen::VectorXd tilde =
      Eigen::Map<Eigen::VectorXd>(off_median.data(),
                                  static_cast<int>(off_median.size()));
  const double tilde_med = median(tilde);
  const double q10 = quantile((tilde.array() - tilde_med).abs().matrix(), 0.10);
  return std::min(feature_mad, q10);
}

int sparsity(const Eigen::VectorXd& xcf, const Eigen::VectorXd& x,
             const Eigen::VectorXd& thresholds) {
  if (xcf.size() != x.size() || thresholds.size() != x.size()) {
    throw ShapeMismatch("sparsity inputs are not aligned");
  }
  int count = 0;
  for (int p = 0; p < x.size(); ++p) {
    if (std::abs(xcf[p] - x[p]) > thresholds[p]) ++count;
  }
  return count;
}

double l1_distance(const Eigen::VectorXd& xcf, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& inv_scale) {
  if (xcf.size() != x.size() || inv_scale.size() != x.size()) {
    throw ShapeMismatch("distance inputs are not aligned");
  }
  return ((xcf - x).array().abs() * inv_scale.array()).sum();
}

double action_cost(const Eigen::VectorXd& action,
                   const Eigen::VectorXd& inv_scale) {
  if (inv_scale.size() != action.size()) {
    throw ShapeMismatch("cost inputs are not aligned");
  }
  return (action.array().abs() * inv_scale.array()).sum();
}

double causal_plausibility(const StructuralModel& scm,
                           const Eigen::VectorXd& xcf,
                           const Eigen::VectorXd& inv_scale) {
  const CausalGraph& g = scm.graph();
  if (xcf.size() != g.size()) {
    throw MissingColumn("counterfactual does not cover all graph nodes");
  }
  if (inv_scale.size() != 0 && inv_scale.size() != g.size()) {
    throw ShapeMismatch("causal plausibility scales are not aligned");
  }
  double total = 0.0;
  for (int v = 0; v < g.size(); ++v) {
    if (g.is_root(v)) continue;
    const auto& parents = g.parents_of(v);
    Eigen::VectorXd pvals(static_cast<int>(parents.size()));
    for (size_t k = 0; k < parents.size(); ++k) {
      pvals[static_cast<int>(k)] = xcf[parents[k]];
    }
    const double w = inv_scale.size() > 0 ? inv_scale[v] : 1.0;
    total += w * std::abs(xcf[v] - scm.regressor(v).predict(pvals));
  }
  return total;
}

double direction_gap(const Eigen::VectorXd& x_base_cf,
                     const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& a_ceils,
                     const Eigen::VectorXd& inv_scale) {
  if (x_base_cf.size() != x0.size() || a_ceils.size() != x0.size() ||
      inv_scale.size() != x0.size()) {
    throw ShapeMismatch("direction gap inputs are not aligned");
  }
  return (((x_base_cf - x0) - a_ceils).array().abs() * inv_scale.array()).sum();
}

AggregateValue summarize(const std::vector<double>& values,
                         const std::vector<char>& mask) {
  if (values.size() != mask.size()) {
    throw ShapeMismatch("mask is not aligned with values");
  }
  std::vector<double> kept;
  for (size_t i = 0; i < values.size(); ++i) {
    if (mask[i]) kept.push_back(values[i]);
  }
  AggregateValue out;
  out.count = static_cast<int>(kept.size());
  if (kept.empty()) return out;  // explicit empty marker
  Eigen::Map<Eigen::VectorXd> v(kept.data(), static_cast<int>(kept.size()));
  out.median = median(v);
  out.deviation = mad(v);
  return out;
}

namespace {

MethodBlock build_block(const std::string& method,
                        const std::vector<InstanceMetrics>& rows,
                        const std::vector<char>& mask, bool rate_validity) {
  MethodBlock b;
  b.method = method;
  b.attempted = static_cast<int>(rows.size());
  int valid = 0, feasible_valid = 0;
  std::vector<double> prox_c, prox_k, spars, dist, spars_a, cost, plaus;
  std::vector<char> kept, kept_cat;
  bool any_cat = false;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (mask[i]) {
      ++valid;
      if (r.feasible) ++feasible_valid;
    }
    prox_c.push_back(r.proximity_cont);
    prox_k.push_back(r.proximity_cat);
    spars.push_back(r.sparsity);
    dist.push_back(r.distance);
    spars_a.push_back(r.sparsity_actions);
    cost.push_back(r.cost);
    plaus.push_back(r.causal_plausibility);
    kept.push_back(mask[i]);
    kept_cat.push_back(mask[i] && r.has_categorical ? 1 : 0);
    any_cat = any_cat || r.has_categorical;
  }
  b.valid_count = valid;
  b.validity = b.attempted > 0
                   ? static_cast<double>(valid) / static_cast<double>(b.attempted)
                   : std::numeric_limits<double>::quiet_NaN();
  if (!rate_validity) b.validity = static_cast<double>(valid);
  b.feasibility = valid > 0 ? static_cast<double>(feasible_valid) /
                                  static_cast<double>(valid)
                            : std::numeric_limits<double>::quiet_NaN();
  b.proximity_cont = summarize(prox_c, kept);
  b.proximity_cat = any_cat ? summarize(prox_k, kept_cat) : AggregateValue{};
  b.sparsity = summarize(spars, kept);
  b.distance = summarize(dist, kept);
  b.sparsity_actions = summarize(spars_a, kept);
  b.cost = summarize(cost, kept);
  b.causal_plausibility = summarize(plaus, kept);
  return b;
}

nlohmann::json agg_to_json(const AggregateValue& a) {
  nlohmann::json j;
  j["count"] = a.count;
  if (a.count > 0) {
    j["median"] = a.median;
    j["deviation"] = a.deviation;
  } else {
    j["median"] = nullptr;
    j["deviation"] = nullptr;
  }
  return j;
}

nlohmann::json block_to_json(const MethodBlock& b, bool intersection) {
  nlohmann::json j;
  j["method"] = b.method;
  j["attempted"] = b.attempted;
  j["valid_count"] = b.valid_count;
  if (intersection) {
    j["common_count"] = b.valid_count;
  } else {
    j["validity"] = b.validity;
  }
  if (std::isnan(b.feasibility)) {
    j["feasibility"] = nullptr;
  } else {
    j["feasibility"] = b.feasibility;
  }
  j["proximity_cont"] = agg_to_json(b.proximity_cont);
  j["proximity_cat"] = agg_to_json(b.proximity_cat);
  j["sparsity"] = agg_to_json(b.sparsity);
  j["distance"] = agg_to_json(b.distance);
  j["sparsity_actions"] = agg_to_json(b.sparsity_actions);
  j["cost"] = agg_to_json(b.cost);
  j["causal_plausibility"] = agg_to_json(b.causal_plausibility);
  return j;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void append_agg(std::ostringstream& out, const AggregateValue& a) {
  if (a.count == 0) {
    out << ",,";
    return;
  }
  out << ',' << format_double(a.median) << ',' << format_double(a.deviation);
}

void append_row(std::ostringstream& out, const MethodBlock& b,
                const std::string& scope, bool intersection) {
  out << b.method << ',';
  if (intersection) {
    out << b.valid_count;
  } else {
    out << format_double(b.validity);
  }
  append_agg(out, b.proximity_cont);
  append_agg(out, b.proximity_cat);
  append_agg(out, b.sparsity);
  append_agg(out, b.distance);
  append_agg(out, b.sparsity_actions);
  append_agg(out, b.cost);
  out << ',';
  if (!std::isnan(b.feasibility)) out << format_double(b.feasibility);
  append_agg(out, b.causal_plausibility);
  out << ',' << scope << '\n';
}

}  // namespace

MetricsReport aggregate(const std::vector<InstanceMetrics>& baseline,
                        const std::vector<InstanceMetrics>& ceils,
                        const std::vector<double>& direction_gaps) {
  if (baseline.size() != ceils.size() ||
      direction_gaps.size() != baseline.size()) {
    throw ShapeMismatch("per-method instance lists are not aligned");
  }
  const size_t n = baseline.size();
  std::vector<char> base_valid(n), ceils_valid(n), common(n);
  for (size_t i = 0; i < n; ++i) {
    base_valid[i] = baseline[i].valid ? 1 : 0;
    ceils_valid[i] = ceils[i].valid ? 1 : 0;
    common[i] = (base_valid[i] && ceils_valid[i]) ? 1 : 0;
  }
  MetricsReport rep;
  rep.baseline_all = build_block("baseline", baseline, base_valid, true);
  rep.ceils_all = build_block("ceils", ceils, ceils_valid, true);
  rep.baseline_common = build_block("baseline", baseline, common, false);
  rep.ceils_common = build_block("ceils", ceils, common, false);
  rep.common_count = rep.baseline_common.valid_count;
  rep.direction_gap = summarize(direction_gaps, common);
  return rep;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["all"] = {block_to_json(baseline_all, false),
              block_to_json(ceils_all, false)};
  j["intersection"] = {block_to_json(baseline_common, true),
                       block_to_json(ceils_common, true)};
  j["common_count"] = common_count;
  j["direction_gap"] = agg_to_json(direction_gap);
  return j;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "method,validity,proximity_cont,proximity_cont_dev,proximity_cat,"
         "proximity_cat_dev,sparsity,sparsity_dev,distance,distance_dev,"
         "sparsity_actions,sparsity_actions_dev,cost,cost_dev,feasibility,"
         "causal_plausibility,causal_plausibility_dev,scope\n";
  append_row(out, baseline_all, "all", false);
  append_row(out, ceils_all, "all", false);
  append_row(out, baseline_common, "intersection", true);
  append_row(out, ceils_common, "intersection", true);
  return out.str();
}

}  // namespace recourse
