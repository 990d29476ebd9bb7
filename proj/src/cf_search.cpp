#include "recourse/cf_search.hpp"

#include <algorithm>
#include <cmath>

#include "recourse/rng.hpp"

namespace recourse {

void SearchConfig::validate() const {
  if (!(lambda0 > 0.0)) throw ValidationError("lambda0 must be > 0");
  if (!(lambda_growth > 1.0)) throw ValidationError("lambda growth must be > 1");
  if (max_stages <= 0) throw ValidationError("max_stages must be positive");
  if (max_iters_per_stage <= 0) {
    throw ValidationError("max_iters_per_stage must be positive");
  }
  if (!(step_size > 0.0)) throw ValidationError("step_size must be > 0");
  if (validity_margin < 0.0) throw ValidationError("margin must be >= 0");
  if (restarts < 0) throw ValidationError("restarts must be >= 0");
  if (distance_weights.size() > 0 && (distance_weights.array() <= 0.0).any()) {
    throw ValidationError("distance weights must be positive");
  }
}

namespace {

struct Projector {
  const Eigen::VectorXd& x0;
  const std::vector<bool>& frozen;
  const std::vector<Monotonicity>& monotone;
  Eigen::VectorXd lo, hi;  // effective bounds, widened to include x0

  void apply(Eigen::VectorXd& x) const {
    for (int i = 0; i < x.size(); ++i) {
      if (frozen[static_cast<size_t>(i)]) {
        x[i] = x0[i];
        continue;
      }
      x[i] = std::clamp(x[i], lo[i], hi[i]);
      if (monotone[static_cast<size_t>(i)] == Monotonicity::increase_only) {
        x[i] = std::max(x[i], x0[i]);
      } else if (monotone[static_cast<size_t>(i)] ==
                 Monotonicity::decrease_only) {
        x[i] = std::min(x[i], x0[i]);
      }
    }
  }
};

struct BestValid {
  Eigen::VectorXd x;
  double distance = 0.0;
  bool set = false;
};

}  // namespace

SearchOutcome gradient_cf_search(const ScoreFn& f, const Eigen::VectorXd& x0,
                                 int target, double threshold, double margin,
                                 const std::vector<bool>& frozen,
                                 const std::vector<Monotonicity>& monotone,
                                 const SearchConfig& cfg) {
  cfg.validate();
  const int d = static_cast<int>(x0.size());
  if (static_cast<int>(frozen.size()) != d ||
      static_cast<int>(monotone.size()) != d) {
    throw KeyMismatch("constraint masks do not match the search dimension");
  }
  if (!x0.allFinite()) throw ValidationError("start point must be finite");
  if (target != 0 && target != 1) throw ValidationError("target must be 0 or 1");

  const double sign = target == 1 ? 1.0 : -1.0;
  Eigen::VectorXd weights = cfg.distance_weights.size() > 0
                                ? cfg.distance_weights
                                : Eigen::VectorXd::Ones(d);
  if (weights.size() != d) throw KeyMismatch("distance weights length mismatch");
  Eigen::VectorXd scales = cfg.step_scales.size() > 0
                               ? cfg.step_scales
                               : weights.cwiseInverse().eval();
  if (scales.size() != d) throw KeyMismatch("step scales length mismatch");

  Projector project{x0, frozen, monotone, Eigen::VectorXd(), Eigen::VectorXd()};
  project.lo = cfg.lower_bounds.size() > 0
                   ? cfg.lower_bounds.cwiseMin(x0).eval()
                   : Eigen::VectorXd::Constant(
                         d, -std::numeric_limits<double>::infinity());
  project.hi = cfg.upper_bounds.size() > 0
                   ? cfg.upper_bounds.cwiseMax(x0).eval()
                   : Eigen::VectorXd::Constant(
                         d, std::numeric_limits<double>::infinity());

  const auto signed_gap = [&](const Eigen::VectorXd& x) {
    const double v = f.value(x);
    if (!std::isfinite(v)) throw NonFiniteLoss("objective value is not finite");
    return sign * (v - threshold);
  };
  const auto weighted_l1 = [&](const Eigen::VectorXd& x) {
    return (weights.array() * (x - x0).array().abs()).sum();
  };

  // Nothing to do when the start already carries the target label.
  if (signed_gap(x0) > 0.0) {
    return {x0, true, 0, {}};
  }

  // eta_i = step * scale_i^2: a plain step on scale-standardized coordinates.
  const Eigen::VectorXd eta =
      cfg.step_size * scales.array().square().matrix();

  SearchOutcome out;
  BestValid best;
  int iterations = 0;

  const auto run_schedule = [&](Eigen::VectorXd x) {
    project.apply(x);
    double lambda = cfg.lambda0;
    for (int stage = 0; stage < cfg.max_stages; ++stage) {
      bool found_this_stage = false;
      int stale = 0;
      for (int it = 0; it < cfg.max_iters_per_stage; ++it) {
        const double gap = signed_gap(x);
        ++iterations;
        if (gap > 0.0) {
          const double dist = weighted_l1(x);
          if (!best.set || dist < best.distance) {
            best.x = x;
            best.distance = dist;
            best.set = true;
          }
          found_this_stage = true;
        }
        Eigen::VectorXd next = x;
        if (gap < margin) {  // hinge active: descend toward validity
          Eigen::VectorXd g = f.gradient(x);
          if (!g.allFinite()) throw NonFiniteLoss("objective gradient is not finite");
          next += sign * eta.cwiseProduct(g);
        }
        // Proximal step for lambda * ||w (x - x0)||_1: soft-threshold deltas.
        for (int i = 0; i < d; ++i) {
          const double delta = next[i] - x0[i];
          const double shrink = eta[i] * lambda * weights[i];
          next[i] = x0[i] +
                    (delta > 0.0 ? std::max(delta - shrink, 0.0)
                                 : std::min(delta + shrink, 0.0));
        }
        project.apply(next);
        if ((next.array() == x.array()).all()) {
          if (++stale >= 2) break;  // pinned by the constraints
        } else {
          stale = 0;
        }
        x = std::move(next);
      }
      // Final iterate of the stage still needs its validity recorded.
      const double gap = signed_gap(x);
      if (gap > 0.0) {
        const double dist = weighted_l1(x);
        if (!best.set || dist < best.distance) {
          best.x = x;
          best.distance = dist;
          best.set = true;
        }
        found_this_stage = true;
      }
      if (found_this_stage) {
        out.stage_accepted_distances.push_back(best.distance);
        lambda *= cfg.lambda_growth;
        x = best.x;  // pull the best valid candidate closer from here
      } else if (stale >= 2) {
        break;  // no validity and no movement: later stages would repeat this
      }
    }
    return x;
  };

  Eigen::VectorXd last = run_schedule(x0);
  for (int r = 1; r <= cfg.restarts; ++r) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
    Eigen::VectorXd start = x0;
    for (int i = 0; i < d; ++i) {
      if (!frozen[static_cast<size_t>(i)]) {
        start[i] += 0.1 * scales[i] * rng.normal();
      }
    }
    last = run_schedule(start);
  }

  out.iterations = iterations;
  if (best.set) {
    out.candidate = best.x;
    out.valid = true;
  } else {
    out.candidate = last;
    out.valid = false;
  }
  return out;
}

namespace {

double logit_of(double p) {
  const double eps = 1e-12;
  const double q = std::clamp(p, eps, 1.0 - eps);
  return std::log(q / (1.0 - q));
}

// Margin on the logit axis equivalent to a score offset from the threshold,
// measured in the target direction.
double logit_margin(double threshold, double score_margin, int target) {
  if (score_margin <= 0.0) return 0.0;
  if (target == 1) {
    return logit_of(threshold + score_margin) - logit_of(threshold);
  }
  return logit_of(threshold) - logit_of(threshold - score_margin);
}

std::vector<bool> frozen_mask(const FeasibilitySpec& spec) {
  std::vector<bool> mask(spec.classes.size());
  for (size_t v = 0; v < spec.classes.size(); ++v) {
    mask[v] = spec.classes[v] != ActionClass::actionable;
  }
  return mask;
}

CounterfactualResult trivial_result(const Eigen::VectorXd& x0,
                                    const Eigen::VectorXd& u0, Method method,
                                    int target) {
  CounterfactualResult res;
  res.factual = x0;
  res.counterfactual = x0;
  res.latent_factual = u0;
  res.latent_counterfactual = u0;
  res.action = Eigen::VectorXd::Zero(x0.size());
  res.valid = true;
  res.method = method;
  res.iterations = 0;
  res.target = target;
  return res;
}

}  // namespace

CounterfactualResult ceils_generate(const StructuralModel& scm,
                                    const ClassifierModel& clf,
                                    double threshold,
                                    const Eigen::VectorXd& x0,
                                    const FeasibilitySpec& spec,
                                    const SearchConfig& cfg,
                                    std::optional<int> target_opt) {
  const CausalGraph& g = scm.graph();
  spec.validate(g);
  if (x0.size() != g.size()) {
    throw MissingColumn("instance does not cover all graph nodes");
  }

  const Eigen::VectorXd u0 = scm.abduct(x0);
  const int label0 = clf.classify(x0, threshold);
  const int target = target_opt.value_or(1 - label0);
  if (label0 == target) return trivial_result(x0, u0, Method::ceils, target);

  // Composed score on the latent axis: u -> logit(R(F(u))).
  ScoreFn latent_logit;
  latent_logit.value = [&](const Eigen::VectorXd& u) {
    return clf.logit(scm.forward(u));
  };
  latent_logit.gradient = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd x;
    Eigen::MatrixXd jac;
    scm.forward_with_jacobian(u, x, jac);
    return (jac.transpose() * clf.logit_gradient(x)).eval();
  };

  SearchOutcome sr = gradient_cf_search(
      latent_logit, u0, target, logit_of(threshold),
      logit_margin(threshold, cfg.validity_margin, target), frozen_mask(spec),
      spec.monotone, cfg);

  CounterfactualResult res;
  res.factual = x0;
  res.latent_factual = u0;
  res.latent_counterfactual = sr.candidate;
  res.action = sr.candidate - u0;
  res.counterfactual = scm.forward(sr.candidate);
  res.valid = clf.classify(res.counterfactual, threshold) == target;
  res.method = Method::ceils;
  res.iterations = sr.iterations;
  res.target = target;
  return res;
}

CounterfactualResult baseline_generate(const StructuralModel& scm,
                                       const ClassifierModel& clf,
                                       double threshold,
                                       const Eigen::VectorXd& x0,
                                       const FeasibilitySpec& spec,
                                       const SearchConfig& cfg,
                                       std::optional<int> target_opt) {
  const CausalGraph& g = scm.graph();
  spec.validate(g);
  if (x0.size() != g.size()) {
    throw MissingColumn("instance does not cover all graph nodes");
  }

  const int label0 = clf.classify(x0, threshold);
  const int target = target_opt.value_or(1 - label0);
  if (label0 == target) {
    return trivial_result(x0, scm.abduct(x0), Method::baseline, target);
  }

  ScoreFn feature_logit;
  feature_logit.value = [&](const Eigen::VectorXd& x) { return clf.logit(x); };
  feature_logit.gradient = [&](const Eigen::VectorXd& x) {
    return clf.logit_gradient(x);
  };

  SearchOutcome sr = gradient_cf_search(
      feature_logit, x0, target, logit_of(threshold),
      logit_margin(threshold, cfg.validity_margin, target), frozen_mask(spec),
      spec.monotone, cfg);

  CounterfactualResult res;
  res.factual = x0;
  res.counterfactual = sr.candidate;
  res.latent_factual = scm.abduct(x0);
  res.latent_counterfactual = scm.abduct(sr.candidate);
  res.action = res.latent_counterfactual - res.latent_factual;
  res.valid = clf.classify(res.counterfactual, threshold) == target;
  res.method = Method::baseline;
  res.iterations = sr.iterations;
  res.target = target;
  return res;
}

Eigen::VectorXd ex_post_action(const StructuralModel& scm,
                               const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& xcf) {
  return scm.abduct(xcf) - scm.abduct(x0);
}

}  // namespace recourse
