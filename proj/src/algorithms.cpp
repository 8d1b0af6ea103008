#include "cpo/algorithms.hpp"

#include <cmath>
#include <stdexcept>

namespace cpo {

void TrustRegionConfig::validate() const {
  if (!(delta_kl > 0.0)) throw std::invalid_argument("delta_kl must be positive");
  if (!(backtrack_ratio > 0.0 && backtrack_ratio < 1.0)) throw std::invalid_argument("backtrack_ratio must lie in (0, 1)");
  if (backtrack_budget < 1) throw std::invalid_argument("backtrack budget must be at least 1");
  if (!(accept_violation_tol >= 0.0)) throw std::invalid_argument("accept_violation_tol must be nonnegative");
}

std::string to_string(StepKind kind) {
  switch (kind) {
    case StepKind::normal: return "normal";
    case StepKind::feasibility: return "feasibility";
    case StepKind::recovery: return "recovery";
    case StepKind::none: return "none";
  }
  return "unknown";
}

LineSearchResult line_search(const Vec& theta, const Vec& direction, const std::function<bool(const Vec&)>& accept,
                             double ratio, int budget) {
  double scale = 1.0;
  for (int j = 0; j <= budget; ++j) {
    Vec candidate = theta + scale * direction;
    if (accept(candidate)) return {std::move(candidate), j, true};
    scale *= ratio;
  }
  return {theta, budget, false};
}

Vec solve_metric(const SurrogateModel& model, const Vec& rhs, const CgSettings& cg) {
  return conjugate_gradient(model.hvp, rhs, cg.iterations_for(static_cast<int>(rhs.size())), cg.tol);
}

namespace {

bool kl_ok(const SurrogateModel& model, const Vec& theta) {
  const double kl = model.kl(theta);
  return std::isfinite(kl) && kl <= model.delta;
}

// Fills the measured quantities at the chosen parameters.
void finish(UpdateResult& out, const Vec& theta, const SurrogateModel& model, const LineSearchResult& ls) {
  out.accepted = ls.accepted;
  out.backtracks = ls.j_used;
  out.theta_new = ls.accepted ? ls.theta : theta;
  out.constraints_before = model.c;
  out.measured_kl = model.kl(out.theta_new);
  out.surrogate_improvement = model.objective_gain(out.theta_new);
  out.constraints_after = model.constraint_values(out.theta_new);
}

UpdateResult rejected(const Vec& theta, const SurrogateModel& model, std::string why) {
  UpdateResult out;
  out.step_kind = StepKind::none;
  out.nu_star = Vec::Zero(model.n_constraints());
  finish(out, theta, model, LineSearchResult{theta, 0, false});
  out.diagnostic = std::move(why);
  return out;
}

// Constraint estimates must not rise above tolerance.
std::function<bool(const Vec&)> normal_predicate(const SurrogateModel& model, const TrustRegionConfig& config) {
  const double limit = config.accept_violation_tol + config.violation_slack;
  return [&model, limit](const Vec& th) {
    if (!kl_ok(model, th)) return false;
    const double gain = model.objective_gain(th);
    if (!(gain >= 0.0)) return false;
    if (model.n_constraints() == 0) return true;
    const Vec cv = model.constraint_values(th);
    return cv.allFinite() && cv.maxCoeff() <= limit;
  };
}

// Only asks for a lower constraint estimate, summed over violated constraints.
std::function<bool(const Vec&)> decrease_predicate(const SurrogateModel& model) {
  Vec weights = (model.c.array() > 0.0).cast<double>().matrix();
  if (weights.sum() == 0.0) weights.setOnes();
  const double before = weights.dot(model.c);
  return [&model, weights, before](const Vec& th) {
    if (!kl_ok(model, th)) return false;
    const Vec cv = model.constraint_values(th);
    return cv.allFinite() && weights.dot(cv) < before;
  };
}

UpdateResult recovery_step(const Vec& theta, const SurrogateModel& model, const TrustRegionConfig& config,
                           const Vec& b, const Vec& hinv_b) {
  if (b.dot(hinv_b) <= 1e-12) return rejected(theta, model, "degenerate constraint gradient in recovery");
  UpdateResult out;
  out.step_kind = StepKind::recovery;
  out.case_tag = CaseTag::infeasible;
  out.direction = recovery_direction(b, hinv_b, model.delta);
  out.nu_star = Vec::Zero(model.n_constraints());
  const auto ls = line_search(theta, out.direction, decrease_predicate(model), config.backtrack_ratio,
                              config.backtrack_budget);
  finish(out, theta, model, ls);
  return out;
}

UpdateResult constrained_step(const Vec& theta, const SurrogateModel& model, const TrustRegionConfig& config,
                              UpdateResult out) {
  if (!out.direction.allFinite()) return rejected(theta, model, "non-finite step direction");
  const bool feasible_now = model.c.maxCoeff() <= 0.0;
  out.step_kind = feasible_now ? StepKind::normal : StepKind::feasibility;
  const auto accept = feasible_now ? normal_predicate(model, config) : decrease_predicate(model);
  const auto ls = line_search(theta, out.direction, accept, config.backtrack_ratio, config.backtrack_budget);
  finish(out, theta, model, ls);
  return out;
}

}  // namespace

UpdateResult trpo_update(const Vec& theta, const SurrogateModel& model, const TrustRegionConfig& config) {
  model.validate();
  UpdateResult out;
  out.nu_star = Vec::Zero(model.n_constraints());
  out.case_tag = CaseTag::trust_region_only;
  const Vec hinv_g = solve_metric(model, model.g, config.cg);
  const double q = model.g.dot(hinv_g);
  if (q > 0.0) {
    out.lambda_star = std::sqrt(q / (2.0 * model.delta));
    out.direction = std::sqrt(2.0 * model.delta / q) * hinv_g;
  } else {
    out.direction = Vec::Zero(theta.size());
  }
  if (!out.direction.allFinite()) return rejected(theta, model, "non-finite step direction");
  // Constraints are ignored, so only the KL and objective are checked.
  auto accept = [&model](const Vec& th) { return kl_ok(model, th) && model.objective_gain(th) >= 0.0; };
  const auto ls = line_search(theta, out.direction, accept, config.backtrack_ratio, config.backtrack_budget);
  finish(out, theta, model, ls);
  return out;
}

UpdateResult cpo_update(const Vec& theta, const SurrogateModel& model, const TrustRegionConfig& config) {
  model.validate();
  const int m = model.n_constraints();
  if (m == 0) return trpo_update(theta, model, config);

  const double radius = 2.0 * model.delta;
  const Vec hinv_g = solve_metric(model, model.g, config.cg);
  std::vector<Vec> hinv_b;
  for (const Vec& b : model.b_list) hinv_b.push_back(solve_metric(model, b, config.cg));

  UpdateResult out;
  if (m == 1) {
    // Minimization form with objective -g.
    LqclpProblem p = make_lqclp(-model.g, model.b_list[0], model.c(0), radius, -hinv_g, hinv_b[0]);
    p.q = std::max(p.q, 0.0);
    p.s = std::max(p.s, 0.0);
    // Inexact CG solves can leave the Gram entries slightly outside Cauchy-Schwarz.
    const double bound = std::sqrt(p.q * p.s);
    if (std::abs(p.r) > bound) p.r = std::copysign(bound, p.r);
    const LqclpSolution sol = solve_single(p);
    out.subproblem = p;
    if (sol.case_tag == CaseTag::infeasible) {
      UpdateResult rec = recovery_step(theta, model, config, model.b_list[0], hinv_b[0]);
      rec.subproblem = p;
      return rec;
    }
    out.direction = sol.direction;
    out.lambda_star = sol.lambda_star;
    out.nu_star = sol.nu_star;
    out.case_tag = sol.case_tag;
    return constrained_step(theta, model, config, std::move(out));
  }

  const Mat B = model.B();
  const MetricSolve inverse = [&model, &config](const Vec& v) { return solve_metric(model, v, config.cg); };
  const LqclpSolution sol = solve_dual_multi(model.g, B, model.c, radius, inverse, config.dual);
  if (sol.case_tag == CaseTag::infeasible) {
    Vec b = Vec::Zero(theta.size());
    Vec hb = Vec::Zero(theta.size());
    for (int i = 0; i < m; ++i)
      if (model.c(i) > 0.0) {
        b += model.b_list[i];
        hb += hinv_b[i];
      }
    return recovery_step(theta, model, config, b, hb);
  }
  out.direction = sol.direction;
  out.lambda_star = sol.lambda_star;
  out.nu_star = sol.nu_star;
  out.case_tag = sol.case_tag;
  return constrained_step(theta, model, config, std::move(out));
}

UpdateResult pdo_update(const Vec& theta, const SurrogateModel& model, DualState& dual,
                        const TrustRegionConfig& config) {
  model.validate();
  const int m = model.n_constraints();
  if (dual.nu.size() != m) dual.nu = Vec::Zero(m);

  const Vec hinv_g = solve_metric(model, model.g, config.cg);
  Vec dir = hinv_g;
  Vec grad = model.g;
  for (int i = 0; i < m; ++i) {
    if (dual.nu(i) == 0.0) continue;
    dir -= dual.nu(i) * solve_metric(model, model.b_list[i], config.cg);
    grad -= dual.nu(i) * model.b_list[i];
  }
  const double quad = grad.dot(dir);

  UpdateResult out;
  out.case_tag = CaseTag::trust_region_only;
  out.nu_star = dual.nu;
  if (quad > 0.0) {
    out.lambda_star = std::sqrt(quad / (2.0 * model.delta));
    out.direction = std::sqrt(2.0 * model.delta / quad) * dir;
  } else {
    out.direction = Vec::Zero(theta.size());
  }
  if (!out.direction.allFinite()) return rejected(theta, model, "non-finite step direction");

  const Vec nu = dual.nu;
  auto accept = [&model, nu](const Vec& th) {
    if (!kl_ok(model, th)) return false;
    double gain = model.objective_gain(th);
    if (nu.size() > 0) gain -= nu.dot(model.constraint_values(th) - model.c);
    return gain >= 0.0;
  };
  const auto ls = line_search(theta, out.direction, accept, config.backtrack_ratio, config.backtrack_budget);
  finish(out, theta, model, ls);

  dual.nu = (dual.nu + dual.alpha * model.c).cwiseMax(0.0);
  return out;
}

Vec penalized_reward(const Vec& rewards, const Vec& costs, double lambda_penalty) {
  if (rewards.size() != costs.size()) throw std::invalid_argument("reward and cost lengths differ");
  return rewards - lambda_penalty * costs;
}

UpdateResult fpo_update(const Vec& theta, const SurrogateModel& penalized_model, const TrustRegionConfig& config) {
  return trpo_update(theta, penalized_model, config);
}

}  // namespace cpo
