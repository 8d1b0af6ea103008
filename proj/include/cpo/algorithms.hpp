#pragma once

// Per-iteration policy updates: constrained (CPO), unconstrained trust
// region (TRPO), primal-dual (PDO) and fixed penalty (FPO), all finished by a
// backtracking line search on sample estimates.

#include "cpo/estimation.hpp"
#include "cpo/lqclp.hpp"
#include "cpo/natural_gradient.hpp"

#include <functional>
#include <string>

namespace cpo {

struct TrustRegionConfig {
  double delta_kl = 0.01;
  double backtrack_ratio = 0.8;
  int backtrack_budget = 10;
  CgSettings cg;
  double accept_violation_tol = 0.0;
  double violation_slack = 1e-8;
  DualAscentSettings dual;

  void validate() const;
};

struct LineSearchResult {
  Vec theta;
  int j_used = 0;
  bool accepted = false;
};

/// First theta + ratio^j direction (j = 0..budget) passing the predicate;
/// otherwise (theta, budget, false).
LineSearchResult line_search(const Vec& theta, const Vec& direction, const std::function<bool(const Vec&)>& accept,
                             double ratio, int budget);

enum class StepKind { normal, feasibility, recovery, none };
std::string to_string(StepKind kind);

struct UpdateResult {
  Vec theta_new;
  bool accepted = false;
  int backtracks = 0;
  CaseTag case_tag = CaseTag::constraint_inactive;
  StepKind step_kind = StepKind::normal;
  double lambda_star = 0.0;
  Vec nu_star;
  double measured_kl = 0.0;
  double surrogate_improvement = 0.0;
  Vec constraints_before;
  Vec constraints_after;
  Vec direction;           // full step before backtracking
  LqclpProblem subproblem; // single-constraint CPO only
  std::string diagnostic;
};

/// Runs conjugate gradient against the model's metric with the configured settings.
Vec solve_metric(const SurrogateModel& model, const Vec& rhs, const CgSettings& cg);

UpdateResult cpo_update(const Vec& theta, const SurrogateModel& model, const TrustRegionConfig& config);
UpdateResult trpo_update(const Vec& theta, const SurrogateModel& model, const TrustRegionConfig& config);

struct DualState {
  Vec nu;
  double alpha = 0.01;
};

/// Step along H^-1 (g - nu b); afterwards nu <- (nu + alpha (J_C - d))_+
/// using the model's c = J_C - d.
UpdateResult pdo_update(const Vec& theta, const SurrogateModel& model, DualState& dual,
                        const TrustRegionConfig& config);

/// r - lambda * c on every step.
Vec penalized_reward(const Vec& rewards, const Vec& costs, double lambda_penalty);
/// TRPO on a model built from penalized_reward advantages.
UpdateResult fpo_update(const Vec& theta, const SurrogateModel& penalized_model, const TrustRegionConfig& config);

}  // namespace cpo
