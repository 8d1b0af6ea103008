#pragma once

// Linear objective with linear and quadratic constraints:
//
//   min_x  g^T x   s.t.  b^T x + c <= 0,   x^T H x <= delta,
//
// solved through its Lagrange dual. The single-constraint case has a closed
// form; several constraints go through projected ascent on the dual.

#include "cpo/types.hpp"

#include <functional>
#include <string>

namespace cpo {

enum class CaseTag { constraint_active, constraint_inactive, trust_region_only, infeasible };

std::string to_string(CaseTag tag);

struct LqclpProblem {
  double q = 0.0;  // g^T H^-1 g
  double r = 0.0;  // g^T H^-1 b
  double s = 0.0;  // b^T H^-1 b
  double c = 0.0;
  double delta = 0.0;
  Vec hinv_g;
  Vec hinv_b;

  /// Throws std::invalid_argument if q < 0, s < 0, delta <= 0 or q s < r^2 - 1e-9.
  void validate() const;
};

/// Forms q, r, s from the gradients and their metric-inverse products.
LqclpProblem make_lqclp(const Vec& g, const Vec& b, double c, double delta, const Vec& hinv_g,
                        const Vec& hinv_b);

struct LqclpSolution {
  Vec direction;
  double lambda_star = 0.0;
  Vec nu_star;
  CaseTag case_tag = CaseTag::infeasible;
};

/// Dual value of the single-constraint problem at (lambda, nu).
double lqclp_dual_value(const LqclpProblem& p, double lambda, double nu);

LqclpSolution solve_single(const LqclpProblem& problem);

using MetricSolve = std::function<Vec(const Vec&)>;

struct DualAscentSettings {
  double grad_tol = 1e-8;
  int max_iters = 10000;
  double divergence_value = 1e12;
  double ray_norm = 1e8;  // multipliers beyond this are tested for an ascent ray
};

/// Maximization form used by the policy update:
///   max_x g^T x  s.t.  c_i + b_i^T x <= 0,  x^T H x <= delta,
/// with primal recovery x = (1/lambda) H^-1 (g - B nu). B holds one
/// constraint gradient per column.
LqclpSolution solve_dual_multi(const Vec& g, const Mat& B, const Vec& c, double delta,
                               const MetricSolve& inverse_metric_product,
                               const DualAscentSettings& settings = {});

/// -sqrt(2 delta / b^T H^-1 b) H^-1 b. Throws std::domain_error when
/// b^T H^-1 b <= 1e-12.
Vec recovery_direction(const Vec& b, const Vec& hinv_b, double delta);

}  // namespace cpo
