#include "cpo/lqclp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cpo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNudge = 1e-12;
constexpr double kTieTol = 1e-12;
constexpr double kLambdaFloor = 1e-8;
constexpr double kLambdaCap = 1e12;

// Closed interval [lo, hi] of admissible multipliers; open ends are pulled
// inward by a relative nudge before projecting.
struct Interval {
  double lo = 0.0;
  double hi = kInf;
  bool empty = false;

  static Interval none() { return {0.0, 0.0, true}; }
  double project(double x) const { return std::clamp(x, lo, hi); }
};

double nudge(double t) { return kNudge * std::max(1.0, std::abs(t)); }

double f_a(const LqclpProblem& p, double lambda) {
  const double a = p.r * p.r / p.s - p.q;  // <= 0 by Cauchy-Schwarz
  const double b = p.c * p.c / p.s - p.delta;
  const double first = (a == 0.0) ? 0.0 : (lambda == 0.0 ? -kInf : a / (2.0 * lambda));
  const double second = (b == 0.0) ? 0.0 : (std::isinf(lambda) ? -kInf : 0.5 * lambda * b);
  return first + second - p.r * p.c / p.s;
}

double f_b(const LqclpProblem& p, double lambda) {
  const double first = (p.q == 0.0) ? 0.0 : (lambda == 0.0 ? -kInf : p.q / lambda);
  return -0.5 * (first + lambda * p.delta);
}

LqclpSolution assemble(const LqclpProblem& p, double lambda, double nu, CaseTag tag) {
  LqclpSolution sol;
  sol.lambda_star = lambda;
  sol.nu_star = Vec::Constant(1, nu);
  sol.case_tag = tag;
  const double lam = std::clamp(lambda, kLambdaFloor, kLambdaCap);
  sol.direction = -(p.hinv_g + nu * p.hinv_b) / lam;
  return sol;
}

}  // namespace

std::string to_string(CaseTag tag) {
  switch (tag) {
    case CaseTag::constraint_active: return "constraint_active";
    case CaseTag::constraint_inactive: return "constraint_inactive";
    case CaseTag::trust_region_only: return "trust_region_only";
    case CaseTag::infeasible: return "infeasible";
  }
  return "unknown";
}

void LqclpProblem::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("trust region size must be positive");
  if (q < 0.0 || s < 0.0) throw std::invalid_argument("q and s must be nonnegative");
  if (q * s - r * r < -1e-9 * std::max(1.0, q * s))
    throw std::invalid_argument("q s >= r^2 violated; metric is not positive definite");
  if (hinv_g.size() != hinv_b.size()) throw std::invalid_argument("H^-1 g and H^-1 b differ in size");
}

LqclpProblem make_lqclp(const Vec& g, const Vec& b, double c, double delta, const Vec& hinv_g,
                        const Vec& hinv_b) {
  LqclpProblem p;
  p.q = g.dot(hinv_g);
  p.r = g.dot(hinv_b);
  p.s = b.dot(hinv_b);
  p.c = c;
  p.delta = delta;
  p.hinv_g = hinv_g;
  p.hinv_b = hinv_b;
  return p;
}

double lqclp_dual_value(const LqclpProblem& p, double lambda, double nu) {
  return -(p.q + 2.0 * nu * p.r + nu * nu * p.s) / (2.0 * lambda) + nu * p.c -
         0.5 * lambda * p.delta;
}

LqclpSolution solve_single(const LqclpProblem& p) {
  p.validate();

  if (p.s <= 0.0) {
    if (p.c > 0.0) {
      LqclpSolution sol = assemble(p, 0.0, 0.0, CaseTag::infeasible);
      sol.direction.setZero();
      return sol;
    }
    return assemble(p, std::sqrt(p.q / p.delta), 0.0, CaseTag::trust_region_only);
  }

  const double gap = p.c * p.c / p.s - p.delta;
  if (gap > 0.0 && p.c > 0.0) {
    LqclpSolution sol = assemble(p, 0.0, 0.0, CaseTag::infeasible);
    sol.direction.setZero();
    return sol;
  }
  if (gap > 0.0 && p.c < 0.0)
    return assemble(p, std::sqrt(p.q / p.delta), 0.0, CaseTag::trust_region_only);

  // Lambda_a = {lambda >= 0 : lambda c - r > 0}, Lambda_b its complement in [0, inf).
  Interval la, lb;
  if (p.c < 0.0) {
    const double t = p.r / p.c;
    la = t > 0.0 ? Interval{0.0, t - nudge(t)} : Interval::none();
    lb = Interval{std::max(t, 0.0), kInf};
  } else if (p.c > 0.0) {
    const double t = p.r / p.c;
    la = Interval{t >= 0.0 ? t + nudge(t) : 0.0, kInf};
    lb = t >= 0.0 ? Interval{0.0, t} : Interval::none();
  } else {
    la = p.r < 0.0 ? Interval{0.0, kInf} : Interval::none();
    lb = p.r < 0.0 ? Interval::none() : Interval{0.0, kInf};
  }

  double lambda_a = 0.0;
  {
    const double num = std::max(0.0, p.q - p.r * p.r / p.s);
    const double den = -gap;
    lambda_a = den > 0.0 ? std::sqrt(num / den) : (num > 0.0 ? kInf : 0.0);
  }
  const double lambda_b = std::sqrt(p.q / p.delta);

  double best_a = -kInf, best_b = -kInf, la_star = 0.0, lb_star = 0.0;
  if (!la.empty) {
    la_star = std::min(la.project(lambda_a), kLambdaCap);
    best_a = f_a(p, la_star);
  }
  if (!lb.empty) {
    lb_star = lb.project(lambda_b);
    best_b = f_b(p, lb_star);
  }

  const bool pick_a = !la.empty && (lb.empty || best_a >= best_b - kTieTol);
  const double lambda = pick_a ? la_star : lb_star;
  const double lam_eff = std::clamp(lambda, kLambdaFloor, kLambdaCap);
  const double nu = std::max(0.0, (lam_eff * p.c - p.r) / p.s);
  LqclpSolution sol = assemble(p, lambda, nu, nu > 0.0 ? CaseTag::constraint_active : CaseTag::constraint_inactive);

  // With g parallel to b (q s = r^2) the optimum can sit strictly inside the
  // ellipsoid on the constraint line. The direction above is still right, but
  // the multipliers that certify it are lambda = 0 and g + nu b = 0.
  const double quad = (p.q + 2.0 * nu * p.r + nu * nu * p.s) / (lam_eff * lam_eff);
  if (quad < p.delta * (1.0 - 1e-9)) {
    const double nu_line = std::max(0.0, -p.r / p.s);
    sol.lambda_star = 0.0;
    sol.nu_star = Vec::Constant(1, nu_line);
    sol.case_tag = nu_line > 0.0 ? CaseTag::constraint_active : CaseTag::constraint_inactive;
  }
  return sol;
}

LqclpSolution solve_dual_multi(const Vec& g, const Mat& B, const Vec& c, double delta,
                               const MetricSolve& inverse_metric_product,
                               const DualAscentSettings& settings) {
  const Eigen::Index m = B.cols();
  if (m < 1) throw std::invalid_argument("at least one constraint required");
  if (c.size() != m) throw std::invalid_argument("one offset per constraint required");
  if (B.rows() != g.size()) throw std::invalid_argument("constraint gradients have wrong dimension");
  if (!(delta > 0.0)) throw std::invalid_argument("trust region size must be positive");

  const Vec hinv_g = inverse_metric_product(g);
  Mat hinv_B(B.rows(), m);
  for (Eigen::Index i = 0; i < m; ++i) hinv_B.col(i) = inverse_metric_product(B.col(i));
  const double q = g.dot(hinv_g);
  const Vec r = B.transpose() * hinv_g;
  Mat S = B.transpose() * hinv_B;
  S = 0.5 * (S + S.transpose());

  const double sqrt_delta = std::sqrt(delta);
  auto quad = [&](const Vec& nu) { return std::max(0.0, q - 2.0 * r.dot(nu) + nu.dot(S * nu)); };
  auto dual = [&](const Vec& nu) { return -sqrt_delta * std::sqrt(quad(nu)) + nu.dot(c); };
  auto gradient = [&](const Vec& nu) -> Vec {
    const double root = std::sqrt(std::max(quad(nu), 1e-300));
    return c - sqrt_delta * (S * nu - r) / root;
  };

  Vec nu = Vec::Zero(m);
  double value = dual(nu);
  double step = 1.0 / (sqrt_delta * S.norm() / std::sqrt(std::max(q, 1e-12)) + 1.0);
  bool infeasible = false;

  for (int it = 0; it < settings.max_iters; ++it) {
    const Vec grad = gradient(nu);
    const Vec projected = (nu + grad).cwiseMax(0.0) - nu;
    if (projected.norm() <= settings.grad_tol) break;
    bool moved = false;
    while (step > 1e-300) {
      const Vec trial = (nu + step * grad).cwiseMax(0.0);
      const double trial_value = dual(trial);
      if (trial_value > value) {
        nu = trial;
        value = trial_value;
        step *= 2.0;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (value > settings.divergence_value) {
      infeasible = true;
      break;
    }
    if (!moved) break;
  }
  // slow divergence: nu ran off along a ray on which the dual still increases
  if (!infeasible && nu.norm() > settings.ray_norm) {
    const Vec dir = nu / nu.norm();
    if (dir.dot(c) > sqrt_delta * std::sqrt(std::max(0.0, dir.dot(S * dir)))) infeasible = true;
  }

  LqclpSolution sol;
  sol.nu_star = nu;
  if (infeasible) {
    sol.case_tag = CaseTag::infeasible;
    sol.lambda_star = 0.0;
    sol.direction = Vec::Zero(g.size());
    return sol;
  }
  sol.lambda_star = std::sqrt(quad(nu) / delta);
  const double lam = std::clamp(sol.lambda_star, kLambdaFloor, kLambdaCap);
  sol.direction = (hinv_g - hinv_B * nu) / lam;

  if ((nu.array() > 0.0).any()) {
    sol.case_tag = CaseTag::constraint_active;
  } else {
    bool outside = true;
    for (Eigen::Index i = 0; i < m; ++i)
      outside = outside && c(i) < 0.0 && S(i, i) > 0.0 && c(i) * c(i) / S(i, i) > delta;
    sol.case_tag = outside ? CaseTag::trust_region_only : CaseTag::constraint_inactive;
  }
  return sol;
}

Vec recovery_direction(const Vec& b, const Vec& hinv_b, double delta) {
  const double s = b.dot(hinv_b);
  if (!(s > 1e-12)) throw std::domain_error("degenerate constraint gradient: b^T H^-1 b <= 1e-12");
  return -std::sqrt(2.0 * delta / s) * hinv_b;
}

}  // namespace cpo
