#include "cpo/algorithms.hpp"
#include "cpo/estimation.hpp"
#include "cpo/tabular.hpp"
#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

using namespace cpo;

namespace {

// Exact quadratic model around theta0: KL = 1/2 x^T H x, linear objective
// and constraints in x = theta - theta0.
SurrogateModel quadratic_model(const Vec& theta0, const Mat& H, const Vec& g, const Mat& B, const Vec& c,
                               double delta) {
  SurrogateModel m;
  m.g = g;
  for (Eigen::Index i = 0; i < B.cols(); ++i) m.b_list.push_back(B.col(i));
  m.c = c;
  m.delta = delta;
  m.hvp = HvpHandle([H](const Vec& v) { return Vec(H * v); }, static_cast<int>(g.size()), 0.0);
  m.kl = [theta0, H](const Vec& th) {
    const Vec x = th - theta0;
    return 0.5 * x.dot(H * x);
  };
  m.objective_gain = [theta0, g](const Vec& th) { return g.dot(th - theta0); };
  m.constraint_values = [theta0, B, c](const Vec& th) { return Vec(c + B.transpose() * (th - theta0)); };
  return m;
}

Mat spd(std::uint64_t seed, int n) {
  Rng rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = N(rng);
  return a * a.transpose() / n + 0.5 * Mat::Identity(n, n);
}

TrustRegionConfig config() {
  TrustRegionConfig c;
  c.cg.damping = 0.0;
  c.cg.tol = 1e-14;
  return c;
}

}  // namespace

TEST_CASE("line search takes the first acceptable contraction") {
  const Vec theta = Vec::Zero(2);
  const Vec d = (Vec(2) << 2.0, 2.0).finished();
  auto kl_within_one = [](const Vec& x) { return 0.5 * x.squaredNorm() <= 1.0; };
  const LineSearchResult r = line_search(theta, d, kl_within_one, 0.5, 10);
  CHECK(r.accepted);
  CHECK(r.j_used == 1);
  CHECK(r.theta(0) == 1.0);
  CHECK(r.theta(1) == 1.0);
}

TEST_CASE("line search that never accepts keeps the parameters") {
  const Vec theta = Vec::Ones(3);
  const LineSearchResult r = line_search(theta, Vec::Ones(3), [](const Vec&) { return false; }, 0.8, 10);
  CHECK(!r.accepted);
  CHECK(r.j_used == 10);
  CHECK(r.theta == theta);
}

TEST_CASE("trust region step fills the KL ball") {
  const int n = 5;
  const Mat H = spd(1, n);
  const Vec theta = Vec::LinSpaced(n, -1.0, 1.0);
  const Vec g = Vec::LinSpaced(n, 0.5, -0.3);
  const SurrogateModel m = quadratic_model(theta, H, g, Mat(n, 0), Vec(0), 0.01);
  const UpdateResult r = trpo_update(theta, m, config());
  CHECK(r.accepted);
  CHECK(r.backtracks <= 1);  // the full step sits on the KL boundary
  CHECK(r.direction.dot(H * r.direction) == doctest::Approx(2.0 * 0.01).epsilon(1e-8));
  CHECK((r.lambda_star * (H * r.direction) - g).norm() < 1e-9);
  // direction is parallel to H^-1 g
  const Vec ng = H.ldlt().solve(g);
  CHECK(std::abs(r.direction.normalized().dot(ng.normalized()) - 1.0) < 1e-9);
  CHECK(r.measured_kl <= 0.01 * (1.0 + 1e-9));
  CHECK(r.surrogate_improvement > 0.0);
}

TEST_CASE("constrained update") {
  const int n = 6;
  const Mat H = spd(2, n);
  const Vec theta = Vec::Zero(n);
  const Vec g = Vec::LinSpaced(n, 1.0, -0.5);
  const double delta = 0.02;

  SUBCASE("zero gradient and a satisfied constraint leave the policy unchanged") {
    const SurrogateModel m = quadratic_model(theta, H, Vec::Zero(n), Vec::Ones(n), Vec::Constant(1, -0.1), delta);
    const UpdateResult r = cpo_update(theta, m, config());
    CHECK((r.theta_new - theta).norm() < 1e-12);
  }
  SUBCASE("a far-away constraint gives the trust region step") {
    const SurrogateModel c = quadratic_model(theta, H, g, Vec::Ones(n), Vec::Constant(1, -100.0), delta);
    const SurrogateModel u = quadratic_model(theta, H, g, Mat(n, 0), Vec(0), delta);
    const UpdateResult rc = cpo_update(theta, c, config());
    const UpdateResult ru = trpo_update(theta, u, config());
    CHECK(rc.case_tag == CaseTag::trust_region_only);
    CHECK((rc.theta_new - ru.theta_new).norm() < 1e-8);
    // without constraints CPO is TRPO
    CHECK((cpo_update(theta, u, config()).theta_new - ru.theta_new).norm() == 0.0);
  }
  SUBCASE("an active constraint is respected") {
    const Vec b = g + Vec::LinSpaced(n, 0.0, 0.3);
    const SurrogateModel m = quadratic_model(theta, H, g, b, Vec::Constant(1, -0.01), delta);
    const UpdateResult r = cpo_update(theta, m, config());
    CHECK(r.case_tag == CaseTag::constraint_active);
    CHECK(r.step_kind == StepKind::normal);
    CHECK(r.accepted);
    CHECK(r.constraints_after(0) <= 1e-8);
    CHECK(r.measured_kl <= delta * (1.0 + 1e-9));
    CHECK(r.nu_star(0) > 0.0);
    // stationarity of the linearized problem: g - nu b = lambda H x
    CHECK((g - r.nu_star(0) * b - r.lambda_star * (H * r.direction)).norm() < 1e-6);
  }
  SUBCASE("an unreachable constraint triggers recovery") {
    const Vec b = Vec::LinSpaced(n, 0.1, 0.2);
    const SurrogateModel m = quadratic_model(theta, H, g, b, Vec::Constant(1, 5.0), delta);
    const UpdateResult r = cpo_update(theta, m, config());
    CHECK(r.step_kind == StepKind::recovery);
    CHECK(r.case_tag == CaseTag::infeasible);
    CHECK(r.direction.dot(H * r.direction) == doctest::Approx(2.0 * delta).epsilon(1e-8));
    CHECK(std::abs(r.direction.normalized().dot(-H.ldlt().solve(b).normalized()) - 1.0) < 1e-9);
    CHECK(r.accepted);
    CHECK(r.constraints_after(0) < 5.0);
  }
  SUBCASE("a violated but reachable constraint takes a feasibility step") {
    const Vec b = Vec::LinSpaced(n, 1.0, 2.0);
    const SurrogateModel m = quadratic_model(theta, H, g, b, Vec::Constant(1, 1e-3), delta);
    const UpdateResult r = cpo_update(theta, m, config());
    CHECK(r.step_kind == StepKind::feasibility);
    CHECK(r.accepted);
    CHECK(r.constraints_after(0) < 1e-3);
  }
  SUBCASE("two constraints") {
    Mat B(n, 2);
    B.col(0) = g + Vec::LinSpaced(n, 0.0, 0.3);
    B.col(1) = Vec::LinSpaced(n, 0.4, -0.2);
    const SurrogateModel m = quadratic_model(theta, H, g, B, (Vec(2) << -0.01, -0.02).finished(), delta);
    const UpdateResult r = cpo_update(theta, m, config());
    CHECK(r.accepted);
    CHECK(r.constraints_after.maxCoeff() <= 1e-6);
    CHECK(r.measured_kl <= delta * (1.0 + 1e-9));
    CHECK(r.surrogate_improvement > 0.0);
  }
}

TEST_CASE("primal-dual update") {
  const int n = 4;
  const Mat H = spd(3, n);
  const Vec theta = Vec::Zero(n);
  const Vec g = Vec::LinSpaced(n, 1.0, -0.5);
  const Vec b = Vec::LinSpaced(n, 0.3, 0.6);
  const SurrogateModel m = quadratic_model(theta, H, g, b, Vec::Constant(1, 0.2), 0.01);
  const SurrogateModel u = quadratic_model(theta, H, g, Mat(n, 0), Vec(0), 0.01);

  DualState dual;
  dual.nu = Vec::Zero(1);
  dual.alpha = 0.5;
  const UpdateResult r = pdo_update(theta, m, dual, config());
  // nu = 0 reproduces the unconstrained step
  CHECK((r.theta_new - trpo_update(theta, u, config()).theta_new).norm() < 1e-12);
  CHECK(dual.nu(0) == doctest::Approx(0.1));

  // a satisfied constraint shrinks the multiplier, never below zero
  const SurrogateModel ok = quadratic_model(theta, H, g, b, Vec::Constant(1, -1.0), 0.01);
  pdo_update(theta, ok, dual, config());
  CHECK(dual.nu(0) == 0.0);

  // positive nu tilts the step against b
  dual.nu(0) = 2.0;
  const UpdateResult tilted = pdo_update(theta, m, dual, config());
  const Vec dir = H.ldlt().solve(Vec(g - 2.0 * b));
  CHECK(std::abs(tilted.direction.normalized().dot(dir.normalized()) - 1.0) < 1e-9);
}

TEST_CASE("fixed penalty update") {
  CHECK(penalized_reward((Vec(2) << 1.0, 2.0).finished(), (Vec(2) << 0.5, 1.0).finished(), 2.0) ==
        (Vec(2) << 0.0, 0.0).finished());
  CHECK_THROWS_AS(penalized_reward(Vec::Zero(2), Vec::Zero(3), 1.0), std::invalid_argument);

  // a huge penalty turns the step into pure cost descent
  const int n = 4;
  const Mat H = spd(4, n);
  const Vec theta = Vec::Zero(n);
  const Vec g = Vec::LinSpaced(n, 1.0, -0.5);
  const Vec b = Vec::LinSpaced(n, 0.3, 0.6);
  const double lambda = 1e6;
  const SurrogateModel pen = quadratic_model(theta, H, g - lambda * b, Mat(n, 0), Vec(0), 0.01);
  const UpdateResult r = fpo_update(theta, pen, config());
  CHECK(r.direction.normalized().dot(-H.ldlt().solve(b).normalized()) > 1.0 - 1e-6);
  CHECK(r.direction.dot(b) < 0.0);
}

TEST_CASE("exact tabular CPO keeps the worst-case bounds every iteration") {
  Rng rng(41);
  tabular::RandomCmdpOptions o;
  o.n_states = 4;
  o.n_actions = 3;
  tabular::TabularCMDP mdp = tabular::random_cmdp(rng, o);
  const PolicyArch arch{4, 3, {}, HeadKind::categorical};
  ParamPolicy policy(arch, Vec::Zero(arch.param_count()));
  mdp.limits = Vec::Constant(1, tabular::policy_return(mdp, tabular::PolicyTable::uniform(4, 3),
                                                       tabular::Signal::cost(0)) +
                                       0.05);
  TrustRegionConfig cfg;
  cfg.delta_kl = 0.01;
  int accepted = 0;
  for (int it = 0; it < 30; ++it) {
    const SurrogateModel m = exact_tabular_surrogates(mdp, policy, cfg.delta_kl, cfg.cg.damping);
    const UpdateResult r = cpo_update(policy.theta(), m, cfg);
    const ParamPolicy next = policy.with_theta(r.theta_new);
    const tabular::WorstCaseReport rep = tabular::worst_case_bounds(
        mdp, policy_table(policy, 4), policy_table(next, 4), cfg.delta_kl * (1.0 + 1e-9));
    if (rep.reward_premise) CHECK(rep.reward_holds);
    if (rep.cost_premise) CHECK(rep.cost_holds);
    if (r.accepted) {
      ++accepted;
      CHECK(r.step_kind == StepKind::normal);
      CHECK(rep.cost_return_new <= rep.cost_ceiling + 1e-9);
    }
    policy = next;
  }
  CHECK(accepted > 0);
}

TEST_CASE("trust region settings are validated") {
  TrustRegionConfig c;
  CHECK_NOTHROW(c.validate());
  c.backtrack_ratio = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.backtrack_ratio = 0.8;
  c.delta_kl = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
