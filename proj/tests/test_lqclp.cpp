#include "cpo/lqclp.hpp"
#include "cpo/oracles.hpp"
#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

using namespace cpo;

namespace {

Mat random_spd(Rng& rng, int n) {
  std::normal_distribution<double> N(0.0, 1.0);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = N(rng);
  return a * a.transpose() + 0.5 * Mat::Identity(n, n);
}

Vec random_vec(Rng& rng, int n) {
  std::normal_distribution<double> N(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = N(rng);
  return v;
}

LqclpProblem exact_problem(const Vec& g, const Vec& b, double c, double delta, const Mat& H) {
  const Eigen::LDLT<Mat> ldlt(H);
  return make_lqclp(g, b, c, delta, ldlt.solve(g), ldlt.solve(b));
}

}  // namespace

TEST_CASE("sphere-constrained linear objective") {
  const Vec g = Vec::Unit(2, 0);
  const Vec b = Vec::Zero(2);
  const LqclpSolution s = solve_single(exact_problem(g, b, -1.0, 0.5, Mat::Identity(2, 2)));
  CHECK(s.case_tag == CaseTag::trust_region_only);
  CHECK(s.direction(0) == doctest::Approx(-0.70711).epsilon(1e-5));
  CHECK(std::abs(s.direction(1)) < 1e-15);
  CHECK(s.lambda_star == doctest::Approx(std::sqrt(2.0)));
  CHECK(s.nu_star(0) == 0.0);
}

TEST_CASE("infeasible when the constraint line misses the ellipsoid") {
  LqclpProblem p;
  p.q = 1.0;
  p.r = 0.0;
  p.s = 1.0;
  p.c = 1.0;
  p.delta = 0.5;
  p.hinv_g = Vec::Unit(2, 0);
  p.hinv_b = Vec::Unit(2, 1);
  CHECK(solve_single(p).case_tag == CaseTag::infeasible);
}

TEST_CASE("zero constraint gradient") {
  LqclpProblem p;
  p.q = 4.0;
  p.delta = 1.0;
  p.hinv_g = Vec::Constant(1, 2.0);
  p.hinv_b = Vec::Zero(1);
  p.c = 0.5;
  CHECK(solve_single(p).case_tag == CaseTag::infeasible);
  p.c = -0.5;
  const LqclpSolution s = solve_single(p);
  CHECK(s.case_tag == CaseTag::trust_region_only);
  CHECK(s.lambda_star == doctest::Approx(2.0));
}

TEST_CASE("zero objective gradient gives a zero step") {
  LqclpProblem p;
  p.q = 0.0;
  p.r = 0.0;
  p.s = 1.0;
  p.c = -0.1;
  p.delta = 1.0;
  p.hinv_g = Vec::Zero(2);
  p.hinv_b = Vec::Unit(2, 0);
  const LqclpSolution s = solve_single(p);
  CHECK(s.case_tag == CaseTag::constraint_inactive);
  CHECK(s.lambda_star == 0.0);
  CHECK(s.direction.norm() == 0.0);
}

TEST_CASE("Cauchy-Schwarz violations are rejected") {
  LqclpProblem p;
  p.q = 1.0;
  p.r = 2.0;
  p.s = 1.0;
  p.delta = 1.0;
  p.hinv_g = Vec::Zero(1);
  p.hinv_b = Vec::Zero(1);
  CHECK_THROWS_AS(solve_single(p), std::invalid_argument);
}

TEST_CASE("random instances agree with both oracles and satisfy KKT") {
  Rng rng(4242);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int infeasible = 0, active = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 1 + trial % 5;
    const Mat H = random_spd(rng, n);
    const Vec g = random_vec(rng, n), b = random_vec(rng, n);
    const double c = -2.0 + 4.0 * U(rng);
    const double delta = 0.1 + 1.9 * U(rng);
    const LqclpProblem p = exact_problem(g, b, c, delta, H);
    const LqclpSolution s = solve_single(p);
    const bool geometric_infeasible = c > 0.0 && c * c / p.s - delta > 0.0;
    const auto oracle = oracle::lqclp_dual_search(g, b, c, delta, H);
    CHECK((s.case_tag == CaseTag::infeasible) == geometric_infeasible);
    CHECK(oracle.feasible == !geometric_infeasible);
    if (geometric_infeasible) {
      ++infeasible;
      continue;
    }
    const Vec& x = s.direction;
    const double obj = g.dot(x);
    CHECK(std::abs(obj - oracle.objective) <= 1e-4 * std::max(1.0, std::abs(oracle.objective)));
    if (n == 2) {
      const auto planar = oracle::lqclp_planar_search(g, b, c, delta, H);
      CHECK(std::abs(obj - planar.objective) <= 1e-4 * std::max(1.0, std::abs(planar.objective)));
    }
    const double lam = s.lambda_star, nu = s.nu_star(0);
    const double quad = x.dot(H * x), lin = c + b.dot(x);
    CHECK(quad <= delta * (1.0 + 1e-6));
    CHECK(lin <= 1e-6);
    CHECK(lam >= 0.0);
    CHECK(nu >= 0.0);
    CHECK(std::abs(nu * lin) <= 1e-6);
    CHECK(std::abs(lam * (quad - delta)) <= 1e-6);
    // stationarity: g + nu b + lambda H x = 0
    CHECK((g + nu * b + lam * (H * x)).norm() <= 1e-6 * std::max(1.0, g.norm()));
    const bool inactive = s.case_tag == CaseTag::constraint_inactive || s.case_tag == CaseTag::trust_region_only;
    CHECK(inactive == (nu == 0.0));
    if (s.case_tag == CaseTag::constraint_active) ++active;
  }
  CHECK(infeasible > 10);
  CHECK(active > 10);
}

TEST_CASE("inactive tag matches the sign of lambda c - r") {
  Rng rng(17);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat H = random_spd(rng, 3);
    const LqclpProblem p = exact_problem(random_vec(rng, 3), random_vec(rng, 3), U(rng), 1.0, H);
    const LqclpSolution s = solve_single(p);
    if (s.case_tag == CaseTag::infeasible || s.lambda_star == 0.0) continue;
    const bool nu_zero = s.lambda_star * p.c - p.r <= 0.0;
    CHECK(nu_zero == (s.nu_star(0) == 0.0));
  }
}

TEST_CASE("dual ascent with one constraint matches the analytic solver") {
  Rng rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  int compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 4;
    const Mat H = random_spd(rng, n);
    const Eigen::LDLT<Mat> ldlt(H);
    const Vec g = random_vec(rng, n), b = random_vec(rng, n);
    const double c = U(rng), delta = 0.5;
    // maximization form of the same problem: max g^T x  <=>  min (-g)^T x
    const LqclpSolution multi = solve_dual_multi(g, b, Vec::Constant(1, c), delta,
                                                 [&](const Vec& v) { return Vec(ldlt.solve(v)); });
    const LqclpSolution single = solve_single(make_lqclp(-g, b, c, delta, ldlt.solve(-g), ldlt.solve(b)));
    CHECK((multi.case_tag == CaseTag::infeasible) == (single.case_tag == CaseTag::infeasible));
    if (single.case_tag == CaseTag::infeasible) continue;
    CHECK((multi.direction - single.direction).norm() <= 1e-5 * std::max(1.0, single.direction.norm()));
    ++compared;
  }
  CHECK(compared > 50);
}

TEST_CASE("strongly satisfied constraints leave the natural gradient step") {
  Rng rng(3);
  const int n = 4;
  const Mat H = random_spd(rng, n);
  const Eigen::LDLT<Mat> ldlt(H);
  const Vec g = random_vec(rng, n);
  Mat B(n, 2);
  B.col(0) = random_vec(rng, n);
  B.col(1) = random_vec(rng, n);
  const double delta = 0.3;
  const LqclpSolution s = solve_dual_multi(g, B, Vec::Constant(2, -100.0), delta,
                                           [&](const Vec& v) { return Vec(ldlt.solve(v)); });
  CHECK(s.nu_star.isZero());
  const Vec hg = ldlt.solve(g);
  const Vec expected = std::sqrt(delta / g.dot(hg)) * hg;
  CHECK((s.direction - expected).norm() <= 1e-8);
  CHECK(s.case_tag == CaseTag::trust_region_only);
}

TEST_CASE("two constraints against a dense dual grid") {
  Rng rng(13);
  const int n = 3;
  const Mat H = random_spd(rng, n);
  const Eigen::LDLT<Mat> ldlt(H);
  const Vec g = random_vec(rng, n);
  Mat B(n, 2);
  B.col(0) = random_vec(rng, n);
  B.col(1) = random_vec(rng, n);
  const Vec c(Vec::Constant(2, -0.2));
  const double delta = 1.0;
  const LqclpSolution s = solve_dual_multi(g, B, c, delta, [&](const Vec& v) { return Vec(ldlt.solve(v)); });
  REQUIRE(s.case_tag != CaseTag::infeasible);

  // minimized dual of the maximization problem, scanned on a grid
  const Vec hg = ldlt.solve(g);
  Mat hB(n, 2);
  hB.col(0) = ldlt.solve(B.col(0));
  hB.col(1) = ldlt.solve(B.col(1));
  const double q = g.dot(hg);
  const Vec r = B.transpose() * hg;
  const Mat S = B.transpose() * hB;
  auto dual = [&](const Vec& nu) {
    return std::sqrt(delta * std::max(0.0, q - 2.0 * r.dot(nu) + nu.dot(S * nu))) - nu.dot(c);
  };
  double best = 1e300;
  for (int i = 0; i <= 600; ++i)
    for (int j = 0; j <= 600; ++j) best = std::min(best, dual(Vec((Vec(2) << i * 0.01, j * 0.01).finished())));
  const double primal = g.dot(s.direction);
  CHECK(std::abs(primal - best) <= 1e-3);
  CHECK((c + B.transpose() * s.direction).maxCoeff() <= 1e-6);
  CHECK(s.direction.dot(H * s.direction) <= delta * (1.0 + 1e-6));
}

TEST_CASE("multi-constraint dual detects infeasibility") {
  const Mat H = Mat::Identity(2, 2);
  Mat B(2, 1);
  B << 1.0, 0.0;
  const LqclpSolution s = solve_dual_multi(Vec::Unit(2, 1), B, Vec::Constant(1, 5.0), 0.5,
                                           [&](const Vec& v) { return Vec(H.ldlt().solve(v)); });
  CHECK(s.case_tag == CaseTag::infeasible);
  CHECK(s.direction.isZero());
}

TEST_CASE("recovery step examples") {
  const Vec b = (Vec(2) << 3.0, 4.0).finished();
  const Vec x = recovery_direction(b, b, 0.5);
  CHECK(x(0) == doctest::Approx(-0.6));
  CHECK(x(1) == doctest::Approx(-0.8));
  const Vec x10 = recovery_direction(10.0 * b, 10.0 * b, 0.5);
  CHECK((x10 - x).norm() < 1e-12);
  CHECK_THROWS_AS(recovery_direction(Vec::Zero(2), Vec::Zero(2), 0.5), std::domain_error);

  Rng rng(9);
  const Mat H = random_spd(rng, 5);
  const Vec bb = random_vec(rng, 5);
  const Vec y = recovery_direction(bb, H.ldlt().solve(bb), 0.3);
  CHECK(std::abs(y.dot(H * y) - 0.6) < 1e-9);
  CHECK(bb.dot(y) < 0.0);
}

TEST_CASE("dual value at the optimum equals the primal objective") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat H = random_spd(rng, 3);
    const LqclpProblem p = exact_problem(random_vec(rng, 3), random_vec(rng, 3), -0.3, 0.7, H);
    const LqclpSolution s = solve_single(p);
    if (s.case_tag != CaseTag::constraint_active || s.lambda_star <= 0.0) continue;
    const Vec g = H * p.hinv_g;
    CHECK(lqclp_dual_value(p, s.lambda_star, s.nu_star(0)) == doctest::Approx(g.dot(s.direction)).epsilon(1e-8));
  }
}
