#include "cpo/mlp.hpp"
#include "cpo/oracles.hpp"
#include "cpo/policy.hpp"
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace cpo;

namespace {

ParamPolicy random_policy(std::uint64_t seed, HeadKind head, int obs = 3, int act = 2,
                          std::vector<int> hidden = {5, 4}) {
  Rng rng(seed);
  PolicyArch arch{obs, act, std::move(hidden), head};
  ParamPolicy p = ParamPolicy::initialize(arch, rng);
  std::normal_distribution<double> N(0.0, 0.3);
  Vec theta = p.theta();
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += N(rng);
  return p.with_theta(theta);
}

Mat random_states(std::uint64_t seed, int obs, int n) {
  Rng rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Mat s(obs, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < obs; ++i) s(i, j) = N(rng);
  return s;
}

Mat sample_actions(const ParamPolicy& p, const Mat& states, std::uint64_t seed) {
  Rng rng(seed);
  Mat a(p.arch().action_width(), states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) a.col(j) = p.sample(states.col(j), rng);
  return a;
}

}  // namespace

TEST_CASE("parameter count follows the architecture") {
  const PolicyArch g{10, 2, {16, 8}, HeadKind::gaussian};
  CHECK(g.param_count() == 16 * 11 + 8 * 17 + 2 * 9 + 2);
  const PolicyArch c{4, 3, {}, HeadKind::categorical};
  CHECK(c.param_count() == 3 * 5);
  CHECK_THROWS(ParamPolicy(g, Vec::Zero(5)));
}

TEST_CASE("uniform categorical log-probabilities") {
  const PolicyArch arch{2, 4, {3}, HeadKind::categorical};
  const ParamPolicy p(arch, Vec::Zero(arch.param_count()));
  const Vec s = Vec::Ones(2);
  double total = 0.0;
  for (int a = 0; a < 4; ++a) {
    const double lp = p.log_prob(s, Vec::Constant(1, a));
    CHECK(lp == doctest::Approx(-1.386294).epsilon(1e-6));
    total += std::exp(lp);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("categorical probabilities sum to one") {
  const ParamPolicy p = random_policy(2, HeadKind::categorical, 3, 5);
  const Mat probs = p.probabilities(random_states(2, 3, 20));
  CHECK((probs.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("Gaussian log density at the mean") {
  const ParamPolicy p = random_policy(3, HeadKind::gaussian, 3, 2);
  const Vec s = Vec::LinSpaced(3, -1.0, 1.0);
  const DistParams d = p.distributions(s);
  const double expected = -d.log_std.sum() - 1.0 * std::log(2.0 * std::numbers::pi);
  CHECK(p.log_prob(s, d.mean.col(0)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("non-finite states are rejected") {
  const ParamPolicy p = random_policy(1, HeadKind::gaussian);
  Vec s = Vec::Zero(3);
  s(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(p.log_prob(s, Vec::Zero(2)));
}

TEST_CASE("log-probability gradients match finite differences") {
  for (HeadKind head : {HeadKind::gaussian, HeadKind::categorical}) {
    const ParamPolicy p = random_policy(4, head, 3, 3);
    const Mat states = random_states(4, 3, 5);
    const Mat actions = sample_actions(p, states, 4);
    for (int j = 0; j < 5; ++j) {
      const Vec s = states.col(j), a = actions.col(j);
      const Vec fd = oracle::finite_difference_gradient(
          [&](const Vec& th) { return p.with_theta(th).log_prob(s, a); }, p.theta());
      CHECK(oracle::relative_error(p.log_prob_grad(s, a), fd) < 1e-4);
    }
  }
}

TEST_CASE("sampling") {
  SUBCASE("degenerate categorical always picks the sure action") {
    const PolicyArch arch{1, 2, {}, HeadKind::categorical};
    Vec theta = Vec::Zero(arch.param_count());
    theta(arch.param_count() - 2) = 50.0;  // bias of action 0
    const ParamPolicy p(arch, theta);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) CHECK(p.sample(Vec::Zero(1), rng)(0) == 0.0);
  }
  SUBCASE("vanishing Gaussian noise returns the mean") {
    PolicyArch arch{2, 2, {3}, HeadKind::gaussian};
    Rng rng(2);
    const ParamPolicy p = ParamPolicy::initialize(arch, rng, -20.0);
    const Vec s = Vec::Ones(2);
    CHECK((p.sample(s, std::uint64_t{9}) - p.distributions(s).mean.col(0)).norm() < 1e-6);
  }
  SUBCASE("fixed seeds repeat") {
    const ParamPolicy p = random_policy(5, HeadKind::gaussian);
    const Vec s = Vec::Ones(3);
    CHECK(p.sample(s, std::uint64_t{42}) == p.sample(s, std::uint64_t{42}));
    Rng a(7), b(7);
    for (int i = 0; i < 10; ++i) CHECK(p.sample(s, a) == p.sample(s, b));
  }
  SUBCASE("categorical frequencies match probabilities") {
    const ParamPolicy p = random_policy(6, HeadKind::categorical, 2, 3);
    const Vec s = Vec::Ones(2);
    const Vec probs = p.probabilities(s).col(0);
    Rng rng(6);
    const int n = 100000;
    Vec counts = Vec::Zero(3);
    for (int i = 0; i < n; ++i) counts(static_cast<int>(p.sample(s, rng)(0))) += 1.0;
    for (int a = 0; a < 3; ++a) {
      const double sigma = std::sqrt(n * probs(a) * (1.0 - probs(a)));
      CHECK(std::abs(counts(a) - n * probs(a)) <= 4.0 * sigma);
    }
  }
}

TEST_CASE("KL divergences") {
  SUBCASE("identical parameters") {
    const ParamPolicy p = random_policy(7, HeadKind::gaussian);
    const Mat states = random_states(7, 3, 10);
    CHECK(mean_kl(p, p, states) == 0.0);
    CHECK(mean_kl_grad(p, p, states).norm() < 1e-8);
    const ParamPolicy c = random_policy(7, HeadKind::categorical);
    CHECK(std::abs(mean_kl(c, c, states)) < 1e-15);
    CHECK(mean_kl_grad(c, c, states).norm() < 1e-8);
  }
  SUBCASE("unit-variance Gaussians one apart") {
    const PolicyArch arch{1, 2, {}, HeadKind::gaussian};
    Vec a = Vec::Zero(arch.param_count()), b = Vec::Zero(arch.param_count());
    b(2) = 1.0;  // bias of the first mean output
    const Mat states = random_states(8, 1, 4);
    CHECK(mean_kl(ParamPolicy(arch, b), ParamPolicy(arch, a), states) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("Monte Carlo agreement") {
    const ParamPolicy oldp = random_policy(9, HeadKind::gaussian, 3, 2);
    const ParamPolicy newp = random_policy(10, HeadKind::gaussian, 3, 2);
    const Vec s = Vec::LinSpaced(3, 0.2, -0.4);
    Rng rng(11);
    const int n = 1000000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec a = newp.sample(s, rng);
      const double x = newp.log_prob(s, a) - oldp.log_prob(s, a);
      sum += x;
      sq += x * x;
    }
    const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - mean_kl(newp, oldp, s)) <= 3.0 * se);
  }
  SUBCASE("KL gradient matches finite differences") {
    for (HeadKind head : {HeadKind::gaussian, HeadKind::categorical}) {
      const ParamPolicy oldp = random_policy(12, head);
      const ParamPolicy newp = random_policy(13, head);
      const Mat states = random_states(12, 3, 6);
      const Vec fd = oracle::finite_difference_gradient(
          [&](const Vec& th) { return mean_kl(oldp.with_theta(th), oldp, states); }, newp.theta());
      CHECK(oracle::relative_error(mean_kl_grad(newp, oldp, states), fd) < 1e-4);
    }
  }
}

TEST_CASE("KL Hessian-vector products") {
  for (HeadKind head : {HeadKind::gaussian, HeadKind::categorical}) {
    const ParamPolicy p = random_policy(14, head);
    const Mat states = random_states(14, 3, 8);
    const Eigen::Index n = p.theta().size();
    CHECK(kl_hvp(p, states, Vec::Zero(n)).isZero());
    Rng rng(15);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int probe = 0; probe < 5; ++probe) {
      Vec u(n), v(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        u(i) = N(rng);
        v(i) = N(rng);
      }
      const Vec hv = kl_hvp(p, states, v);
      const Vec fd = oracle::finite_difference_directional(
          [&](const Vec& th) { return mean_kl_grad(p.with_theta(th), p, states); }, p.theta(), v);
      CHECK(oracle::relative_error(hv, fd) < 1e-4);
      CHECK(std::abs(u.dot(hv) - v.dot(kl_hvp(p, states, u))) < 1e-8 * std::max(1.0, std::abs(u.dot(hv))));
      CHECK(v.dot(hv) >= -1e-12);
      CHECK((KlHvp(p, states)(v) - hv).norm() < 1e-12 * std::max(1.0, hv.norm()));
    }
  }
}

TEST_CASE("KL Hessian of a bare softmax is the analytic Fisher") {
  const PolicyArch arch{1, 4, {}, HeadKind::categorical};
  Vec theta(arch.param_count());
  theta << 0.3, -0.2, 0.5, 0.1, 0.4, -1.0, 0.2, 0.7;  // W then logits bias
  const ParamPolicy p(arch, theta);
  const Mat state = Mat::Zero(1, 1);  // logits equal the bias
  const Vec probs = p.probabilities(state).col(0);
  const Mat fisher = Mat(probs.asDiagonal()) - probs * probs.transpose();
  const Vec v = (Vec(8) << 1.0, 2.0, 3.0, 4.0, 0.5, -1.0, 2.0, 0.25).finished();
  const Vec hv = kl_hvp(p, state, v);
  CHECK(hv.head(4).norm() < 1e-12);
  CHECK((hv.tail(4) - fisher * v.tail(4)).norm() < 1e-8);
}

TEST_CASE("surrogate gradients") {
  const ParamPolicy p = random_policy(16, HeadKind::gaussian);
  const Mat states = random_states(16, 3, 50);
  const Mat actions = sample_actions(p, states, 16);
  CHECK(surrogate_grad(p, states, actions, Vec::Zero(50)).isZero());
  CHECK_THROWS(surrogate_grad(p, states, actions, Vec::Zero(49)));

  Rng rng(17);
  std::normal_distribution<double> N(0.0, 1.0);
  Vec adv(50);
  for (int i = 0; i < 50; ++i) adv(i) = N(rng);
  const Vec old_lp = p.log_probs(states, actions);
  const Vec fd = oracle::finite_difference_gradient(
      [&](const Vec& th) { return surrogate_value(p.with_theta(th), states, actions, old_lp, adv); }, p.theta());
  CHECK(oracle::relative_error(surrogate_grad(p, states, actions, adv), fd) < 1e-3);
  CHECK(surrogate_value(p, states, actions, old_lp, adv) == doctest::Approx(adv.mean()));
}

TEST_CASE("score function has zero mean on a large batch") {
  const ParamPolicy p = random_policy(18, HeadKind::gaussian, 2, 2, {4});
  const Vec s = Vec::Ones(2);
  const int n = 200000;
  const Mat states = s.replicate(1, n);
  const Mat actions = sample_actions(p, states, 18);
  const Vec g = surrogate_grad(p, states, actions, Vec::Ones(n));
  // per-coordinate standard error of the mean score
  Vec sq = Vec::Zero(g.size());
  for (int j = 0; j < 2000; ++j) sq += p.log_prob_grad(s, actions.col(j)).cwiseAbs2();
  const Vec se = (sq / 2000.0 / n).cwiseSqrt();
  for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(std::abs(g(i)) <= 5.0 * se(i) + 1e-12);
}

TEST_CASE("network reverse and forward modes agree with finite differences") {
  const Mlp net(3, {4, 2}, 2);
  Rng rng(19);
  const Vec params = net.initial_params(rng) + Vec::Constant(net.param_count(), 0.1);
  const Mat x = random_states(19, 3, 4);
  Mlp::Cache cache;
  const Mat y = net.forward(params, x, &cache);
  const Mat dout = random_states(20, 2, 4);
  const Vec grad = net.backward(params, cache, dout);
  const Vec fd = oracle::finite_difference_gradient(
      [&](const Vec& th) { return net.forward(th, x).cwiseProduct(dout).sum(); }, params);
  CHECK(oracle::relative_error(grad, fd) < 1e-6);
  const Vec v = Vec::LinSpaced(net.param_count(), -1.0, 1.0);
  const Mat jv = net.jvp(params, cache, v);
  const Mat fd_jv = (net.forward(params + 1e-6 * v, x) - net.forward(params - 1e-6 * v, x)) / 2e-6;
  CHECK((jv - fd_jv).norm() < 1e-6);
  CHECK(y.rows() == 2);
}
