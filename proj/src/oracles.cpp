#include "cpo/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cpo::oracle {

using tabular::PolicyTable;
using tabular::Signal;
using tabular::TabularCMDP;

Vec state_dist_series(const TabularCMDP& mdp, const PolicyTable& pol, double tol) {
  const Mat P = tabular::policy_transition(mdp, pol);
  Vec p = mdp.start_dist;
  Vec acc = Vec::Zero(mdp.n_states);
  double w = 1.0;
  while (w >= tol) {
    acc += w * p;
    p = P.transpose() * p;
    w *= mdp.gamma;
  }
  return (1.0 - mdp.gamma) * acc;
}

Vec value_iteration(const TabularCMDP& mdp, const PolicyTable& pol, Signal signal, double tol) {
  const int S = mdp.n_states, A = mdp.n_actions;
  const Mat& X = signal.is_reward() ? mdp.reward : mdp.costs.at(signal.cost_index);
  Vec v = Vec::Zero(S);
  for (int it = 0; it < 100000; ++it) {
    Vec next = Vec::Zero(S);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const int row = mdp.row(s, a);
        double q = 0.0;
        for (int s2 = 0; s2 < S; ++s2) q += mdp.transition(row, s2) * (X(row, s2) + mdp.gamma * v(s2));
        next(s) += pol.probs(s, a) * q;
      }
    const double change = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (change < tol) break;
  }
  return v;
}

McEstimate monte_carlo_return(const TabularCMDP& mdp, const PolicyTable& pol, Signal signal, int episodes,
                              int horizon, Rng& rng) {
  const Mat& X = signal.is_reward() ? mdp.reward : mdp.costs.at(signal.cost_index);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](auto&& probs) {
    const double x = u(rng);
    double acc = 0.0;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
      acc += probs(i);
      if (x < acc) return i;
    }
    return n - 1;
  };
  double sum = 0.0, sum_sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    int s = draw(mdp.start_dist);
    double ret = 0.0, w = 1.0;
    for (int t = 0; t < horizon; ++t) {
      const int a = draw(pol.probs.row(s));
      const int row = mdp.row(s, a);
      const int s2 = draw(mdp.transition.row(row));
      ret += w * X(row, s2);
      w *= mdp.gamma;
      s = s2;
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  McEstimate out;
  out.mean = sum / episodes;
  const double var = std::max(0.0, sum_sq / episodes - out.mean * out.mean);
  out.stderr_ = std::sqrt(var / episodes);
  return out;
}

LqclpOracle lqclp_dual_search(const Vec& g, const Vec& b, double c, double delta, const Mat& H) {
  const Eigen::LDLT<Mat> ldlt(H);
  const Vec hg = ldlt.solve(g);
  const Vec hb = ldlt.solve(b);
  const double q = g.dot(hg), r = g.dot(hb), s = b.dot(hb);

  LqclpOracle out;
  // Smallest b^T x over the ellipsoid is -sqrt(delta s).
  out.feasible = c - std::sqrt(delta * std::max(s, 0.0)) <= 0.0;
  if (!out.feasible) return out;

  auto dual = [&](double nu) { return -std::sqrt(delta * std::max(q + 2.0 * nu * r + nu * nu * s, 0.0)) + nu * c; };
  // Grow the bracket until the dual starts decreasing.
  double hi = 1.0;
  for (int k = 0; k < 200 && dual(2.0 * hi) > dual(hi); ++k) hi *= 2.0;
  hi *= 2.0;
  double lo = 0.0;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = dual(x1), f2 = dual(x2);
  for (int it = 0; it < 300; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = dual(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = dual(x1);
    }
  }
  out.nu = 0.5 * (lo + hi);
  out.objective = std::max({dual(out.nu), dual(0.0)});
  if (dual(0.0) >= dual(out.nu)) out.nu = 0.0;
  return out;
}

LqclpOracle lqclp_planar_search(const Vec& g, const Vec& b, double c, double delta, const Mat& H, int grid) {
  if (g.size() != 2) throw std::invalid_argument("planar search needs n = 2");
  // x = sqrt(delta) L^-T u with ||u|| = 1 traces the boundary x^T H x = delta.
  const Eigen::LLT<Mat> llt(H);
  const Mat Linv_t = llt.matrixU().solve(Mat::Identity(2, 2));
  auto point = [&](double angle, double radius) {
    Vec u(2);
    u << std::cos(angle), std::sin(angle);
    return Vec(std::sqrt(delta) * radius * (Linv_t * u));
  };
  const double big = std::numeric_limits<double>::infinity();
  auto value = [&](const Vec& x) { return b.dot(x) + c <= 1e-12 ? g.dot(x) : big; };

  LqclpOracle out;
  double best = big;
  double best_angle = 0.0;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int k = 0; k < grid; ++k) {
    const double angle = two_pi * k / grid;
    const double v = value(point(angle, 1.0));
    if (v < best) {
      best = v;
      best_angle = angle;
    }
  }
  if (best < big) {
    // Golden refinement around the best boundary sample.
    double lo = best_angle - two_pi / grid, hi = best_angle + two_pi / grid;
    for (int it = 0; it < 100; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (value(point(m1, 1.0)) < value(point(m2, 1.0)))
        hi = m2;
      else
        lo = m1;
    }
    best = std::min(best, value(point(0.5 * (lo + hi), 1.0)));
  }
  // Points where b^T x + c = 0 meets the boundary: in u-coordinates the line
  // is w^T u = -c / sqrt(delta) with w = L^-1 b.
  const Vec w = Linv_t.transpose() * b;
  const double wn = w.norm();
  const double rhs = -c / std::sqrt(delta);
  if (wn > 0.0 && std::abs(rhs) <= wn) {
    const Vec foot = (rhs / (wn * wn)) * w;
    Vec perp(2);
    perp << -w(1) / wn, w(0) / wn;
    const double half = std::sqrt(std::max(0.0, 1.0 - foot.squaredNorm()));
    for (double sign : {-1.0, 1.0}) {
      const Vec u = foot + sign * half * perp;
      const Vec x = std::sqrt(delta) * (Linv_t * u);
      best = std::min(best, g.dot(x));
    }
  }
  // The origin is feasible whenever c <= 0.
  if (c <= 0.0) best = std::min(best, 0.0);
  out.feasible = best < big;
  out.objective = best;
  return out;
}

Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec grad(x.size());
  Vec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

Vec finite_difference_directional(const std::function<Vec(const Vec&)>& f, const Vec& x, const Vec& v, double h) {
  return (f(x + h * v) - f(x - h * v)) / (2.0 * h);
}

double relative_error(const Vec& a, const Vec& b, double floor) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

Vec gae_quadratic(const TrajectoryBatch& batch, const Vec& signal, const Vec& values, double gamma, double lambda) {
  const int n = batch.size();
  Vec adv = Vec::Zero(n);
  const auto offsets = batch.episode_offsets();
  for (int e = 0; e < batch.n_episodes(); ++e) {
    const int begin = offsets[e], end = begin + batch.lengths[e];
    for (int t = begin; t < end; ++t) {
      double w = 1.0;
      for (int k = t; k < end; ++k) {
        const double next = k + 1 < end ? values(k + 1) : 0.0;
        adv(t) += w * (signal(k) + gamma * next - values(k));
        w *= gamma * lambda;
      }
    }
  }
  return adv;
}

Vec labels_quadratic(const TrajectoryBatch& batch, const Vec& unsafe, int horizon_T) {
  const int n = batch.size();
  Vec labels = Vec::Zero(n);
  const auto offsets = batch.episode_offsets();
  for (int e = 0; e < batch.n_episodes(); ++e) {
    const int begin = offsets[e], end = begin + batch.lengths[e];
    for (int t = begin; t < end; ++t)
      for (int k = t + 1; k < end; ++k)
        if (k - t <= horizon_T && unsafe(k) > 0.0) labels(t) = 1.0;
  }
  return labels;
}

}  // namespace cpo::oracle
