#pragma once

// Independent reference computations used to check the main code paths:
// series and iteration methods for tabular quantities, a one-dimensional
// dual search and a planar boundary search for the LQCLP, central finite
// differences, and quadratic-time GAE and labeling.

#include "cpo/estimation.hpp"
#include "cpo/tabular.hpp"
#include "cpo/types.hpp"

#include <functional>

namespace cpo::oracle {

/// (1-gamma) sum_t gamma^t P_pi^t mu, summed until gamma^t < tol.
Vec state_dist_series(const tabular::TabularCMDP& mdp, const tabular::PolicyTable& pol, double tol = 1e-15);

/// Policy evaluation by repeated Bellman backups.
Vec value_iteration(const tabular::TabularCMDP& mdp, const tabular::PolicyTable& pol, tabular::Signal signal,
                    double tol = 1e-13);

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Sampled discounted returns of `episodes` trajectories cut at `horizon`.
McEstimate monte_carlo_return(const tabular::TabularCMDP& mdp, const tabular::PolicyTable& pol,
                              tabular::Signal signal, int episodes, int horizon, Rng& rng);

struct LqclpOracle {
  bool feasible = false;
  double objective = 0.0;  // optimal g^T x
  double nu = 0.0;
};

/// min g^T x s.t. b^T x + c <= 0, x^T H x <= delta via golden-section search
/// on the concave dual nu -> -sqrt(delta (q + 2 nu r + nu^2 s)) + nu c.
/// Feasibility comes from minimizing b^T x over the ellipsoid.
LqclpOracle lqclp_dual_search(const Vec& g, const Vec& b, double c, double delta, const Mat& H);

/// Same problem for n = 2 by scanning the ellipse boundary, refining the
/// best arc point and checking where the line crosses the ellipse.
LqclpOracle lqclp_planar_search(const Vec& g, const Vec& b, double c, double delta, const Mat& H,
                                int grid = 20000);

/// Central differences of a scalar function, one coordinate at a time.
Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5);
/// Central differences of a vector function along direction v.
Vec finite_difference_directional(const std::function<Vec(const Vec&)>& f, const Vec& x, const Vec& v,
                                  double h = 1e-5);

/// ||a - b|| / max(||a||, ||b||, floor).
double relative_error(const Vec& a, const Vec& b, double floor = 1e-8);

/// A_t = sum_{k >= 0} (gamma lambda)^k delta_{t+k} within the episode.
Vec gae_quadratic(const TrajectoryBatch& batch, const Vec& signal, const Vec& values, double gamma, double lambda);

/// Labels by scanning every (t, t') pair.
Vec labels_quadratic(const TrajectoryBatch& batch, const Vec& unsafe, int horizon_T);

}  // namespace cpo::oracle
