#pragma once

// Cost shaping C+ = C + alpha * P(unsafe within the next T steps | s), with
// the probability supplied by a small learned classifier.

#include "cpo/estimation.hpp"
#include "cpo/mlp.hpp"
#include "cpo/types.hpp"

#include <vector>

namespace cpo {

struct ShapingConfig {
  bool enabled = false;
  int horizon_T = 5;
  double alpha = 1.0;
  int fit_steps = 25;
  double step = 1e-3;
  std::vector<int> hidden{32};

  void validate() const;
};

/// label(t) = 1 iff unsafe(t') = 1 for some t' in (t, t + T] of the same episode.
Vec label_batch(const TrajectoryBatch& batch, const Vec& unsafe, int horizon_T);

/// Single-hidden-layer tanh network with one sigmoid output.
class FailurePredictor {
 public:
  FailurePredictor() = default;
  FailurePredictor(int obs_dim, const std::vector<int>& hidden, Rng& rng);

  /// Probabilities in (0, 1), one per column of observations.
  Vec predict(const Mat& observations) const;
  double predict_one(const Vec& observation) const;
  /// Mean binary cross-entropy.
  double loss(const Mat& observations, const Vec& labels) const;

  const Vec& params() const { return params_; }
  void set_params(Vec params) { params_ = std::move(params); }
  const Mlp& network() const { return net_; }
  bool initialized() const { return net_.param_count() > 0; }

 private:
  Mlp net_;
  Vec params_;
};

/// Adam on the cross-entropy; returns the loss before and after each step.
std::vector<double> fit_predictor(FailurePredictor& predictor, const Mat& observations, const Vec& labels,
                                  int steps, double step_size);

/// cost + alpha * p(state).
double shaped_cost(double cost, const FailurePredictor& predictor, const Vec& state, double alpha);
/// Shaped costs for every step of a batch (raw costs when alpha is 0).
Vec shaped_costs(const Vec& costs, const FailurePredictor& predictor, const Mat& observations, double alpha);

}  // namespace cpo
