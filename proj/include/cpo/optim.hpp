#pragma once

// Full-batch Adam with a monotone safeguard: a step that raises the loss is
// undone, the moments reset and the step size halved, so recorded losses
// never increase.
// Accepted steps let the step size grow back toward its initial value.

#include "cpo/types.hpp"

#include <functional>
#include <vector>

namespace cpo {

struct AdamSettings {
  double step = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Returns the loss at params and writes its gradient into *grad.
using LossGrad = std::function<double(const Vec& params, Vec* grad)>;

/// Runs `iters` Adam proposals starting from `params`. When `losses` is
/// given it receives the loss before the first step and after each step.
Vec adam_monotone(const LossGrad& objective, Vec params, int iters, const AdamSettings& settings,
                  std::vector<double>* losses = nullptr);

}  // namespace cpo
