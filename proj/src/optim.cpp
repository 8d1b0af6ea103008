#include "cpo/optim.hpp"

#include <algorithm>
#include <cmath>

namespace cpo {

Vec adam_monotone(const LossGrad& objective, Vec params, int iters, const AdamSettings& settings,
                  std::vector<double>* losses) {
  if (iters <= 0) return params;
  Vec grad;
  double loss = objective(params, &grad);
  if (losses) losses->push_back(loss);

  Vec m = Vec::Zero(params.size());
  Vec v = Vec::Zero(params.size());
  double step = settings.step;
  int t = 0;
  for (int it = 0; it < iters; ++it) {
    const Vec m_next = settings.beta1 * m + (1.0 - settings.beta1) * grad;
    const Vec v_next = settings.beta2 * v + (1.0 - settings.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(settings.beta1, t + 1);
    const double c2 = 1.0 - std::pow(settings.beta2, t + 1);
    const Vec update = (m_next / c1).array() / ((v_next / c2).array().sqrt() + settings.eps);
    const Vec candidate = params - step * update;

    Vec cand_grad;
    const double cand_loss = objective(candidate, &cand_grad);
    if (std::isfinite(cand_loss) && cand_loss <= loss) {
      params = candidate;
      grad = std::move(cand_grad);
      loss = cand_loss;
      m = m_next;
      v = v_next;
      ++t;
      step = std::min(settings.step, 2.0 * step);
    } else {
      // stale momentum can point uphill; restart from the raw gradient
      step *= 0.5;
      m.setZero();
      v.setZero();
      t = 0;
    }
    if (losses) losses->push_back(loss);
  }
  return params;
}

}  // namespace cpo
