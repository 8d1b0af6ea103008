#include "cpo/natural_gradient.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace cpo {

HvpHandle::HvpHandle(Product product, int dim, double damping)
    : product_(std::move(product)), dim_(dim), damping_(damping) {
  if (dim <= 0) throw std::invalid_argument("HVP dimension must be positive");
  if (damping < 0.0) throw std::invalid_argument("damping must be nonnegative");
}

Vec HvpHandle::undamped(const Vec& v) const {
  if (v.size() != dim_) throw std::invalid_argument("HVP argument has wrong dimension");
  return product_(v);
}

Vec HvpHandle::evaluate(const Vec& v) const { return undamped(v) + damping_ * v; }

int CgSettings::iterations_for(int dim) const {
  return max_iters > 0 ? max_iters : std::min(2 * dim, 100);
}

Vec conjugate_gradient(const HvpHandle& hvp, const Vec& rhs, int max_iters, double tol,
                       CgTrace* trace) {
  if (rhs.size() != hvp.dim()) throw std::invalid_argument("CG right-hand side has wrong dimension");
  if (!rhs.allFinite()) throw std::invalid_argument("CG right-hand side is not finite");

  Vec x = Vec::Zero(rhs.size());
  const double rhs_norm = rhs.norm();
  if (trace) {
    trace->iterates.push_back(x);
    trace->residual_norms.push_back(rhs_norm);
  }
  if (rhs_norm == 0.0) return x;

  Vec r = rhs;
  Vec p = r;
  double rr = r.squaredNorm();
  for (int it = 0; it < max_iters; ++it) {
    const Vec hp = hvp.evaluate(p);
    if (!hp.allFinite()) throw std::runtime_error("non-finite Hessian-vector product in CG");
    const double curvature = p.dot(hp);
    if (!(curvature > 0.0)) break;
    const double alpha = rr / curvature;
    x += alpha * p;
    r -= alpha * hp;
    const double rr_next = r.squaredNorm();
    if (trace) {
      trace->iterates.push_back(x);
      trace->residual_norms.push_back(std::sqrt(rr_next));
    }
    if (std::sqrt(rr_next) <= tol * rhs_norm) break;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return x;
}

double quadratic_form(const HvpHandle& hvp, const Vec& x) { return x.dot(hvp.undamped(x)); }

}  // namespace cpo
