#pragma once

#include "cpo/types.hpp"

#include <functional>
#include <vector>

namespace cpo {

/// Damped Hessian-vector product v -> H v + damping v.
class HvpHandle {
 public:
  using Product = std::function<Vec(const Vec&)>;

  HvpHandle() = default;
  HvpHandle(Product product, int dim, double damping);

  Vec evaluate(const Vec& v) const;
  Vec undamped(const Vec& v) const;
  int dim() const { return dim_; }
  double damping() const { return damping_; }
  bool valid() const { return static_cast<bool>(product_); }

 private:
  Product product_;
  int dim_ = 0;
  double damping_ = 0.0;
};

struct CgSettings {
  int max_iters = -1;  // -1: 2 * dim capped at 100
  double tol = 1e-10;
  double damping = 1e-5;

  int iterations_for(int dim) const;
};

/// Per-iteration record, filled when a trace is requested.
struct CgTrace {
  std::vector<Vec> iterates;
  std::vector<double> residual_norms;
};

/// Solves (H + damping I) x = rhs. Stops when ||residual|| <= tol ||rhs||.
/// Throws std::runtime_error if a product returns a non-finite value.
Vec conjugate_gradient(const HvpHandle& hvp, const Vec& rhs, int max_iters, double tol,
                       CgTrace* trace = nullptr);

/// x^T H x without the damping term.
double quadratic_form(const HvpHandle& hvp, const Vec& x);

}  // namespace cpo
