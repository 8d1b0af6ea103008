#pragma once

// Parametric stochastic policies: a categorical head over logits or a
// diagonal Gaussian whose mean comes from an MLP and whose log standard
// deviations are free parameters appended after the network weights.

#include "cpo/mlp.hpp"
#include "cpo/types.hpp"

#include <string>
#include <vector>

namespace cpo {

enum class HeadKind { categorical, gaussian };

std::string to_string(HeadKind head);
HeadKind head_from_string(const std::string& name);

struct PolicyArch {
  int obs_dim = 0;
  int act_dim = 0;  // number of actions (categorical) or action dimension (Gaussian)
  std::vector<int> hidden;
  HeadKind head = HeadKind::gaussian;

  Mlp network() const { return Mlp(obs_dim, hidden, act_dim); }
  Eigen::Index param_count() const;
  /// Rows of the action matrix: 1 for categorical (holds the index), act_dim otherwise.
  int action_width() const { return head == HeadKind::categorical ? 1 : act_dim; }
  bool operator==(const PolicyArch&) const = default;
};

/// Per-state distribution parameters, one column per state.
struct DistParams {
  Mat logits;   // categorical: act_dim x N
  Mat mean;     // Gaussian: act_dim x N
  Vec log_std;  // Gaussian: act_dim
};

class ParamPolicy {
 public:
  ParamPolicy(PolicyArch arch, Vec theta);

  /// Fan-in scaled uniform weights; log-stds set to log_std_init.
  static ParamPolicy initialize(const PolicyArch& arch, Rng& rng, double log_std_init = -0.5);

  const PolicyArch& arch() const { return arch_; }
  const Vec& theta() const { return theta_; }
  ParamPolicy with_theta(Vec theta) const { return ParamPolicy(arch_, std::move(theta)); }

  DistParams distributions(const Mat& states, Mlp::Cache* cache = nullptr) const;

  double log_prob(const Vec& state, const Vec& action) const;
  Vec log_probs(const Mat& states, const Mat& actions) const;
  Vec log_prob_grad(const Vec& state, const Vec& action) const;

  /// sum_i weights_i * grad log pi(a_i | s_i).
  Vec weighted_score(const Mat& states, const Mat& actions, const Vec& weights) const;

  Vec sample(const Vec& state, Rng& rng) const;
  Vec sample(const Vec& state, std::uint64_t seed) const;

  /// Action probabilities for a categorical head (act_dim x N).
  Mat probabilities(const Mat& states) const;

 private:
  Eigen::Ref<const Vec> net_params() const;

  PolicyArch arch_;
  Mlp net_;
  Vec theta_;
};

// Weighted averages over states take `weights` as a distribution over the
// columns of `states` (normalized internally); an empty vector means uniform.

/// E_s[KL(new(.|s) || old(.|s))].
double mean_kl(const ParamPolicy& policy_new, const ParamPolicy& policy_old, const Mat& states,
               const Vec& weights = Vec());

/// Gradient of mean_kl with respect to the new policy's parameters.
Vec mean_kl_grad(const ParamPolicy& policy_new, const ParamPolicy& policy_old, const Mat& states,
                 const Vec& weights = Vec());

/// Hessian of theta -> mean_kl(theta, policy) at theta = policy.theta(), applied to v.
Vec kl_hvp(const ParamPolicy& policy, const Mat& states, const Vec& v, const Vec& weights = Vec());

/// Same product with the forward pass done once; reuse across CG iterations.
class KlHvp {
 public:
  KlHvp(const ParamPolicy& policy, const Mat& states, const Vec& weights = Vec());
  Vec operator()(const Vec& v) const;

 private:
  PolicyArch arch_;
  Mlp net_;
  Vec params_;
  Mlp::Cache cache_;
  Vec w_;
  Mat probs_;    // categorical
  Vec inv_var_;  // Gaussian
};

/// Likelihood-ratio gradient mean_i grad log pi(a_i|s_i) * adv_i at the current parameters.
Vec surrogate_grad(const ParamPolicy& policy, const Mat& states, const Mat& actions,
                   const Vec& advantages);

/// mean_i exp(log pi(a_i|s_i) - old_log_probs_i) * adv_i.
double surrogate_value(const ParamPolicy& policy, const Mat& states, const Mat& actions,
                       const Vec& old_log_probs, const Vec& advantages);

}  // namespace cpo
