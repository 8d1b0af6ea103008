#pragma once

// Sampling trajectories, advantage estimation, value fitting and the
// linearized quantities (g, b_i, c_i, H) consumed by the policy updates.

#include "cpo/environments.hpp"
#include "cpo/mlp.hpp"
#include "cpo/natural_gradient.hpp"
#include "cpo/optim.hpp"
#include "cpo/policy.hpp"
#include "cpo/tabular.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace cpo {

/// Time-major steps; column i of every matrix belongs to step i.
struct TrajectoryBatch {
  Mat observations;               // obs_dim x N, state the action was taken in
  Mat actions;                    // action_width x N
  Vec rewards;                    // N
  Mat costs;                      // n_costs x N
  Vec log_probs;                  // N, under the sampling policy
  std::vector<char> episode_start;
  std::vector<int> time_index;    // step within its episode
  std::vector<int> lengths;       // one entry per episode

  int size() const { return static_cast<int>(rewards.size()); }
  int n_episodes() const { return static_cast<int>(lengths.size()); }
  int n_costs() const { return static_cast<int>(costs.rows()); }
  /// Offsets of each episode's first step.
  std::vector<int> episode_offsets() const;
  /// Throws std::invalid_argument on inconsistent shapes or non-finite log-probs.
  void validate() const;
};

/// Samples whole episodes until at least total_steps steps are collected;
/// the episode in progress when the budget runs out is finished. Episodes
/// stop when the environment reports done or at max_path_length steps.
TrajectoryBatch rollout(Environment& env, const ParamPolicy& policy, int total_steps, int max_path_length,
                        std::uint64_t seed);

/// sum_t gamma^t x_t for each episode.
Vec episode_discounted_sums(const TrajectoryBatch& batch, const Vec& signal, double gamma);
/// Per-step discounted sum of the signal to the end of its episode.
Vec discounted_to_go(const TrajectoryBatch& batch, const Vec& signal, double gamma);

/// GAE-lambda with V = 0 beyond the end of every episode.
Vec gae_advantages(const TrajectoryBatch& batch, const Vec& signal, const Vec& values, double gamma,
                   double lambda);

struct EstimatorConfig {
  double gamma = 0.995;
  double lambda_gae = 0.95;
  double lambda_gae_cost = 1.0;
  int value_fit_iters = 50;
  double value_fit_step = 1e-2;
  std::vector<int> value_hidden{16, 8};
  bool normalize_advantages = true;  // reward advantages only
  bool discounted_weighting = true;  // weight step t by gamma^t and sum per episode
  double fisher_fraction = 1.0;      // share of batch states used for the KL Hessian

  void validate() const;
};

/// MLP regressor with an output affine map value = offset + scale * net(x).
/// Each fit re-centres the map on the new targets without changing the
/// current predictions, then trains in normalized units.
class ValueFunction {
 public:
  ValueFunction() = default;
  ValueFunction(int obs_dim, const std::vector<int>& hidden, Rng& rng);

  Vec predict(const Mat& observations) const;
  const Vec& params() const { return params_; }
  void set_params(Vec params) { params_ = std::move(params); }
  const Mlp& network() const { return net_; }
  double offset() const { return offset_; }
  double scale() const { return scale_; }
  /// Switches to a new output map while preserving predictions.
  void rescale(double offset, double scale);

  /// Mean squared error against targets.
  double mse(const Mat& observations, const Vec& targets) const;

 private:
  Mlp net_;
  Vec params_;
  double offset_ = 0.0;
  double scale_ = 1.0;
};

/// Full-batch Adam on the mean squared error; returns the per-step losses
/// in normalized units (MSE / scale^2).
std::vector<double> fit_values(ValueFunction& vf, const Mat& observations, const Vec& targets, int iters,
                               double step);

/// Linearized problem around the current policy. The callbacks evaluate,
/// at candidate parameters, the quantities the line search checks.
struct SurrogateModel {
  Vec g;
  std::vector<Vec> b_list;
  Vec c;  // J_Ci(pi_k) - d_i
  double delta = 0.0;
  HvpHandle hvp;

  std::function<double(const Vec&)> kl;
  std::function<double(const Vec&)> objective_gain;
  std::function<Vec(const Vec&)> constraint_values;

  int n_constraints() const { return static_cast<int>(b_list.size()); }
  Mat B() const;
  void validate() const;
};

struct AdvantageSet {
  Vec reward;
  std::vector<Vec> costs;
  Vec cost_returns;  // estimated J_Ci(pi_k)
};

/// g from (normalized) reward advantages, b_i from raw cost advantages,
/// c_i = cost_returns_i - limits_i. Step t of an episode gets weight
/// gamma^t / n_episodes when discounted_weighting is set; otherwise every
/// step gets 1/N and the cost terms carry a 1/(1-gamma) factor.
SurrogateModel build_surrogates(const TrajectoryBatch& batch, const ParamPolicy& policy,
                                const AdvantageSet& adv, const Vec& limits, double delta,
                                const EstimatorConfig& config, double cg_damping);

/// Exact linearization of a categorical policy on one-hot states of a finite
/// CMDP: g = grad J, b_i = grad J_Ci, and callbacks weighted by d^pi.
SurrogateModel exact_tabular_surrogates(const tabular::TabularCMDP& mdp, const ParamPolicy& policy,
                                        double delta, double cg_damping);

/// Action probabilities of a categorical policy over one-hot states.
tabular::PolicyTable policy_table(const ParamPolicy& policy, int n_states);

/// Writes one row per step: episode, t, obs..., act..., reward, cost..., log_prob.
void write_batch_csv(std::ostream& os, const TrajectoryBatch& batch);

}  // namespace cpo
