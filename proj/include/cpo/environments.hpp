#pragma once

// Point-mass Circle and Gather tasks plus an adapter that steps any finite
// CMDP through the same interface.

#include "cpo/tabular.hpp"
#include "cpo/types.hpp"

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace cpo {

struct StepResult {
  Vec observation;
  double reward = 0.0;
  Vec cost;  // one entry per constraint
  bool done = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual int observation_dim() const = 0;
  /// Width of the action vector; 1 (holding the index) for discrete actions.
  virtual int action_dim() const = 0;
  /// Number of discrete actions, 0 for continuous control.
  virtual int n_discrete_actions() const { return 0; }
  virtual int n_costs() const { return 1; }
  virtual std::string name() const = 0;

  virtual void seed(std::uint64_t seed) = 0;
  virtual Vec reset() = 0;
  virtual StepResult step(const Vec& action) = 0;
};

// Velocity-controlled point: v <- smoothing v + (1 - smoothing) gain a, p <- p + v dt.
struct PointDynamics {
  double smoothing = 0.9;
  double action_gain = 10.0;
  double dt = 0.1;
};

struct PointState {
  std::array<double, 2> position{0.0, 0.0};
  std::array<double, 2> velocity{0.0, 0.0};
};

/// Applies a clipped action to the point mass.
PointState point_step(const PointState& state, const Vec& action, const PointDynamics& dyn);

struct CircleParams {
  double d = 15.0;
  double x_lim = 2.5;
  int horizon = 65;
  double start_noise = 0.1;
  PointDynamics dynamics;

  void validate() const;
  static CircleParams reference();
  static CircleParams desk();
};

/// v^T [-y, x] / (1 + | ||(x, y)|| - d |)
double circle_reward(const PointState& state, double d);
/// 1[|x| > x_lim]
double circle_cost(const PointState& state, double x_lim);

struct CircleStep {
  PointState next;
  double reward = 0.0;
  double cost = 0.0;
};

CircleStep circle_step(const PointState& state, const Vec& action, const CircleParams& params);

class PointCircle final : public Environment {
 public:
  static constexpr int kObsDim = 9;

  explicit PointCircle(CircleParams params);

  int observation_dim() const override { return kObsDim; }
  int action_dim() const override { return 2; }
  std::string name() const override { return "point_circle"; }
  void seed(std::uint64_t seed) override { rng_.seed(seed); }
  Vec reset() override;
  StepResult step(const Vec& action) override;

  const PointState& state() const { return state_; }
  const CircleParams& params() const { return params_; }
  static Vec observe(const PointState& state);

 private:
  CircleParams params_;
  PointState state_;
  int t_ = 0;
  Rng rng_;
};

struct GatherParams {
  int n_apples = 2;
  int n_bombs = 8;
  double apple_reward = 10.0;
  double bomb_cost = 1.0;
  double arena_radius = 6.0;
  double catch_radius = 0.5;
  double spawn_clearance = 1.0;  // no object spawns this close to the start
  int horizon = 15;
  double missing_distance = 12.0;  // reported when fewer objects remain
  PointDynamics dynamics;

  void validate() const;
  static GatherParams reference();
  static GatherParams desk();
};

struct GatherObject {
  std::array<double, 2> position{0.0, 0.0};
  bool is_apple = false;
  bool consumed = false;
};

struct GatherState {
  PointState agent;
  std::vector<GatherObject> objects;
};

struct GatherStep {
  GatherState next;
  double reward = 0.0;
  double cost = 0.0;
  int objects_remaining = 0;
};

/// Moves the agent, then consumes every object within catch_radius; each
/// apple adds apple_reward and each bomb adds bomb_cost.
GatherStep gather_step(const GatherState& state, const Vec& action, const GatherParams& params);

class PointGather final : public Environment {
 public:
  static constexpr int kObsDim = 10;

  explicit PointGather(GatherParams params);

  int observation_dim() const override { return kObsDim; }
  int action_dim() const override { return 2; }
  std::string name() const override { return "point_gather"; }
  void seed(std::uint64_t seed) override { rng_.seed(seed); }
  Vec reset() override;
  StepResult step(const Vec& action) override;

  const GatherState& state() const { return state_; }
  const GatherParams& params() const { return params_; }
  /// Distance and bearing to the two nearest apples and bombs, then velocity.
  static Vec observe(const GatherState& state, const GatherParams& params);

 private:
  GatherParams params_;
  GatherState state_;
  int t_ = 0;
  Rng rng_;
};

/// Steps a finite CMDP: observations are one-hot state encodings, actions
/// are indices, and episodes never terminate on their own.
class TabularEnv final : public Environment {
 public:
  explicit TabularEnv(tabular::TabularCMDP mdp);

  int observation_dim() const override { return mdp_.n_states; }
  int action_dim() const override { return 1; }
  int n_discrete_actions() const override { return mdp_.n_actions; }
  int n_costs() const override { return mdp_.n_costs(); }
  std::string name() const override { return "tabular"; }
  void seed(std::uint64_t seed) override { rng_.seed(seed); }
  Vec reset() override;
  StepResult step(const Vec& action) override;

  int current_state() const { return state_; }
  const tabular::TabularCMDP& mdp() const { return mdp_; }
  Vec one_hot(int s) const;

 private:
  int sample_from(const Eigen::Ref<const Vec>& probs);

  tabular::TabularCMDP mdp_;
  int state_ = 0;
  Rng rng_;
};

std::unique_ptr<Environment> tabular_env_adapter(const tabular::TabularCMDP& mdp, std::uint64_t seed);

}  // namespace cpo
