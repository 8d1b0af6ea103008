#include "cpo/environments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpo {

PointState point_step(const PointState& state, const Vec& action, const PointDynamics& dyn) {
  if (action.size() != 2) throw std::invalid_argument("point mass expects a 2-d action");
  PointState next = state;
  for (int i = 0; i < 2; ++i) {
    const double a = std::clamp(action(i), -1.0, 1.0);
    next.velocity[i] = dyn.smoothing * state.velocity[i] + (1.0 - dyn.smoothing) * dyn.action_gain * a;
    next.position[i] = state.position[i] + next.velocity[i] * dyn.dt;
  }
  return next;
}

// ---------------------------------------------------------------------------
// Circle

void CircleParams::validate() const {
  if (!(d > 0.0) || !(x_lim > 0.0)) throw std::invalid_argument("circle radius and x_lim must be positive");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
}

CircleParams CircleParams::reference() { return CircleParams{}; }

CircleParams CircleParams::desk() {
  CircleParams p;
  p.d = 5.0;
  p.x_lim = 1.0;
  return p;
}

double circle_reward(const PointState& s, double d) {
  const double x = s.position[0], y = s.position[1];
  const double tangential = -s.velocity[0] * y + s.velocity[1] * x;
  return tangential / (1.0 + std::abs(std::hypot(x, y) - d));
}

double circle_cost(const PointState& s, double x_lim) { return std::abs(s.position[0]) > x_lim ? 1.0 : 0.0; }

CircleStep circle_step(const PointState& state, const Vec& action, const CircleParams& params) {
  CircleStep out;
  out.next = point_step(state, action, params.dynamics);
  out.reward = circle_reward(out.next, params.d);
  out.cost = circle_cost(out.next, params.x_lim);
  return out;
}

PointCircle::PointCircle(CircleParams params) : params_(params) { params_.validate(); }

Vec PointCircle::observe(const PointState& s) {
  Vec obs = Vec::Zero(kObsDim);
  obs << s.position[0], s.position[1], s.velocity[0], s.velocity[1], 0.0, 0.0, 0.0, 0.0, 0.0;
  return obs;
}

Vec PointCircle::reset() {
  std::uniform_real_distribution<double> u(-params_.start_noise, params_.start_noise);
  state_ = PointState{};
  state_.position = {u(rng_), u(rng_)};
  t_ = 0;
  return observe(state_);
}

StepResult PointCircle::step(const Vec& action) {
  const CircleStep s = circle_step(state_, action, params_);
  state_ = s.next;
  ++t_;
  return StepResult{observe(state_), s.reward, Vec::Constant(1, s.cost), t_ >= params_.horizon};
}

// ---------------------------------------------------------------------------
// Gather

void GatherParams::validate() const {
  if (n_apples < 0 || n_bombs < 0) throw std::invalid_argument("object counts must be nonnegative");
  if (!(arena_radius > 0.0) || !(catch_radius > 0.0)) throw std::invalid_argument("radii must be positive");
  if (spawn_clearance >= arena_radius) throw std::invalid_argument("spawn clearance leaves no room");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
}

GatherParams GatherParams::reference() { return GatherParams{}; }
GatherParams GatherParams::desk() { return GatherParams{}; }

GatherStep gather_step(const GatherState& state, const Vec& action, const GatherParams& params) {
  GatherStep out;
  out.next = state;
  out.next.agent = point_step(state.agent, action, params.dynamics);
  const auto& p = out.next.agent.position;
  for (auto& obj : out.next.objects) {
    if (obj.consumed) continue;
    if (std::hypot(obj.position[0] - p[0], obj.position[1] - p[1]) <= params.catch_radius) {
      obj.consumed = true;
      if (obj.is_apple)
        out.reward += params.apple_reward;
      else
        out.cost += params.bomb_cost;
    }
  }
  out.objects_remaining = static_cast<int>(
      std::count_if(out.next.objects.begin(), out.next.objects.end(), [](const auto& o) { return !o.consumed; }));
  return out;
}

PointGather::PointGather(GatherParams params) : params_(params) { params_.validate(); }

Vec PointGather::observe(const GatherState& state, const GatherParams& params) {
  struct Seen {
    double dist, bearing;
  };
  std::vector<Seen> apples, bombs;
  const auto& p = state.agent.position;
  for (const auto& obj : state.objects) {
    if (obj.consumed) continue;
    const double dx = obj.position[0] - p[0], dy = obj.position[1] - p[1];
    (obj.is_apple ? apples : bombs).push_back({std::hypot(dx, dy), std::atan2(dy, dx)});
  }
  auto nearest = [](std::vector<Seen>& v) {
    std::sort(v.begin(), v.end(), [](const Seen& a, const Seen& b) { return a.dist < b.dist; });
  };
  nearest(apples);
  nearest(bombs);
  Vec obs = Vec::Zero(kObsDim);
  auto fill = [&](const std::vector<Seen>& v, int offset) {
    for (int k = 0; k < 2; ++k) {
      if (k < static_cast<int>(v.size())) {
        obs(offset + 2 * k) = v[k].dist;
        obs(offset + 2 * k + 1) = v[k].bearing;
      } else {
        obs(offset + 2 * k) = params.missing_distance;
      }
    }
  };
  fill(apples, 0);
  fill(bombs, 4);
  obs(8) = state.agent.velocity[0];
  obs(9) = state.agent.velocity[1];
  return obs;
}

Vec PointGather::reset() {
  std::uniform_real_distribution<double> u(-params_.arena_radius, params_.arena_radius);
  state_ = GatherState{};
  auto spawn = [&](bool apple) {
    for (;;) {
      const double x = u(rng_), y = u(rng_);
      const double r = std::hypot(x, y);
      if (r <= params_.arena_radius && r >= params_.spawn_clearance) {
        state_.objects.push_back(GatherObject{{x, y}, apple, false});
        return;
      }
    }
  };
  for (int i = 0; i < params_.n_apples; ++i) spawn(true);
  for (int i = 0; i < params_.n_bombs; ++i) spawn(false);
  t_ = 0;
  return observe(state_, params_);
}

StepResult PointGather::step(const Vec& action) {
  GatherStep s = gather_step(state_, action, params_);
  state_ = std::move(s.next);
  ++t_;
  return StepResult{observe(state_, params_), s.reward, Vec::Constant(1, s.cost), t_ >= params_.horizon};
}

// ---------------------------------------------------------------------------
// Tabular adapter

TabularEnv::TabularEnv(tabular::TabularCMDP mdp) : mdp_(std::move(mdp)) { mdp_.validate(); }

Vec TabularEnv::one_hot(int s) const {
  Vec v = Vec::Zero(mdp_.n_states);
  v(s) = 1.0;
  return v;
}

int TabularEnv::sample_from(const Eigen::Ref<const Vec>& probs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng_);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (x < acc) return static_cast<int>(i);
  }
  for (Eigen::Index i = probs.size(); i-- > 0;)
    if (probs(i) > 0.0) return static_cast<int>(i);
  return 0;
}

Vec TabularEnv::reset() {
  state_ = sample_from(mdp_.start_dist);
  return one_hot(state_);
}

StepResult TabularEnv::step(const Vec& action) {
  if (action.size() != 1) throw std::invalid_argument("tabular actions are single indices");
  const int a = static_cast<int>(std::lround(action(0)));
  if (a < 0 || a >= mdp_.n_actions) throw std::invalid_argument("action index out of range");
  const int row = mdp_.row(state_, a);
  const int next = sample_from(mdp_.transition.row(row).transpose());
  StepResult out;
  out.reward = mdp_.reward(row, next);
  out.cost = Vec(mdp_.n_costs());
  for (int i = 0; i < mdp_.n_costs(); ++i) out.cost(i) = mdp_.costs[i](row, next);
  state_ = next;
  out.observation = one_hot(state_);
  out.done = false;
  return out;
}

std::unique_ptr<Environment> tabular_env_adapter(const tabular::TabularCMDP& mdp, std::uint64_t seed) {
  auto env = std::make_unique<TabularEnv>(mdp);
  env->seed(seed);
  return env;
}

}  // namespace cpo
