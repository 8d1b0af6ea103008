#pragma once
// Small hand-built CMDPs shared by the unit tests.

#include "cpo/tabular.hpp"

namespace cpo::testing {

inline tabular::TabularCMDP single_state(double reward, double gamma, int n_actions = 1) {
  tabular::TabularCMDP m;
  m.n_states = 1;
  m.n_actions = n_actions;
  m.transition = Mat::Ones(n_actions, 1);
  m.reward = Mat::Constant(n_actions, 1, reward);
  m.costs.push_back(Mat::Zero(n_actions, 1));
  m.start_dist = Vec::Ones(1);
  m.gamma = gamma;
  m.limits = Vec::Constant(1, 1.0);
  return m;
}

// 0 -> 1 -> 1 -> ... regardless of the action.
inline tabular::TabularCMDP absorbing_chain(double gamma) {
  tabular::TabularCMDP m;
  m.n_states = 2;
  m.n_actions = 1;
  m.transition = Mat::Zero(2, 2);
  m.transition(0, 1) = 1.0;
  m.transition(1, 1) = 1.0;
  m.reward = Mat::Zero(2, 2);
  m.costs.push_back(Mat::Zero(2, 2));
  m.start_dist = Vec::Zero(2);
  m.start_dist(0) = 1.0;
  m.gamma = gamma;
  m.limits = Vec::Constant(1, 1.0);
  return m;
}

// Two states, two actions: action 1 moves to state 1 which pays reward 1
// and cost 1 on every step; action 0 moves to state 0 which pays nothing.
inline tabular::TabularCMDP two_state_switch(double gamma) {
  tabular::TabularCMDP m;
  m.n_states = 2;
  m.n_actions = 2;
  m.transition = Mat::Zero(4, 2);
  m.reward = Mat::Zero(4, 2);
  Mat cost = Mat::Zero(4, 2);
  for (int s = 0; s < 2; ++s) {
    m.transition(m.row(s, 0), 0) = 1.0;
    m.transition(m.row(s, 1), 1) = 1.0;
    m.reward(m.row(s, 1), 1) = 1.0;
    cost(m.row(s, 1), 1) = 1.0;
  }
  m.costs.push_back(cost);
  m.start_dist = Vec::Constant(2, 0.5);
  m.gamma = gamma;
  m.limits = Vec::Constant(1, 1.0);
  return m;
}

inline tabular::PolicyTable deterministic(int n_states, int n_actions, int action) {
  tabular::PolicyTable p{Mat::Zero(n_states, n_actions)};
  p.probs.col(action).setOnes();
  return p;
}

}  // namespace cpo::testing
