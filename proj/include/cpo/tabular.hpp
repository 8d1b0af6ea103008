#pragma once

// Exact evaluation of finite constrained MDPs: discounted state
// distributions, returns, value/advantage functions, and the policy
// performance-difference bounds evaluated in closed form.

#include "cpo/types.hpp"

#include <vector>

namespace cpo::tabular {

/// Finite CMDP. Transition-indexed tensors are stored as (S*A) x S matrices
/// with row s*A + a holding the distribution (or signal) over next states.
struct TabularCMDP {
  int n_states = 0;
  int n_actions = 0;
  Mat transition;            // P(s'|s,a)
  Mat reward;                // R(s,a,s')
  std::vector<Mat> costs;    // C_i(s,a,s')
  Vec start_dist;            // mu
  double gamma = 0.0;
  Vec limits;                // d_i

  int row(int s, int a) const { return s * n_actions + a; }
  int n_costs() const { return static_cast<int>(costs.size()); }

  /// Throws std::invalid_argument when any structural invariant is broken.
  void validate() const;
};

/// pi(a|s) stored as an S x A matrix.
struct PolicyTable {
  Mat probs;

  void validate(int n_states, int n_actions) const;
  static PolicyTable uniform(int n_states, int n_actions);
};

/// Selects the reward (cost_index < 0) or one of the cost signals.
struct Signal {
  int cost_index = -1;

  static Signal reward() { return {}; }
  static Signal cost(int i) { return Signal{i}; }
  bool is_reward() const { return cost_index < 0; }
};

struct SignalValues {
  Vec v;     // V(s)
  Mat q;     // Q(s,a), S x A
  Mat adv;   // A(s,a) = Q - V
};

struct ValueSet {
  SignalValues reward;
  std::vector<SignalValues> costs;
};

struct BoundReport {
  double delta_j = 0.0;    // exact J(pi') - J(pi)
  double lower = 0.0;      // D-
  double upper = 0.0;      // D+
  double epsilon = 0.0;    // max_s |E_{a~pi', s'~P}[delta_f]|
  double surrogate = 0.0;  // L_{pi,f}(pi')
  double avg_tv = 0.0;     // E_{s~d^pi}[TV(pi'||pi)[s]]
  double avg_kl = 0.0;     // E_{s~d^pi}[KL(pi'||pi)[s]], +inf on support mismatch
  bool holds = false;
};

struct DistShiftCheck {
  double lhs = 0.0;  // ||d^pi' - d^pi||_1
  double rhs = 0.0;  // 2 gamma / (1 - gamma) * E_{d^pi}[TV]
  bool holds = false;
};

struct KlBoundCheck {
  double tv_avg = 0.0;
  double kl_bound_term = 0.0;  // sqrt(E_{d^pi}[KL] / 2)
  bool holds = false;
};

struct WorstCaseReport {
  double reward_floor = 0.0;      // -sqrt(2 delta) gamma eps / (1-gamma)^2
  double cost_ceiling = 0.0;      // d + sqrt(2 delta) gamma eps_C / (1-gamma)^2
  double delta_j = 0.0;           // J(pi') - J(pi)
  double cost_return_new = 0.0;   // J_C(pi')
  double reward_surrogate = 0.0;  // E_{d^pi, pi'}[A^pi]
  double cost_surrogate = 0.0;    // J_C(pi) + E_{d^pi, pi'}[A_C^pi] / (1-gamma)
  double avg_kl = 0.0;
  bool reward_premise = false;    // reward_surrogate >= 0
  bool cost_premise = false;      // cost_surrogate <= d
  bool reward_holds = false;      // delta_j >= reward_floor
  bool cost_holds = false;        // cost_return_new <= cost_ceiling
};

/// P_pi as a row-stochastic S x S matrix: P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
Mat policy_transition(const TabularCMDP& mdp, const PolicyTable& pol);

/// Expected one-step signal r(s,a) = sum_s' P(s'|s,a) X(s,a,s'), as S x A.
Mat expected_signal(const TabularCMDP& mdp, Signal signal);

Vec discounted_state_dist(const TabularCMDP& mdp, const PolicyTable& pol);
double policy_return(const TabularCMDP& mdp, const PolicyTable& pol, Signal signal = Signal::reward());
SignalValues signal_values(const TabularCMDP& mdp, const PolicyTable& pol, Signal signal);
ValueSet value_set(const TabularCMDP& mdp, const PolicyTable& pol);

/// (1/(1-gamma)) E_{s~d^new, a~new}[A^old(s,a)] for the chosen signal.
double performance_difference(const TabularCMDP& mdp, const PolicyTable& pol_new,
                              const PolicyTable& pol_old, Signal signal = Signal::reward());

/// E_mu[f] + (1/(1-gamma)) E_{d^pi,pi,P}[X + gamma f(s') - f(s)]; equals J(pi) for every f.
double return_via_probe(const TabularCMDP& mdp, const PolicyTable& pol, const Vec& f,
                        Signal signal = Signal::reward());

BoundReport bound_report(const TabularCMDP& mdp, const PolicyTable& pol_old,
                         const PolicyTable& pol_new, const Vec& f,
                         Signal signal = Signal::reward());

DistShiftCheck dist_shift_bound_check(const TabularCMDP& mdp, const PolicyTable& pol_old,
                                      const PolicyTable& pol_new);

/// Throws std::domain_error when pol_new puts mass where pol_old has none.
KlBoundCheck kl_bound_check(const TabularCMDP& mdp, const PolicyTable& pol_old,
                            const PolicyTable& pol_new);

/// sqrt(2 delta) * gamma * epsilon / (1 - gamma)^2
double trust_region_degradation(double delta, double gamma, double epsilon);

/// Throws std::domain_error if E_{d^old}[KL(new||old)] exceeds delta.
WorstCaseReport worst_case_bounds(const TabularCMDP& mdp, const PolicyTable& pol_old,
                                  const PolicyTable& pol_new, double delta, int cost_index = 0);

double total_variation(const Eigen::Ref<const Vec>& p, const Eigen::Ref<const Vec>& q);
/// KL(p||q); +inf when p has mass outside the support of q.
double kl_divergence(const Eigen::Ref<const Vec>& p, const Eigen::Ref<const Vec>& q);

// Random instances: Dirichlet(1) rows, signals uniform in [-1, 1],
// gamma uniform in [0.5, 0.95].
struct RandomCmdpOptions {
  int n_states = 4;
  int n_actions = 2;
  int n_costs = 1;
  double gamma_min = 0.5;
  double gamma_max = 0.95;
  bool nonnegative_costs = false;
};

TabularCMDP random_cmdp(Rng& rng, const RandomCmdpOptions& options);
PolicyTable random_policy(Rng& rng, int n_states, int n_actions);
Vec dirichlet_ones(Rng& rng, int n);

}  // namespace cpo::tabular
