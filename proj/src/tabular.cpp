#include "cpo/tabular.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cpo::tabular {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kBoundSlack = 1e-9;

void check_policy_dims(const TabularCMDP& mdp, const PolicyTable& pol) {
  if (pol.probs.rows() != mdp.n_states || pol.probs.cols() != mdp.n_actions) {
    throw std::invalid_argument("policy table is " + std::to_string(pol.probs.rows()) + "x" +
                                std::to_string(pol.probs.cols()) + ", mdp expects " +
                                std::to_string(mdp.n_states) + "x" +
                                std::to_string(mdp.n_actions));
  }
}

const Mat& signal_tensor(const TabularCMDP& mdp, Signal signal) {
  if (signal.is_reward()) return mdp.reward;
  if (signal.cost_index >= mdp.n_costs()) {
    throw std::out_of_range("cost index " + std::to_string(signal.cost_index) +
                            " out of range (" + std::to_string(mdp.n_costs()) + " costs)");
  }
  return mdp.costs[signal.cost_index];
}

// E_{a~pi}[X(s,a)] per state.
Vec on_policy(const Mat& x_sa, const PolicyTable& pol) {
  return pol.probs.cwiseProduct(x_sa).rowwise().sum();
}

// delta_f averaged over s': r(s,a) + gamma sum_s' P(s'|s,a) f(s') - f(s).
Mat probe_residual(const TabularCMDP& mdp, Signal signal, const Vec& f) {
  Mat r = expected_signal(mdp, signal);
  Vec pf = mdp.transition * f;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      r(s, a) += mdp.gamma * pf(mdp.row(s, a)) - f(s);
  return r;
}

}  // namespace

void TabularCMDP::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw std::invalid_argument("empty state or action set");
  const int rows = n_states * n_actions;
  if (transition.rows() != rows || transition.cols() != n_states)
    throw std::invalid_argument("transition tensor has wrong shape");
  if (reward.rows() != rows || reward.cols() != n_states)
    throw std::invalid_argument("reward tensor has wrong shape");
  for (const auto& c : costs)
    if (c.rows() != rows || c.cols() != n_states)
      throw std::invalid_argument("cost tensor has wrong shape");
  if (limits.size() != n_costs()) throw std::invalid_argument("one limit per cost required");
  if (start_dist.size() != n_states) throw std::invalid_argument("start distribution size");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if ((transition.array() < 0.0).any()) throw std::invalid_argument("negative transition probability");
  for (int i = 0; i < rows; ++i)
    if (std::abs(transition.row(i).sum() - 1.0) > kStochasticTol)
      throw std::invalid_argument("transition row " + std::to_string(i) + " does not sum to 1");
  if ((start_dist.array() < 0.0).any() || std::abs(start_dist.sum() - 1.0) > kStochasticTol)
    throw std::invalid_argument("start distribution is not a probability vector");
}

void PolicyTable::validate(int n_states, int n_actions) const {
  if (probs.rows() != n_states || probs.cols() != n_actions)
    throw std::invalid_argument("policy table has wrong shape");
  if ((probs.array() < 0.0).any()) throw std::invalid_argument("negative action probability");
  for (int s = 0; s < n_states; ++s)
    if (std::abs(probs.row(s).sum() - 1.0) > kStochasticTol)
      throw std::invalid_argument("policy row " + std::to_string(s) + " does not sum to 1");
}

PolicyTable PolicyTable::uniform(int n_states, int n_actions) {
  return PolicyTable{Mat::Constant(n_states, n_actions, 1.0 / n_actions)};
}

Mat policy_transition(const TabularCMDP& mdp, const PolicyTable& pol) {
  check_policy_dims(mdp, pol);
  Mat p = Mat::Zero(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      p.row(s) += pol.probs(s, a) * mdp.transition.row(mdp.row(s, a));
  return p;
}

Mat expected_signal(const TabularCMDP& mdp, Signal signal) {
  const Mat& x = signal_tensor(mdp, signal);
  Mat r(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      r(s, a) = mdp.transition.row(mdp.row(s, a)).dot(x.row(mdp.row(s, a)));
  return r;
}

Vec discounted_state_dist(const TabularCMDP& mdp, const PolicyTable& pol) {
  const Mat p = policy_transition(mdp, pol);
  const int n = mdp.n_states;
  Mat system = Mat::Identity(n, n) - mdp.gamma * p.transpose();
  return (1.0 - mdp.gamma) * system.partialPivLu().solve(mdp.start_dist);
}

double policy_return(const TabularCMDP& mdp, const PolicyTable& pol, Signal signal) {
  const Vec d = discounted_state_dist(mdp, pol);
  const Vec r = on_policy(expected_signal(mdp, signal), pol);
  return d.dot(r) / (1.0 - mdp.gamma);
}

SignalValues signal_values(const TabularCMDP& mdp, const PolicyTable& pol, Signal signal) {
  const Mat p = policy_transition(mdp, pol);
  const Mat r_sa = expected_signal(mdp, signal);
  const int n = mdp.n_states;
  SignalValues out;
  Mat system = Mat::Identity(n, n) - mdp.gamma * p;
  out.v = system.partialPivLu().solve(on_policy(r_sa, pol));
  const Vec pv = mdp.transition * out.v;
  out.q = r_sa;
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) out.q(s, a) += mdp.gamma * pv(mdp.row(s, a));
  out.adv = out.q.colwise() - out.v;
  return out;
}

ValueSet value_set(const TabularCMDP& mdp, const PolicyTable& pol) {
  ValueSet vs;
  vs.reward = signal_values(mdp, pol, Signal::reward());
  for (int i = 0; i < mdp.n_costs(); ++i) vs.costs.push_back(signal_values(mdp, pol, Signal::cost(i)));
  return vs;
}

double performance_difference(const TabularCMDP& mdp, const PolicyTable& pol_new,
                              const PolicyTable& pol_old, Signal signal) {
  const SignalValues old_values = signal_values(mdp, pol_old, signal);
  const Vec d_new = discounted_state_dist(mdp, pol_new);
  return d_new.dot(on_policy(old_values.adv, pol_new)) / (1.0 - mdp.gamma);
}

double return_via_probe(const TabularCMDP& mdp, const PolicyTable& pol, const Vec& f, Signal signal) {
  const Vec d = discounted_state_dist(mdp, pol);
  const Vec residual = on_policy(probe_residual(mdp, signal, f), pol);
  return mdp.start_dist.dot(f) + d.dot(residual) / (1.0 - mdp.gamma);
}

double total_variation(const Eigen::Ref<const Vec>& p, const Eigen::Ref<const Vec>& q) {
  return 0.5 * (p - q).cwiseAbs().sum();
}

double kl_divergence(const Eigen::Ref<const Vec>& p, const Eigen::Ref<const Vec>& q) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    if (q(i) <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p(i) * std::log(p(i) / q(i));
  }
  return kl;
}

namespace {

double average_tv(const Vec& d, const PolicyTable& pol_old, const PolicyTable& pol_new) {
  double tv = 0.0;
  for (Eigen::Index s = 0; s < d.size(); ++s)
    tv += d(s) * total_variation(pol_new.probs.row(s).transpose(), pol_old.probs.row(s).transpose());
  return tv;
}

double average_kl(const Vec& d, const PolicyTable& pol_old, const PolicyTable& pol_new) {
  double kl = 0.0;
  for (Eigen::Index s = 0; s < d.size(); ++s) {
    const double k = kl_divergence(pol_new.probs.row(s).transpose(), pol_old.probs.row(s).transpose());
    if (std::isinf(k)) {
      if (d(s) > 0.0) return k;
      continue;
    }
    kl += d(s) * k;
  }
  return kl;
}

}  // namespace

BoundReport bound_report(const TabularCMDP& mdp, const PolicyTable& pol_old,
                         const PolicyTable& pol_new, const Vec& f, Signal signal) {
  check_policy_dims(mdp, pol_old);
  check_policy_dims(mdp, pol_new);
  if (f.size() != mdp.n_states) throw std::invalid_argument("probe function has wrong size");
  if (!f.allFinite()) throw std::invalid_argument("probe function must be finite");

  const double g = mdp.gamma;
  const Vec d_old = discounted_state_dist(mdp, pol_old);
  const Mat residual = probe_residual(mdp, signal, f);

  BoundReport rep;
  rep.epsilon = on_policy(residual, pol_new).cwiseAbs().maxCoeff();
  // E_{d^pi, pi}[(pi'/pi - 1) delta_f] written without the ratio.
  rep.surrogate = d_old.dot((pol_new.probs - pol_old.probs).cwiseProduct(residual).rowwise().sum());
  rep.avg_tv = average_tv(d_old, pol_old, pol_new);
  rep.avg_kl = average_kl(d_old, pol_old, pol_new);
  const double penalty = 2.0 * g * rep.epsilon / ((1.0 - g) * (1.0 - g)) * rep.avg_tv;
  rep.upper = rep.surrogate / (1.0 - g) + penalty;
  rep.lower = rep.surrogate / (1.0 - g) - penalty;
  rep.delta_j = policy_return(mdp, pol_new, signal) - policy_return(mdp, pol_old, signal);
  rep.holds = rep.lower - kBoundSlack <= rep.delta_j && rep.delta_j <= rep.upper + kBoundSlack;
  return rep;
}

DistShiftCheck dist_shift_bound_check(const TabularCMDP& mdp, const PolicyTable& pol_old,
                                      const PolicyTable& pol_new) {
  const Vec d_old = discounted_state_dist(mdp, pol_old);
  const Vec d_new = discounted_state_dist(mdp, pol_new);
  DistShiftCheck out;
  out.lhs = (d_new - d_old).cwiseAbs().sum();
  out.rhs = 2.0 * mdp.gamma / (1.0 - mdp.gamma) * average_tv(d_old, pol_old, pol_new);
  out.holds = out.lhs <= out.rhs + kBoundSlack;
  return out;
}

KlBoundCheck kl_bound_check(const TabularCMDP& mdp, const PolicyTable& pol_old,
                            const PolicyTable& pol_new) {
  const Vec d_old = discounted_state_dist(mdp, pol_old);
  const double kl = average_kl(d_old, pol_old, pol_new);
  if (std::isinf(kl)) throw std::domain_error("KL divergence is infinite (support mismatch)");
  KlBoundCheck out;
  out.tv_avg = average_tv(d_old, pol_old, pol_new);
  out.kl_bound_term = std::sqrt(kl / 2.0);
  out.holds = out.tv_avg <= out.kl_bound_term + kBoundSlack;
  return out;
}

double trust_region_degradation(double delta, double gamma, double epsilon) {
  return std::sqrt(2.0 * delta) * gamma * epsilon / ((1.0 - gamma) * (1.0 - gamma));
}

WorstCaseReport worst_case_bounds(const TabularCMDP& mdp, const PolicyTable& pol_old,
                                  const PolicyTable& pol_new, double delta, int cost_index) {
  if (cost_index < 0 || cost_index >= mdp.n_costs()) throw std::out_of_range("cost index out of range");
  const Vec d_old = discounted_state_dist(mdp, pol_old);
  const double kl = average_kl(d_old, pol_old, pol_new);
  if (!(kl <= delta + 1e-12)) {
    throw std::domain_error("average KL " + std::to_string(kl) + " exceeds trust region " +
                            std::to_string(delta));
  }
  const double g = mdp.gamma;
  const double limit = mdp.limits(cost_index);
  const SignalValues rv = signal_values(mdp, pol_old, Signal::reward());
  const SignalValues cv = signal_values(mdp, pol_old, Signal::cost(cost_index));
  const Vec reward_adv_new = on_policy(rv.adv, pol_new);
  const Vec cost_adv_new = on_policy(cv.adv, pol_new);

  WorstCaseReport rep;
  rep.avg_kl = kl;
  rep.reward_floor = -trust_region_degradation(delta, g, reward_adv_new.cwiseAbs().maxCoeff());
  rep.cost_ceiling = limit + trust_region_degradation(delta, g, cost_adv_new.cwiseAbs().maxCoeff());
  rep.delta_j = policy_return(mdp, pol_new) - policy_return(mdp, pol_old);
  rep.cost_return_new = policy_return(mdp, pol_new, Signal::cost(cost_index));
  rep.reward_surrogate = d_old.dot(reward_adv_new);
  rep.cost_surrogate = policy_return(mdp, pol_old, Signal::cost(cost_index)) +
                       d_old.dot(cost_adv_new) / (1.0 - g);
  rep.reward_premise = rep.reward_surrogate >= 0.0;
  rep.cost_premise = rep.cost_surrogate <= limit + kBoundSlack;
  rep.reward_holds = rep.delta_j >= rep.reward_floor - kBoundSlack;
  rep.cost_holds = rep.cost_return_new <= rep.cost_ceiling + kBoundSlack;
  return rep;
}

Vec dirichlet_ones(Rng& rng, int n) {
  std::exponential_distribution<double> expo(1.0);
  Vec x(n);
  for (int i = 0; i < n; ++i) x(i) = expo(rng);
  return x / x.sum();
}

PolicyTable random_policy(Rng& rng, int n_states, int n_actions) {
  PolicyTable pol{Mat(n_states, n_actions)};
  for (int s = 0; s < n_states; ++s) pol.probs.row(s) = dirichlet_ones(rng, n_actions).transpose();
  return pol;
}

TabularCMDP random_cmdp(Rng& rng, const RandomCmdpOptions& options) {
  TabularCMDP mdp;
  mdp.n_states = options.n_states;
  mdp.n_actions = options.n_actions;
  const int rows = mdp.n_states * mdp.n_actions;
  std::uniform_real_distribution<double> signal(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> discount(options.gamma_min, options.gamma_max);

  mdp.transition.resize(rows, mdp.n_states);
  for (int i = 0; i < rows; ++i) mdp.transition.row(i) = dirichlet_ones(rng, mdp.n_states).transpose();
  mdp.reward = Mat::NullaryExpr(rows, mdp.n_states, [&] { return signal(rng); });
  for (int k = 0; k < options.n_costs; ++k) {
    if (options.nonnegative_costs)
      mdp.costs.push_back(Mat::NullaryExpr(rows, mdp.n_states, [&] { return unit(rng); }));
    else
      mdp.costs.push_back(Mat::NullaryExpr(rows, mdp.n_states, [&] { return signal(rng); }));
  }
  mdp.start_dist = dirichlet_ones(rng, mdp.n_states);
  mdp.gamma = discount(rng);
  mdp.limits = Vec::Zero(options.n_costs);
  return mdp;
}

}  // namespace cpo::tabular
