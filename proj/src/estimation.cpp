#include "cpo/estimation.hpp"

#include <cmath>
#include <memory>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace cpo {

std::vector<int> TrajectoryBatch::episode_offsets() const {
  std::vector<int> out;
  out.reserve(lengths.size());
  int start = 0;
  for (int len : lengths) {
    out.push_back(start);
    start += len;
  }
  return out;
}

void TrajectoryBatch::validate() const {
  const int n = size();
  if (observations.cols() != n || actions.cols() != n || costs.cols() != n || log_probs.size() != n ||
      static_cast<int>(episode_start.size()) != n || static_cast<int>(time_index.size()) != n)
    throw std::invalid_argument("batch columns disagree in length");
  int total = 0;
  for (int len : lengths) {
    if (len <= 0) throw std::invalid_argument("empty episode in batch");
    total += len;
  }
  if (total != n) throw std::invalid_argument("episode lengths do not sum to the batch size");
  if (!log_probs.allFinite()) throw std::invalid_argument("non-finite log-probability in batch");
}

TrajectoryBatch rollout(Environment& env, const ParamPolicy& policy, int total_steps, int max_path_length,
                        std::uint64_t seed) {
  const PolicyArch& arch = policy.arch();
  if (arch.obs_dim != env.observation_dim())
    throw std::invalid_argument("policy and environment observation sizes differ");
  const bool discrete = env.n_discrete_actions() > 0;
  if ((discrete && (arch.head != HeadKind::categorical || arch.act_dim != env.n_discrete_actions())) ||
      (!discrete && (arch.head != HeadKind::gaussian || arch.act_dim != env.action_dim())))
    throw std::invalid_argument("policy head does not match the environment's action space");
  if (max_path_length < 1) throw std::invalid_argument("max_path_length must be positive");

  env.seed(mix_seed(seed, 1));
  Rng rng(mix_seed(seed, 2));

  std::vector<Vec> obs, act, cost;
  std::vector<double> rew, logp;
  TrajectoryBatch batch;
  int steps = 0;
  while (steps < total_steps) {
    Vec o = env.reset();
    int len = 0;
    for (;;) {
      if (!o.allFinite())
        throw std::runtime_error("environment produced a non-finite state at step " + std::to_string(steps));
      Vec a = policy.sample(o, rng);
      const double lp = policy.log_prob(o, a);
      StepResult r = env.step(a);
      obs.push_back(std::move(o));
      act.push_back(std::move(a));
      rew.push_back(r.reward);
      cost.push_back(std::move(r.cost));
      logp.push_back(lp);
      batch.episode_start.push_back(len == 0 ? 1 : 0);
      batch.time_index.push_back(len);
      ++len;
      ++steps;
      if (r.done || len >= max_path_length) break;
      o = std::move(r.observation);
    }
    batch.lengths.push_back(len);
  }

  const int n = steps;
  batch.observations.resize(arch.obs_dim, n);
  batch.actions.resize(arch.action_width(), n);
  batch.rewards.resize(n);
  batch.costs.resize(env.n_costs(), n);
  batch.log_probs.resize(n);
  for (int i = 0; i < n; ++i) {
    batch.observations.col(i) = obs[i];
    batch.actions.col(i) = act[i];
    batch.rewards(i) = rew[i];
    batch.costs.col(i) = cost[i];
    batch.log_probs(i) = logp[i];
  }
  return batch;
}

Vec episode_discounted_sums(const TrajectoryBatch& batch, const Vec& signal, double gamma) {
  if (signal.size() != batch.size()) throw std::invalid_argument("signal length mismatch");
  Vec out = Vec::Zero(batch.n_episodes());
  int i = 0;
  for (int e = 0; e < batch.n_episodes(); ++e) {
    double w = 1.0;
    for (int t = 0; t < batch.lengths[e]; ++t, ++i) {
      out(e) += w * signal(i);
      w *= gamma;
    }
  }
  return out;
}

Vec discounted_to_go(const TrajectoryBatch& batch, const Vec& signal, double gamma) {
  return gae_advantages(batch, signal, Vec::Zero(batch.size()), gamma, 1.0);
}

Vec gae_advantages(const TrajectoryBatch& batch, const Vec& signal, const Vec& values, double gamma,
                   double lambda) {
  const int n = batch.size();
  if (signal.size() != n || values.size() != n) throw std::invalid_argument("advantage inputs have the wrong length");
  Vec adv(n);
  const std::vector<int> offsets = batch.episode_offsets();
  for (int e = 0; e < batch.n_episodes(); ++e) {
    const int begin = offsets[e];
    const int end = begin + batch.lengths[e];
    double next_value = 0.0, running = 0.0;
    for (int i = end - 1; i >= begin; --i) {
      const double td = signal(i) + gamma * next_value - values(i);
      running = td + gamma * lambda * running;
      adv(i) = running;
      next_value = values(i);
    }
  }
  return adv;
}

void EstimatorConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0) || !(lambda_gae_cost >= 0.0 && lambda_gae_cost <= 1.0))
    throw std::invalid_argument("GAE lambdas must lie in [0, 1]");
  if (value_fit_iters < 0 || !(value_fit_step > 0.0)) throw std::invalid_argument("bad value-fit settings");
  if (!(fisher_fraction > 0.0 && fisher_fraction <= 1.0)) throw std::invalid_argument("fisher_fraction must lie in (0, 1]");
}

// ---------------------------------------------------------------------------
// Value function

ValueFunction::ValueFunction(int obs_dim, const std::vector<int>& hidden, Rng& rng)
    : net_(obs_dim, hidden, 1), params_(net_.initial_params(rng)) {}

Vec ValueFunction::predict(const Mat& observations) const {
  return (offset_ + scale_ * net_.forward(params_, observations).row(0).array()).transpose();
}

void ValueFunction::rescale(double offset, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("value scale must be positive");
  const Eigen::Index p = params_.size();
  const Eigen::Index last_in = net_.hidden().empty() ? net_.input_dim() : net_.hidden().back();
  // Output layer: W (1 x last_in) then b.
  params_.segment(p - last_in - 1, last_in) *= scale_ / scale;
  params_(p - 1) = (offset_ + scale_ * params_(p - 1) - offset) / scale;
  offset_ = offset;
  scale_ = scale;
}

double ValueFunction::mse(const Mat& observations, const Vec& targets) const {
  return (predict(observations) - targets).squaredNorm() / std::max<Eigen::Index>(1, targets.size());
}

std::vector<double> fit_values(ValueFunction& vf, const Mat& observations, const Vec& targets, int iters,
                               double step) {
  if (!targets.allFinite()) throw std::invalid_argument("value targets must be finite");
  if (targets.size() != observations.cols()) throw std::invalid_argument("value targets misaligned");
  std::vector<double> losses;
  if (iters <= 0 || targets.size() == 0) return losses;
  const double n = static_cast<double>(targets.size());
  const double mean = targets.mean();
  const double sd = std::sqrt((targets.array() - mean).square().sum() / n);
  vf.rescale(mean, std::max(sd, 1.0));
  const Vec scaled = (targets.array() - vf.offset()) / vf.scale();

  const Mlp& net = vf.network();
  LossGrad objective = [&](const Vec& p, Vec* grad) {
    Mlp::Cache cache;
    const Mat out = net.forward(p, observations, &cache);
    const Eigen::RowVectorXd err = out.row(0) - scaled.transpose();
    if (grad) *grad = net.backward(p, cache, 2.0 * err / n);
    return err.squaredNorm() / n;
  };
  AdamSettings settings;
  settings.step = step;
  vf.set_params(adam_monotone(objective, vf.params(), iters, settings, &losses));
  return losses;
}

// ---------------------------------------------------------------------------
// Surrogates

Mat SurrogateModel::B() const {
  Mat out(g.size(), n_constraints());
  for (int i = 0; i < n_constraints(); ++i) out.col(i) = b_list[i];
  return out;
}

void SurrogateModel::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("trust region size must be positive");
  if (!g.allFinite() || !c.allFinite()) throw std::invalid_argument("non-finite surrogate quantities");
  if (c.size() != n_constraints()) throw std::invalid_argument("one c per constraint gradient");
  for (const Vec& b : b_list)
    if (b.size() != g.size() || !b.allFinite()) throw std::invalid_argument("bad constraint gradient");
  if (!hvp.valid() || hvp.dim() != g.size()) throw std::invalid_argument("metric product missing or wrong size");
}

namespace {

Mat fisher_subset(const Mat& states, double fraction) {
  if (fraction >= 1.0) return states;
  const Eigen::Index n = states.cols();
  const Eigen::Index keep = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(fraction * n)));
  Mat out(states.rows(), keep);
  for (Eigen::Index j = 0; j < keep; ++j) out.col(j) = states.col(j * n / keep);
  return out;
}

}  // namespace

SurrogateModel build_surrogates(const TrajectoryBatch& batch, const ParamPolicy& policy,
                                const AdvantageSet& adv, const Vec& limits, double delta,
                                const EstimatorConfig& config, double cg_damping) {
  const int n = batch.size();
  if (n == 0) throw std::invalid_argument("cannot build surrogates from an empty batch");
  const int m = static_cast<int>(adv.costs.size());
  if (adv.reward.size() != n) throw std::invalid_argument("reward advantage length mismatch");
  if (limits.size() != m || adv.cost_returns.size() != m) throw std::invalid_argument("one limit per constraint");
  for (const Vec& a : adv.costs)
    if (a.size() != n) throw std::invalid_argument("cost advantage length mismatch");

  Vec w(n);
  if (config.discounted_weighting) {
    for (int i = 0; i < n; ++i) w(i) = std::pow(config.gamma, batch.time_index[i]) / batch.n_episodes();
  } else {
    w.setConstant(1.0 / n);
  }

  Vec a_r = adv.reward;
  if (config.normalize_advantages && n > 1) {
    const double mean = a_r.mean();
    const double sd = std::sqrt((a_r.array() - mean).square().sum() / n);
    a_r = (a_r.array() - mean) / (sd + 1e-8);
  }
  const double cost_scale = config.discounted_weighting ? 1.0 : 1.0 / (1.0 - config.gamma);

  SurrogateModel model;
  model.delta = delta;
  model.g = policy.weighted_score(batch.observations, batch.actions, w.cwiseProduct(a_r));
  model.c = adv.cost_returns - limits;
  std::vector<Vec> wa_c;
  for (int i = 0; i < m; ++i) {
    wa_c.push_back(cost_scale * w.cwiseProduct(adv.costs[i]));
    model.b_list.push_back(policy.weighted_score(batch.observations, batch.actions, wa_c.back()));
  }

  const Mat fisher_states = fisher_subset(batch.observations, config.fisher_fraction);
  model.hvp = HvpHandle([op = std::make_shared<const KlHvp>(policy, fisher_states)](const Vec& v) { return (*op)(v); },
                        static_cast<int>(policy.theta().size()), cg_damping);

  const Vec old_logp = policy.log_probs(batch.observations, batch.actions);
  const Vec wa_r = w.cwiseProduct(a_r);
  const Mat obs = batch.observations;
  const Mat actions = batch.actions;
  auto ratio_minus_one = [policy, obs, actions, old_logp](const Vec& theta) -> Vec {
    const Vec lp = policy.with_theta(theta).log_probs(obs, actions);
    return ((lp - old_logp).array().exp() - 1.0).matrix();
  };
  model.kl = [policy, fisher_states](const Vec& theta) {
    return mean_kl(policy.with_theta(theta), policy, fisher_states);
  };
  model.objective_gain = [ratio_minus_one, wa_r](const Vec& theta) { return ratio_minus_one(theta).dot(wa_r); };
  const Vec c0 = model.c;
  model.constraint_values = [ratio_minus_one, wa_c, c0](const Vec& theta) {
    const Vec r = ratio_minus_one(theta);
    Vec out = c0;
    for (std::size_t i = 0; i < wa_c.size(); ++i) out(static_cast<Eigen::Index>(i)) += r.dot(wa_c[i]);
    return out;
  };
  return model;
}

tabular::PolicyTable policy_table(const ParamPolicy& policy, int n_states) {
  if (policy.arch().head != HeadKind::categorical || policy.arch().obs_dim != n_states)
    throw std::invalid_argument("tabular policies need a categorical head over one-hot states");
  return tabular::PolicyTable{policy.probabilities(Mat::Identity(n_states, n_states)).transpose()};
}

SurrogateModel exact_tabular_surrogates(const tabular::TabularCMDP& mdp, const ParamPolicy& policy,
                                        double delta, double cg_damping) {
  const int S = mdp.n_states, A = mdp.n_actions, m = mdp.n_costs();
  const tabular::PolicyTable table = policy_table(policy, S);
  const Vec d = tabular::discounted_state_dist(mdp, table);
  const tabular::ValueSet values = tabular::value_set(mdp, table);
  const double scale = 1.0 / (1.0 - mdp.gamma);

  // One column per (s, a) pair for the score-function sums.
  Mat states = Mat::Zero(S, S * A);
  Mat actions(1, S * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      states(s, s * A + a) = 1.0;
      actions(0, s * A + a) = a;
    }
  auto pair_weights = [&](const Mat& adv) {
    Vec w(S * A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) w(s * A + a) = scale * d(s) * table.probs(s, a) * adv(s, a);
    return w;
  };

  SurrogateModel model;
  model.delta = delta;
  model.g = policy.weighted_score(states, actions, pair_weights(values.reward.adv));
  model.c.resize(m);
  std::vector<Mat> cost_adv;
  for (int i = 0; i < m; ++i) {
    model.b_list.push_back(policy.weighted_score(states, actions, pair_weights(values.costs[i].adv)));
    model.c(i) = d.dot(table.probs.cwiseProduct(tabular::expected_signal(mdp, tabular::Signal::cost(i)))
                           .rowwise()
                           .sum()) * scale -
                 mdp.limits(i);
    cost_adv.push_back(values.costs[i].adv);
  }

  const Mat eye = Mat::Identity(S, S);
  model.hvp = HvpHandle([op = std::make_shared<const KlHvp>(policy, eye, d)](const Vec& v) { return (*op)(v); },
                        static_cast<int>(policy.theta().size()), cg_damping);
  model.kl = [policy, eye, d](const Vec& theta) { return mean_kl(policy.with_theta(theta), policy, eye, d); };

  const Mat reward_adv = values.reward.adv;
  auto expected_adv = [policy, eye, d, scale](const Vec& theta, const Mat& adv) {
    const Mat probs = policy.with_theta(theta).probabilities(eye).transpose();  // S x A
    return scale * d.dot(probs.cwiseProduct(adv).rowwise().sum());
  };
  model.objective_gain = [expected_adv, reward_adv](const Vec& theta) { return expected_adv(theta, reward_adv); };
  const Vec c0 = model.c;
  model.constraint_values = [expected_adv, cost_adv, c0](const Vec& theta) {
    Vec out = c0;
    for (std::size_t i = 0; i < cost_adv.size(); ++i)
      out(static_cast<Eigen::Index>(i)) += expected_adv(theta, cost_adv[i]);
    return out;
  };
  return model;
}

void write_batch_csv(std::ostream& os, const TrajectoryBatch& batch) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "episode,t";
  for (Eigen::Index k = 0; k < batch.observations.rows(); ++k) os << ",obs_" << k;
  for (Eigen::Index k = 0; k < batch.actions.rows(); ++k) os << ",act_" << k;
  os << ",reward";
  for (Eigen::Index k = 0; k < batch.costs.rows(); ++k) os << ",cost_" << k;
  os << ",log_prob\n";
  int episode = -1;
  for (int i = 0; i < batch.size(); ++i) {
    if (batch.episode_start[i]) ++episode;
    os << episode << ',' << batch.time_index[i];
    for (Eigen::Index k = 0; k < batch.observations.rows(); ++k) os << ',' << batch.observations(k, i);
    for (Eigen::Index k = 0; k < batch.actions.rows(); ++k) os << ',' << batch.actions(k, i);
    os << ',' << batch.rewards(i);
    for (Eigen::Index k = 0; k < batch.costs.rows(); ++k) os << ',' << batch.costs(k, i);
    os << ',' << batch.log_probs(i) << '\n';
  }
  os.precision(old_precision);
}

}  // namespace cpo
