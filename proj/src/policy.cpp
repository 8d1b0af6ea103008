#include "cpo/policy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cpo {

namespace {

Vec normalized_weights(const Vec& weights, Eigen::Index n) {
  if (weights.size() == 0) return Vec::Constant(n, 1.0 / static_cast<double>(n));
  if (weights.size() != n) throw std::invalid_argument("state weights have wrong length");
  const double total = weights.sum();
  if (!(total > 0.0)) throw std::invalid_argument("state weights must have positive mass");
  return weights / total;
}

// Column-wise log-softmax.
Mat log_softmax(const Mat& logits) {
  Mat out = logits;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    const double lse = mx + std::log((logits.col(j).array() - mx).exp().sum());
    out.col(j).array() -= lse;
  }
  return out;
}

int action_index(double a, int n_actions) {
  const int idx = static_cast<int>(std::lround(a));
  if (idx < 0 || idx >= n_actions || std::abs(a - idx) > 1e-9)
    throw std::invalid_argument("categorical action is not a valid index");
  return idx;
}

void check_states(const Mat& states, int obs_dim) {
  if (states.rows() != obs_dim) throw std::invalid_argument("state dimension mismatch");
  if (!states.allFinite()) throw std::invalid_argument("non-finite state");
}

}  // namespace

std::string to_string(HeadKind head) {
  return head == HeadKind::categorical ? "categorical" : "gaussian";
}

HeadKind head_from_string(const std::string& name) {
  if (name == "categorical") return HeadKind::categorical;
  if (name == "gaussian") return HeadKind::gaussian;
  throw std::invalid_argument("unknown policy head: " + name);
}

Eigen::Index PolicyArch::param_count() const {
  return network().param_count() + (head == HeadKind::gaussian ? act_dim : 0);
}

ParamPolicy::ParamPolicy(PolicyArch arch, Vec theta)
    : arch_(std::move(arch)), net_(arch_.network()), theta_(std::move(theta)) {
  if (theta_.size() != arch_.param_count())
    throw std::invalid_argument("parameter count " + std::to_string(theta_.size()) +
                                " does not match architecture (" +
                                std::to_string(arch_.param_count()) + ")");
}

ParamPolicy ParamPolicy::initialize(const PolicyArch& arch, Rng& rng, double log_std_init) {
  const Mlp net = arch.network();
  Vec theta(arch.param_count());
  theta.head(net.param_count()) = net.initial_params(rng);
  if (arch.head == HeadKind::gaussian) theta.tail(arch.act_dim).setConstant(log_std_init);
  return ParamPolicy(arch, std::move(theta));
}

Eigen::Ref<const Vec> ParamPolicy::net_params() const { return theta_.head(net_.param_count()); }

DistParams ParamPolicy::distributions(const Mat& states, Mlp::Cache* cache) const {
  check_states(states, arch_.obs_dim);
  DistParams out;
  Mat y = net_.forward(net_params(), states, cache);
  if (arch_.head == HeadKind::categorical) {
    out.logits = std::move(y);
  } else {
    out.mean = std::move(y);
    out.log_std = theta_.tail(arch_.act_dim);
  }
  return out;
}

Mat ParamPolicy::probabilities(const Mat& states) const {
  if (arch_.head != HeadKind::categorical) throw std::logic_error("probabilities need a categorical head");
  return log_softmax(distributions(states).logits).array().exp().matrix();
}

Vec ParamPolicy::log_probs(const Mat& states, const Mat& actions) const {
  if (actions.cols() != states.cols() || actions.rows() != arch_.action_width())
    throw std::invalid_argument("action batch has wrong shape");
  const DistParams dist = distributions(states);
  const Eigen::Index n = states.cols();
  Vec out(n);
  if (arch_.head == HeadKind::categorical) {
    const Mat logp = log_softmax(dist.logits);
    for (Eigen::Index j = 0; j < n; ++j) out(j) = logp(action_index(actions(0, j), arch_.act_dim), j);
  } else {
    const Vec inv_std = (-dist.log_std).array().exp();
    const double constant = -dist.log_std.sum() - 0.5 * arch_.act_dim * std::log(2.0 * std::numbers::pi);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vec z = (actions.col(j) - dist.mean.col(j)).cwiseProduct(inv_std);
      out(j) = constant - 0.5 * z.squaredNorm();
    }
  }
  return out;
}

double ParamPolicy::log_prob(const Vec& state, const Vec& action) const {
  return log_probs(state, action)(0);
}

Vec ParamPolicy::weighted_score(const Mat& states, const Mat& actions, const Vec& weights) const {
  const Eigen::Index n = states.cols();
  if (weights.size() != n || actions.cols() != n || actions.rows() != arch_.action_width())
    throw std::invalid_argument("score batch has inconsistent sizes");
  Mlp::Cache cache;
  const DistParams dist = distributions(states, &cache);
  Vec grad = Vec::Zero(theta_.size());
  Mat dout(arch_.act_dim, n);
  if (arch_.head == HeadKind::categorical) {
    const Mat p = log_softmax(dist.logits).array().exp().matrix();
    for (Eigen::Index j = 0; j < n; ++j) {
      dout.col(j) = -weights(j) * p.col(j);
      dout(action_index(actions(0, j), arch_.act_dim), j) += weights(j);
    }
    grad = net_.backward(net_params(), cache, dout);
  } else {
    const Vec inv_var = (-2.0 * dist.log_std).array().exp();
    Vec g_log_std = Vec::Zero(arch_.act_dim);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vec diff = actions.col(j) - dist.mean.col(j);
      dout.col(j) = weights(j) * diff.cwiseProduct(inv_var);
      g_log_std.array() += weights(j) * (diff.array().square() * inv_var.array() - 1.0);
    }
    grad.head(net_.param_count()) = net_.backward(net_params(), cache, dout);
    grad.tail(arch_.act_dim) = g_log_std;
  }
  return grad;
}

Vec ParamPolicy::log_prob_grad(const Vec& state, const Vec& action) const {
  return weighted_score(state, action, Vec::Ones(1));
}

Vec ParamPolicy::sample(const Vec& state, Rng& rng) const {
  const DistParams dist = distributions(state);
  if (arch_.head == HeadKind::categorical) {
    const Vec p = log_softmax(dist.logits).array().exp();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    double acc = 0.0;
    int chosen = arch_.act_dim - 1;
    for (int a = 0; a < arch_.act_dim; ++a) {
      acc += p(a);
      if (x < acc) {
        chosen = a;
        break;
      }
    }
    while (chosen > 0 && p(chosen) == 0.0) --chosen;
    return Vec::Constant(1, chosen);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec a(arch_.act_dim);
  for (int i = 0; i < arch_.act_dim; ++i) a(i) = dist.mean(i, 0) + std::exp(dist.log_std(i)) * normal(rng);
  return a;
}

Vec ParamPolicy::sample(const Vec& state, std::uint64_t seed) const {
  Rng rng(seed);
  return sample(state, rng);
}

double mean_kl(const ParamPolicy& policy_new, const ParamPolicy& policy_old, const Mat& states,
               const Vec& weights) {
  if (!(policy_new.arch() == policy_old.arch())) throw std::invalid_argument("architectures differ");
  const Vec w = normalized_weights(weights, states.cols());
  const DistParams pn = policy_new.distributions(states);
  const DistParams po = policy_old.distributions(states);
  double kl = 0.0;
  if (policy_new.arch().head == HeadKind::categorical) {
    const Mat ln = log_softmax(pn.logits), lo = log_softmax(po.logits);
    const Mat p = ln.array().exp().matrix();
    for (Eigen::Index j = 0; j < states.cols(); ++j) kl += w(j) * p.col(j).dot(ln.col(j) - lo.col(j));
  } else {
    const Vec var_ratio = (2.0 * (pn.log_std - po.log_std)).array().exp();
    const Vec inv_var_old = (-2.0 * po.log_std).array().exp();
    const double per_state = (po.log_std - pn.log_std).sum() + 0.5 * var_ratio.sum() - 0.5 * var_ratio.size();
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
      const Vec diff = pn.mean.col(j) - po.mean.col(j);
      kl += w(j) * (per_state + 0.5 * diff.array().square().matrix().dot(inv_var_old));
    }
  }
  return kl;
}

Vec mean_kl_grad(const ParamPolicy& policy_new, const ParamPolicy& policy_old, const Mat& states,
                 const Vec& weights) {
  if (!(policy_new.arch() == policy_old.arch())) throw std::invalid_argument("architectures differ");
  const PolicyArch& arch = policy_new.arch();
  const Mlp net = arch.network();
  const Vec w = normalized_weights(weights, states.cols());
  Mlp::Cache cache;
  const DistParams pn = policy_new.distributions(states, &cache);
  const DistParams po = policy_old.distributions(states);
  const Eigen::Index n = states.cols();
  Mat dout(arch.act_dim, n);
  Vec grad = Vec::Zero(arch.param_count());
  const auto params = policy_new.theta().head(net.param_count());
  if (arch.head == HeadKind::categorical) {
    const Mat ln = log_softmax(pn.logits), lo = log_softmax(po.logits);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vec p = ln.col(j).array().exp();
      const Vec diff = ln.col(j) - lo.col(j);
      const double kl = p.dot(diff);
      dout.col(j) = w(j) * p.cwiseProduct((diff.array() - kl).matrix());
    }
    grad = net.backward(params, cache, dout);
  } else {
    const Vec inv_var_old = (-2.0 * po.log_std).array().exp();
    for (Eigen::Index j = 0; j < n; ++j)
      dout.col(j) = w(j) * (pn.mean.col(j) - po.mean.col(j)).cwiseProduct(inv_var_old);
    grad.head(net.param_count()) = net.backward(params, cache, dout);
    grad.tail(arch.act_dim) = ((2.0 * (pn.log_std - po.log_std)).array().exp() - 1.0).matrix();
  }
  return grad;
}

// At theta = theta_old the KL Hessian equals J^T F J, where J is the Jacobian
// of the distribution parameters and F the Fisher matrix of the distribution
// family in those parameters.
KlHvp::KlHvp(const ParamPolicy& policy, const Mat& states, const Vec& weights)
    : arch_(policy.arch()), net_(arch_.network()),
      params_(policy.theta().head(net_.param_count())),
      w_(normalized_weights(weights, states.cols())) {
  const DistParams dist = policy.distributions(states, &cache_);
  if (arch_.head == HeadKind::categorical)
    probs_ = log_softmax(dist.logits).array().exp().matrix();
  else
    inv_var_ = (-2.0 * dist.log_std).array().exp();
}

Vec KlHvp::operator()(const Vec& v) const {
  if (v.size() != arch_.param_count()) throw std::invalid_argument("HVP vector has wrong dimension");
  const Mat tangent = net_.jvp(params_, cache_, v.head(net_.param_count()));
  Mat dout;
  Vec out = Vec::Zero(arch_.param_count());
  if (arch_.head == HeadKind::categorical) {
    const Eigen::RowVectorXd pt = probs_.cwiseProduct(tangent).colwise().sum();
    dout = probs_.cwiseProduct(tangent - Mat::Ones(tangent.rows(), 1) * pt) * w_.asDiagonal();
    out = net_.backward(params_, cache_, dout);
  } else {
    dout = inv_var_.asDiagonal() * tangent * w_.asDiagonal();
    out.head(net_.param_count()) = net_.backward(params_, cache_, dout);
    out.tail(arch_.act_dim) = 2.0 * v.tail(arch_.act_dim);
  }
  return out;
}

Vec kl_hvp(const ParamPolicy& policy, const Mat& states, const Vec& v, const Vec& weights) {
  if (v.size() != policy.arch().param_count()) throw std::invalid_argument("HVP vector has wrong dimension");
  return KlHvp(policy, states, weights)(v);
}

Vec surrogate_grad(const ParamPolicy& policy, const Mat& states, const Mat& actions,
                   const Vec& advantages) {
  if (advantages.size() != states.cols()) throw std::invalid_argument("advantage length mismatch");
  if (states.cols() == 0) return Vec::Zero(policy.theta().size());
  return policy.weighted_score(states, actions, advantages / static_cast<double>(states.cols()));
}

double surrogate_value(const ParamPolicy& policy, const Mat& states, const Mat& actions,
                       const Vec& old_log_probs, const Vec& advantages) {
  if (advantages.size() != states.cols() || old_log_probs.size() != states.cols())
    throw std::invalid_argument("surrogate inputs have inconsistent lengths");
  const Vec ratio = (policy.log_probs(states, actions) - old_log_probs).array().exp();
  return ratio.dot(advantages) / static_cast<double>(states.cols());
}

}  // namespace cpo
