#include "cpo/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace cpo {

namespace {

std::string num(double x) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << x;
  return os.str();
}

}  // namespace

std::string format_metrics_row(const IterationMetrics& m) {
  std::ostringstream os;
  os << m.iteration << ',' << m.steps << ',' << num(m.mean_return) << ',' << num(m.mean_cost_return) << ','
     << num(m.mean_shaped_cost_return) << ',' << num(m.c_estimate) << ',' << num(m.lambda_star) << ','
     << num(m.nu_star) << ',' << m.case_tag << ',' << m.step_kind << ',' << num(m.kl) << ',' << m.backtracks << ','
     << (m.accepted ? 1 : 0) << ',' << num(m.predictor_loss);
  return os.str();
}

std::string format_subproblem_row(const IterationMetrics& m) {
  const LqclpProblem& p = m.subproblem;
  std::ostringstream os;
  os << m.iteration << ',' << num(p.q) << ',' << num(p.r) << ',' << num(p.s) << ',' << num(p.c) << ','
     << num(p.delta) << ',' << m.case_tag << ',' << num(m.lambda_star) << ',' << num(m.nu_star);
  return os.str();
}

std::unique_ptr<Environment> make_environment(const RunConfig& config) {
  if (config.environment == "point_circle") return std::make_unique<PointCircle>(config.circle);
  if (config.environment == "point_gather") return std::make_unique<PointGather>(config.gather);
  throw std::invalid_argument("unknown environment '" + config.environment + "'");
}

namespace {

ParamPolicy initial_policy(const RunConfig& config, const Environment& env) {
  config.validate();
  const PolicyArch arch{env.observation_dim(), env.action_dim(), config.policy_hidden, HeadKind::gaussian};
  Rng rng(mix_seed(config.seed, 10));
  return ParamPolicy::initialize(arch, rng, config.log_std_init);
}

}  // namespace

Trainer::Trainer(RunConfig config)
    : config_(std::move(config)), env_(make_environment(config_)), policy_(initial_policy(config_, *env_)) {
  const PolicyArch& arch = policy_.arch();
  Rng value_rng(mix_seed(config_.seed, 11));
  reward_values_ = ValueFunction(arch.obs_dim, config_.estimation.value_hidden, value_rng);
  cost_values_ = ValueFunction(arch.obs_dim, config_.estimation.value_hidden, value_rng);
  if (config_.shaping.enabled) {
    Rng pred_rng(mix_seed(config_.seed, 12));
    predictor_ = FailurePredictor(arch.obs_dim, config_.shaping.hidden, pred_rng);
  }
  dual_.alpha = config_.pdo_alpha;
  dual_.nu = Vec::Constant(1, config_.pdo_nu_init);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.iteration = iteration_;
  ck.arch = policy_.arch();
  ck.theta = policy_.theta();
  if (config_.algorithm == Algorithm::pdo) ck.nu = dual_.nu;
  return ck;
}

IterationMetrics Trainer::iterate() {
  const RunConfig& cfg = config_;
  const EstimatorConfig& est = cfg.estimation;
  IterationMetrics m;
  m.iteration = iteration_;

  const TrajectoryBatch batch =
      rollout(*env_, policy_, cfg.batch_size, cfg.path_length(), mix_seed(cfg.seed, 1000 + iteration_));
  steps_ += batch.size();
  m.steps = steps_;

  const Vec raw_cost = batch.costs.row(0).transpose();
  const bool shaping = cfg.shaping.enabled && predictor_.initialized();
  const Vec cost = shaping ? shaped_costs(raw_cost, predictor_, batch.observations, cfg.shaping.alpha) : raw_cost;

  m.mean_return = episode_discounted_sums(batch, batch.rewards, 1.0).mean();
  m.mean_cost_return = episode_discounted_sums(batch, raw_cost, est.gamma).mean();
  const double constrained_return = episode_discounted_sums(batch, cost, est.gamma).mean();
  m.mean_shaped_cost_return = constrained_return;

  const Vec reward =
      cfg.algorithm == Algorithm::fpo ? penalized_reward(batch.rewards, cost, cfg.fpo_lambda) : batch.rewards;

  AdvantageSet adv;
  adv.reward = gae_advantages(batch, reward, reward_values_.predict(batch.observations), est.gamma, est.lambda_gae);
  adv.costs.push_back(
      gae_advantages(batch, cost, cost_values_.predict(batch.observations), est.gamma, est.lambda_gae_cost));
  adv.cost_returns = Vec::Constant(1, constrained_return);
  fit_values(reward_values_, batch.observations, discounted_to_go(batch, reward, est.gamma), est.value_fit_iters,
             est.value_fit_step);
  fit_values(cost_values_, batch.observations, discounted_to_go(batch, cost, est.gamma), est.value_fit_iters,
             est.value_fit_step);

  const SurrogateModel model = build_surrogates(batch, policy_, adv, Vec::Constant(1, cfg.cost_limit),
                                                cfg.trust_region.delta_kl, est, cfg.trust_region.cg.damping);
  m.c_estimate = model.c(0);

  const Vec& theta = policy_.theta();
  UpdateResult up;
  switch (cfg.algorithm) {
    case Algorithm::cpo: up = cpo_update(theta, model, cfg.trust_region); break;
    case Algorithm::trpo: up = trpo_update(theta, model, cfg.trust_region); break;
    case Algorithm::pdo: up = pdo_update(theta, model, dual_, cfg.trust_region); break;
    case Algorithm::fpo: up = fpo_update(theta, model, cfg.trust_region); break;
  }
  m.lambda_star = up.lambda_star;
  m.nu_star = up.nu_star.size() > 0 ? up.nu_star(0) : 0.0;
  m.case_tag = to_string(up.case_tag);
  m.step_kind = to_string(up.step_kind);
  m.kl = up.measured_kl;
  m.backtracks = up.backtracks;
  m.accepted = up.accepted;
  m.subproblem = up.subproblem;

  if (cfg.shaping.enabled) {
    const Vec unsafe = (raw_cost.array() > 0.0).cast<double>().matrix();
    const Vec labels = label_batch(batch, unsafe, cfg.shaping.horizon_T);
    const auto losses =
        fit_predictor(predictor_, batch.observations, labels, cfg.shaping.fit_steps, cfg.shaping.step);
    m.predictor_loss = losses.empty() ? predictor_.loss(batch.observations, labels) : losses.back();
  }

  const bool finite = up.theta_new.allFinite() && std::isfinite(m.mean_return) && std::isfinite(m.kl) &&
                      std::isfinite(m.c_estimate);
  if (!finite) {
    m.step_kind = "abort";
    m.accepted = false;
    throw TrainingError("non-finite value at iteration " + std::to_string(iteration_) +
                            (up.diagnostic.empty() ? "" : ": " + up.diagnostic),
                        m);
  }
  policy_ = policy_.with_theta(up.theta_new);
  ++iteration_;
  return m;
}

std::vector<IterationMetrics> train(const RunConfig& config, std::ostream* log) {
  namespace fs = std::filesystem;
  config.validate();
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg_out(dir / "config.txt");
    cfg_out << to_config_text(config);
  }
  std::ofstream metrics(dir / "metrics.csv");
  if (!metrics) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
  metrics << kMetricsHeader << '\n';
  std::ofstream subproblems;
  if (config.debug_subproblems) {
    subproblems.open(dir / "subproblems.csv");
    subproblems << kSubproblemHeader << '\n';
  }

  auto checkpoint_path = [&](int k) {
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_%04d.txt", k);
    return (dir / name).string();
  };

  Trainer trainer(config);
  std::vector<IterationMetrics> rows;
  for (int k = 0; k < config.iterations; ++k) {
    IterationMetrics m;
    try {
      m = trainer.iterate();
    } catch (const TrainingError& e) {
      metrics << format_metrics_row(e.row()) << '\n';
      throw;
    }
    metrics << format_metrics_row(m) << '\n';
    metrics.flush();
    if (config.debug_subproblems) subproblems << format_subproblem_row(m) << '\n';
    if (log)
      *log << "iter " << m.iteration << " return " << m.mean_return << " cost " << m.mean_cost_return << " c "
           << m.c_estimate << " " << m.case_tag << "/" << m.step_kind << " kl " << m.kl << " bt " << m.backtracks
           << '\n';
    rows.push_back(std::move(m));
    if ((k + 1) % config.checkpoint_every == 0) save_checkpoint(checkpoint_path(k + 1), trainer.checkpoint());
  }
  save_checkpoint((dir / "checkpoint_final.txt").string(), trainer.checkpoint());
  return rows;
}

}  // namespace cpo
