// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include "cpo/algorithms.hpp"
#include "cpo/config.hpp"
#include "cpo/environments.hpp"
#include "cpo/estimation.hpp"
#include "cpo/tabular.hpp"
#include "cpo/trainer.hpp"
#include "cpo/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace cpo;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr int kTheoryTrials = 1000;
constexpr double kTheoryBudgetSec = 30.0;
constexpr int kSolverTrials = 1000;
constexpr double kSolverBudgetSec = 60.0;
constexpr int kGradientProbes = 200;
constexpr int kExactIterations = 50;
constexpr double kExactDelta = 0.01;
constexpr double kExactSlack = 1e-9;
constexpr int kGatherIterations = 150;
constexpr int kGatherWindow = 30;
constexpr double kGatherLimit = 0.1;
constexpr double kGatherMargin = 0.05;
constexpr int kGatherSeeds = 3;
constexpr int kGatherRequired = 2;
constexpr double kGatherBudgetSec = 20.0 * 60.0;
constexpr double kReductionTol = 1e-6;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome theory_bounds(const VerifyReport& r) {
  int violations = 0, checks = 0;
  for (const char* p : {"sandwich_", "dist_shift", "pinsker_"}) {
    violations += r.failures(p);
    checks += r.count(p);
  }
  const bool ok = violations == 0 && checks > 0 && r.seconds < kTheoryBudgetSec;
  return {ok, std::to_string(checks) + " checks, " + std::to_string(violations) + " violations, worst slack " +
                  fmt("%.2e", std::max({r.worst("sandwich_"), r.worst("dist_shift"), r.worst("pinsker_")})) + ", " +
                  fmt("%.1f s", r.seconds)};
}

Outcome tightness(const VerifyReport& r) {
  const int fails = r.failures("tightness_");
  return {fails == 0 && r.count("tightness_") > 0,
          std::to_string(r.count("tightness_")) + " checks, worst " + fmt("%.2e", r.worst("tightness_"))};
}

Outcome solver(const VerifyReport& r) {
  int fails = 0;
  for (const char* p : {"solver_", "kkt_"}) fails += r.failures(p);
  const bool ok = fails == 0 && r.count("solver_infeasible_agrees_geometric") == kSolverTrials &&
                  r.seconds < kSolverBudgetSec;
  return {ok, std::to_string(r.count("solver_") + r.count("kkt_")) + " checks, " + std::to_string(fails) +
                  " failures, worst objective gap " + fmt("%.2e", r.worst("solver_objective")) + ", worst KKT " +
                  fmt("%.2e", r.worst("kkt_")) + ", " + fmt("%.1f s", r.seconds)};
}

Outcome gradients(const VerifyReport& r) {
  bool ok = r.failures("") == 0;
  std::string detail;
  for (const char* p : {"grad_log_prob", "grad_surrogate", "grad_kl", "hvp_kl"}) {
    ok = ok && r.count(p) >= kGradientProbes;
    detail += std::string(p) + " " + std::to_string(r.count(p)) + " probes worst " + fmt("%.1e", r.worst(p)) + "; ";
  }
  return {ok, detail};
}

Outcome exact_update() {
  Rng rng(2024);
  tabular::RandomCmdpOptions o;
  o.n_states = 5;
  o.n_actions = 3;
  tabular::TabularCMDP mdp = tabular::random_cmdp(rng, o);
  for (Mat& c : mdp.costs) c = c.cwiseAbs();
  const int S = mdp.n_states, A = mdp.n_actions;
  const PolicyArch arch{S, A, {}, HeadKind::categorical};
  ParamPolicy policy(arch, Vec::Zero(arch.param_count()));
  mdp.limits = Vec::Constant(
      1, tabular::policy_return(mdp, tabular::PolicyTable::uniform(S, A), tabular::Signal::cost(0)) + 0.02);

  // the instance must also run through the adapter
  auto env = tabular_env_adapter(mdp, 1);
  env->reset();

  TrustRegionConfig cfg;
  cfg.delta_kl = kExactDelta;
  int accepted = 0, checked = 0;
  double worst2 = -1e300, worst1 = -1e300;
  bool ok = true;
  for (int it = 0; it < kExactIterations; ++it) {
    const SurrogateModel m = exact_tabular_surrogates(mdp, policy, kExactDelta, cfg.cg.damping);
    const UpdateResult r = cpo_update(policy.theta(), m, cfg);
    const ParamPolicy next = policy.with_theta(r.theta_new);
    if (r.accepted) {
      ++accepted;
      const tabular::WorstCaseReport rep = tabular::worst_case_bounds(
          mdp, policy_table(policy, S), policy_table(next, S), kExactDelta * (1.0 + 1e-9));
      const double gap2 = rep.cost_return_new - rep.cost_ceiling;
      const double gap1 = rep.reward_floor - rep.delta_j;
      worst2 = std::max(worst2, gap2);
      worst1 = std::max(worst1, gap1);
      ok = ok && gap2 <= kExactSlack && gap1 <= kExactSlack;
      ++checked;
    }
    policy = next;
  }
  return {ok && accepted > 0, std::to_string(checked) + "/" + std::to_string(kExactIterations) +
                                  " accepted iterates checked, worst J_C - bound " + fmt("%.3e", worst2) +
                                  ", worst lower bound - dJ " + fmt("%.3e", worst1)};
}

Outcome gather(const fs::path& root) {
  const auto t0 = std::chrono::steady_clock::now();
  int cpo_ok = 0, trpo_ok = 0;
  std::string detail;
  for (Algorithm algo : {Algorithm::cpo, Algorithm::trpo}) {
    for (int seed = 0; seed < kGatherSeeds; ++seed) {
      RunConfig c = preset("point_gather_desk");
      c.algorithm = algo;
      c.seed = static_cast<std::uint64_t>(seed);
      c.iterations = kGatherIterations;
      c.output_dir = (root / ("gather_" + to_string(algo) + "_" + std::to_string(seed))).string();
      const std::vector<IterationMetrics> rows = train(c);
      double lo = 1e300, hi = -1e300, mean = 0.0;
      for (int k = kGatherIterations - kGatherWindow; k < kGatherIterations; ++k) {
        lo = std::min(lo, rows[k].mean_cost_return);
        hi = std::max(hi, rows[k].mean_cost_return);
        mean += rows[k].mean_cost_return / kGatherWindow;
      }
      if (algo == Algorithm::cpo) {
        const bool in = lo >= 0.0 && hi <= kGatherLimit + kGatherMargin;
        cpo_ok += in;
        detail += "cpo s" + std::to_string(seed) + " [" + fmt("%.3f", lo) + "," + fmt("%.3f", hi) + "]" +
                  (in ? "" : "*") + " ";
      } else {
        const bool above = mean > kGatherLimit;
        trpo_ok += above;
        detail += "trpo s" + std::to_string(seed) + " mean " + fmt("%.3f", mean) + (above ? "" : "*") + " ";
      }
    }
  }
  const double secs = seconds_since(t0);
  detail += fmt("%.0f s", secs);
  return {cpo_ok >= kGatherRequired && trpo_ok >= kGatherRequired && secs < kGatherBudgetSec, detail};
}

double relative(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

Outcome reductions() {
  RunConfig c = preset("point_gather_desk");
  auto env = make_environment(c);
  Rng rng(7);
  const PolicyArch arch{env->observation_dim(), env->action_dim(), c.policy_hidden, HeadKind::gaussian};
  const ParamPolicy policy = ParamPolicy::initialize(arch, rng, c.log_std_init);
  const TrajectoryBatch batch = rollout(*env, policy, c.batch_size, c.path_length(), 11);
  const Vec reward_rtg = discounted_to_go(batch, batch.rewards, c.estimation.gamma);
  const Vec cost = batch.costs.row(0).transpose();
  AdvantageSet adv;
  adv.reward = reward_rtg;
  adv.costs.push_back(discounted_to_go(batch, cost, c.estimation.gamma));
  adv.cost_returns = Vec::Constant(1, episode_discounted_sums(batch, cost, c.estimation.gamma).mean());
  const SurrogateModel constrained =
      build_surrogates(batch, policy, adv, Vec::Constant(1, c.cost_limit), c.trust_region.delta_kl, c.estimation,
                       c.trust_region.cg.damping);
  AdvantageSet bare = adv;
  bare.costs.clear();
  bare.cost_returns = Vec(0);
  const SurrogateModel unconstrained = build_surrogates(batch, policy, bare, Vec(0), c.trust_region.delta_kl,
                                                        c.estimation, c.trust_region.cg.damping);

  const Vec theta = policy.theta();
  const Vec trpo_step = trpo_update(theta, constrained, c.trust_region).theta_new - theta;
  DualState dual;
  dual.nu = Vec::Zero(1);
  const Vec pdo_step = pdo_update(theta, constrained, dual, c.trust_region).theta_new - theta;
  const Vec cpo_step = cpo_update(theta, unconstrained, c.trust_region).theta_new - theta;
  const double e_pdo = relative(pdo_step, trpo_step), e_cpo = relative(cpo_step, trpo_step);
  return {trpo_step.norm() > 0.0 && e_pdo <= kReductionTol && e_cpo <= kReductionTol,
          "PDO(nu=0) vs TRPO " + fmt("%.1e", e_pdo) + ", unconstrained CPO vs TRPO " + fmt("%.1e", e_cpo)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility(const fs::path& root) {
  RunConfig c = preset("point_circle_desk");
  c.iterations = 5;
  c.batch_size = 1000;
  c.seed = 3;
  std::vector<std::string> files;
  for (const char* tag : {"a", "b"}) {
    c.output_dir = (root / (std::string("repro_") + tag)).string();
    train(c);
    files.push_back(slurp(fs::path(c.output_dir) / "metrics.csv"));
  }
  const bool same = !files[0].empty() && files[0] == files[1];
  return {same, std::to_string(files[0].size()) + " bytes, " + (same ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments select criteria by number
  std::vector<std::string> only(argv + 1, argv + argc);
  const fs::path root = fs::temp_directory_path() / "cpo_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  VerifyReport theory, solver_report, gradient_report;
  bool have_theory = false;
  auto theory_once = [&]() -> const VerifyReport& {
    if (!have_theory) {
      theory = verify_theory(kTheoryTrials, 1);
      have_theory = true;
    }
    return theory;
  };
  criteria.emplace_back("1 theory bounds", [&] { return theory_bounds(theory_once()); });
  criteria.emplace_back("2 tightness", [&] { return tightness(theory_once()); });
  criteria.emplace_back("3 solver", [&] { return solver(verify_solver(kSolverTrials, 2)); });
  criteria.emplace_back("4 gradients", [&] { return gradients(verify_gradients(kGradientProbes, 3)); });
  criteria.emplace_back("5 exact CPO bounds", [] { return exact_update(); });
  criteria.emplace_back("6 desk gather", [&] { return gather(root); });
  criteria.emplace_back("7 reductions", [] { return reductions(); });
  criteria.emplace_back("8 reproducibility", [&] { return reproducibility(root); });

  bool all = true;
  for (auto& [name, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name.substr(0, name.find(' '))) == only.end()) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  fs::remove_all(root);
  return all ? 0 : 1;
}
