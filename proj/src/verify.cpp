#include "cpo/verify.hpp"

#include "cpo/lqclp.hpp"
#include "cpo/oracles.hpp"
#include "cpo/policy.hpp"
#include "cpo/tabular.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cpo {

bool VerifyReport::ok() const {
  return std::all_of(records.begin(), records.end(), [](const CheckRecord& r) { return r.pass; });
}

std::vector<std::uint64_t> VerifyReport::failing_seeds() const {
  std::set<std::uint64_t> seen;
  std::vector<std::uint64_t> out;
  for (const auto& r : records)
    if (!r.pass && seen.insert(r.seed).second) out.push_back(r.seed);
  return out;
}

int VerifyReport::count(const std::string& prefix) const {
  return static_cast<int>(
      std::count_if(records.begin(), records.end(), [&](const CheckRecord& r) { return r.check.starts_with(prefix); }));
}

int VerifyReport::failures(const std::string& prefix) const {
  return static_cast<int>(std::count_if(records.begin(), records.end(), [&](const CheckRecord& r) {
    return !r.pass && r.check.starts_with(prefix);
  }));
}

double VerifyReport::worst(const std::string& prefix) const {
  double w = -std::numeric_limits<double>::infinity();
  for (const auto& r : records)
    if (r.check.starts_with(prefix)) w = std::max(w, r.value);
  return w;
}

namespace {

using Clock = std::chrono::steady_clock;

std::string text(double x) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << x;
  return os.str();
}

struct Recorder {
  VerifyReport& report;
  int trial;
  std::uint64_t seed;
  std::map<std::string, std::string> fields;

  void operator()(const std::string& check, double value, double threshold) {
    report.records.push_back({trial, seed, check, value, threshold, std::isfinite(value) && value <= threshold});
  }
  void field(const std::string& name, double value) { fields[name] = text(value); }
  void field(const std::string& name, const std::string& value) { fields[name] = value; }
};

void theory_trial(Recorder& rec, Rng& rng) {
  using namespace tabular;
  std::uniform_int_distribution<int> n_states(1, 6), n_actions(1, 3);
  RandomCmdpOptions opt;
  opt.n_states = n_states(rng);
  opt.n_actions = n_actions(rng);
  const TabularCMDP mdp = random_cmdp(rng, opt);
  const PolicyTable pi = random_policy(rng, opt.n_states, opt.n_actions);
  const PolicyTable pi_new = random_policy(rng, opt.n_states, opt.n_actions);
  const double slack = 1e-9;
  rec.field("n_states", opt.n_states);
  rec.field("n_actions", opt.n_actions);
  rec.field("gamma", mdp.gamma);

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec f_random(opt.n_states);
  for (auto& x : f_random) x = 3.0 * u(rng);

  for (const Signal sig : {Signal::reward(), Signal::cost(0)}) {
    const std::string tag = sig.is_reward() ? "reward" : "cost";
    for (const Vec& f : {f_random, Vec(signal_values(mdp, pi, sig).v)}) {
      const BoundReport br = bound_report(mdp, pi, pi_new, f, sig);
      rec("sandwich_lower_" + tag, br.lower - br.delta_j, slack);
      rec("sandwich_upper_" + tag, br.delta_j - br.upper, slack);
    }
  }
  const BoundReport main_report = bound_report(mdp, pi, pi_new, f_random, Signal::reward());
  rec.field("delta_j", main_report.delta_j);
  rec.field("lower", main_report.lower);
  rec.field("upper", main_report.upper);

  const DistShiftCheck ds = dist_shift_bound_check(mdp, pi, pi_new);
  rec("dist_shift", ds.lhs - ds.rhs, slack);
  const KlBoundCheck kb = kl_bound_check(mdp, pi, pi_new);
  rec("pinsker_jensen", kb.tv_avg - kb.kl_bound_term, slack);
  rec.field("dist_shift_lhs", ds.lhs);
  rec.field("dist_shift_rhs", ds.rhs);
  rec.field("tv_avg", kb.tv_avg);
  rec.field("kl_bound_term", kb.kl_bound_term);

  // Cross-checks of the exact linear-algebra quantities.
  const Vec d = discounted_state_dist(mdp, pi);
  rec("oracle_state_dist", (d - oracle::state_dist_series(mdp, pi)).cwiseAbs().maxCoeff(), 1e-10);
  const double j = policy_return(mdp, pi, Signal::reward());
  const double j_vi = mdp.start_dist.dot(oracle::value_iteration(mdp, pi, Signal::reward()));
  rec("oracle_return", std::abs(j - j_vi), 1e-9);

  // Identical policies: every bound term vanishes.
  const BoundReport same = bound_report(mdp, pi, pi, f_random, Signal::reward());
  const double zero_terms = std::max({std::abs(same.delta_j), std::abs(same.lower), std::abs(same.upper),
                                      std::abs(same.surrogate), std::abs(same.avg_tv), std::abs(same.avg_kl)});
  rec("tightness_same_policy", zero_terms, 1e-12);

  // f = V of the new policy: epsilon vanishes and the bound is an equality.
  const Vec v_new = signal_values(mdp, pi_new, Signal::reward()).v;
  const BoundReport eq = bound_report(mdp, pi, pi_new, v_new, Signal::reward());
  rec("tightness_epsilon", std::abs(eq.epsilon), 1e-9);
  rec("tightness_equality",
      std::max(std::abs(eq.lower - eq.delta_j), std::abs(eq.upper - eq.delta_j)), 1e-9);
}

// Random SPD matrix with eigenvalues bounded away from zero.
Mat random_spd(Rng& rng, int n) {
  std::normal_distribution<double> z(0.0, 1.0);
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = z(rng);
  return A * A.transpose() + 0.1 * Mat::Identity(n, n);
}

void solver_trial(Recorder& rec, Rng& rng) {
  std::uniform_int_distribution<int> dim(1, 5);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> uc(-2.0, 2.0), ud(0.1, 2.0);
  const int n = dim(rng);
  const Mat H = random_spd(rng, n);
  Vec g(n), b(n);
  for (int i = 0; i < n; ++i) {
    g(i) = z(rng);
    b(i) = z(rng);
  }
  const double c = uc(rng), delta = ud(rng);

  const Eigen::LDLT<Mat> ldlt(H);
  const LqclpProblem p = make_lqclp(g, b, c, delta, ldlt.solve(g), ldlt.solve(b));
  const LqclpSolution sol = solve_single(p);
  const oracle::LqclpOracle ref = oracle::lqclp_dual_search(g, b, c, delta, H);

  rec.field("n", n);
  rec.field("q", p.q);
  rec.field("r", p.r);
  rec.field("s", p.s);
  rec.field("c", c);
  rec.field("delta", delta);
  rec.field("case", to_string(sol.case_tag));
  const bool geometric_infeasible = c > 0.0 && c * c / p.s - delta > 0.0;
  const bool solver_infeasible = sol.case_tag == CaseTag::infeasible;
  rec("solver_infeasible_agrees_geometric", geometric_infeasible == solver_infeasible ? 0.0 : 1.0, 0.0);
  rec("solver_infeasible_agrees_oracle", (!ref.feasible) == solver_infeasible ? 0.0 : 1.0, 0.0);
  if (solver_infeasible) return;

  const Vec& x = sol.direction;
  const double nu = sol.nu_star.size() ? sol.nu_star(0) : 0.0;
  const double lambda = sol.lambda_star;
  const double obj = g.dot(x);
  const double scale = std::max(1.0, std::abs(ref.objective));
  rec.field("lambda", lambda);
  rec.field("nu", nu);
  rec.field("objective", obj);
  rec.field("oracle_objective", ref.objective);
  rec("solver_objective_vs_dual_search", std::abs(obj - ref.objective) / scale, 1e-4);
  if (n == 2) {
    const oracle::LqclpOracle planar = oracle::lqclp_planar_search(g, b, c, delta, H);
    rec("solver_objective_vs_planar_search", std::abs(obj - planar.objective) / scale, 1e-4);
  }

  const double quad = x.dot(H * x);
  const double lin = b.dot(x) + c;
  rec("kkt_primal_quadratic", (quad - delta) / std::max(1.0, delta), 1e-6);
  rec("kkt_primal_linear", lin, 1e-6);
  rec("kkt_dual_feasibility", std::max(-lambda, -nu), 0.0);
  const Vec station = g + nu * b + lambda * (H * x);
  rec("kkt_stationarity", station.norm() / std::max(1.0, g.norm() + nu * b.norm()), 1e-6);
  rec("kkt_complementary_linear", std::abs(nu * lin), 1e-6);
  rec("kkt_complementary_quadratic", std::abs(lambda * (quad - delta)) / std::max(1.0, lambda * delta), 1e-6);
}

Mat random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = z(rng);
  return m;
}

void gradient_trial(Recorder& rec, Rng& rng) {
  std::uniform_int_distribution<int> coin(0, 1), obs_dim(1, 4), act_dim(1, 3), width(2, 5), n_states(2, 6);
  PolicyArch arch;
  arch.head = coin(rng) ? HeadKind::gaussian : HeadKind::categorical;
  arch.obs_dim = obs_dim(rng);
  arch.act_dim = act_dim(rng) + (arch.head == HeadKind::categorical ? 1 : 0);
  const int layers = std::uniform_int_distribution<int>(0, 2)(rng);
  for (int l = 0; l < layers; ++l) arch.hidden.push_back(width(rng));

  const ParamPolicy old_policy = ParamPolicy::initialize(arch, rng, -0.3);
  rec.field("head", to_string(arch.head));
  rec.field("n_params", static_cast<double>(old_policy.theta().size()));
  const Vec theta_old = old_policy.theta();
  const Vec theta_new = theta_old + random_matrix(rng, static_cast<int>(theta_old.size()), 1, 0.1).col(0);
  const ParamPolicy new_policy = old_policy.with_theta(theta_new);

  const int N = n_states(rng);
  const Mat states = random_matrix(rng, arch.obs_dim, N);
  Mat actions(arch.action_width(), N);
  for (int i = 0; i < N; ++i) actions.col(i) = old_policy.sample(Vec(states.col(i)), rng);
  const Vec adv = random_matrix(rng, N, 1).col(0);
  const double tol = 1e-4;

  // log-probability gradient at one state-action pair
  const Vec s0 = states.col(0), a0 = actions.col(0);
  const Vec lp_fd = oracle::finite_difference_gradient(
      [&](const Vec& th) { return old_policy.with_theta(th).log_prob(s0, a0); }, theta_new);
  const double e_lp = oracle::relative_error(new_policy.log_prob_grad(s0, a0), lp_fd);
  rec("grad_log_prob", e_lp, tol);
  rec.field("log_prob_err", e_lp);

  // surrogate gradient is the derivative of the ratio objective at theta_old
  const Vec old_lp = old_policy.log_probs(states, actions);
  const Vec sg_fd = oracle::finite_difference_gradient(
      [&](const Vec& th) { return surrogate_value(old_policy.with_theta(th), states, actions, old_lp, adv); },
      theta_old);
  const double e_sg = oracle::relative_error(surrogate_grad(old_policy, states, actions, adv), sg_fd);
  rec("grad_surrogate", e_sg, tol);
  rec.field("surrogate_err", e_sg);

  // KL gradient away from the anchor
  const Vec kl_fd = oracle::finite_difference_gradient(
      [&](const Vec& th) { return mean_kl(old_policy.with_theta(th), old_policy, states); }, theta_new);
  const double e_kl = oracle::relative_error(mean_kl_grad(new_policy, old_policy, states), kl_fd);
  rec("grad_kl", e_kl, tol);
  rec.field("kl_err", e_kl);

  // KL Hessian-vector product at the anchor
  const Vec v = random_matrix(rng, static_cast<int>(theta_old.size()), 1).col(0);
  const Vec hv_fd = oracle::finite_difference_directional(
      [&](const Vec& th) { return mean_kl_grad(old_policy.with_theta(th), old_policy, states); }, theta_old, v);
  const double e_hvp = oracle::relative_error(kl_hvp(old_policy, states, v), hv_fd);
  rec("hvp_kl", e_hvp, tol);
  rec.field("hvp_err", e_hvp);
}

template <class Trial>
VerifyReport run_trials(const std::string& suite, std::vector<std::string> columns, int trials, std::uint64_t seed,
                        Trial trial) {
  VerifyReport report;
  report.suite = suite;
  report.columns = std::move(columns);
  const auto start = Clock::now();
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = mix_seed(seed, static_cast<std::uint64_t>(t));
    Rng rng(trial_seed);
    Recorder rec{report, t, trial_seed, {}};
    const std::size_t first = report.records.size();
    try {
      trial(rec, rng);
    } catch (const std::exception&) {
      rec("exception", 1.0, 0.0);
    }
    TrialRow row{t, trial_seed, {}, true};
    std::string worst;
    double worst_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t i = first; i < report.records.size(); ++i) {
      const CheckRecord& r = report.records[i];
      row.pass = row.pass && r.pass;
      const double margin = std::isfinite(r.value) ? r.value - r.threshold : std::numeric_limits<double>::infinity();
      if (margin > worst_margin) {
        worst_margin = margin;
        worst = r.check;
      }
    }
    for (const auto& col : report.columns) {
      const auto it = rec.fields.find(col);
      row.fields.push_back(it == rec.fields.end() ? "" : it->second);
    }
    row.fields.push_back(worst);
    report.trials.push_back(std::move(row));
  }
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

}  // namespace

VerifyReport verify_theory(int trials, std::uint64_t seed) {
  return run_trials("theory",
                    {"n_states", "n_actions", "gamma", "delta_j", "lower", "upper", "dist_shift_lhs", "dist_shift_rhs",
                     "tv_avg", "kl_bound_term"},
                    trials, seed, theory_trial);
}

VerifyReport verify_solver(int trials, std::uint64_t seed) {
  return run_trials("solver",
                    {"n", "q", "r", "s", "c", "delta", "case", "lambda", "nu", "objective", "oracle_objective"},
                    trials, seed, solver_trial);
}

VerifyReport verify_gradients(int trials, std::uint64_t seed) {
  return run_trials("gradients", {"head", "n_params", "log_prob_err", "surrogate_err", "kl_err", "hvp_err"}, trials,
                    seed, gradient_trial);
}

VerifyReport run_suite(const std::string& suite, int trials, std::uint64_t seed) {
  if (suite == "theory") return verify_theory(trials, seed);
  if (suite == "solver") return verify_solver(trials, seed);
  if (suite == "gradients") return verify_gradients(trials, seed);
  throw std::invalid_argument("unknown suite '" + suite + "' (theory, solver, gradients)");
}

void write_report_csv(std::ostream& os, const VerifyReport& report) {
  os << "trial,seed";
  for (const auto& c : report.columns) os << ',' << c;
  os << ",worst_check,pass\n";
  for (const auto& row : report.trials) {
    os << row.trial << ',' << row.seed;
    for (const auto& f : row.fields) os << ',' << f;
    os << ',' << (row.pass ? 1 : 0) << '\n';
  }
}

void write_checks_csv(std::ostream& os, const VerifyReport& report) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "trial,seed,check,value,threshold,pass\n";
  for (const auto& r : report.records)
    os << r.trial << ',' << r.seed << ',' << r.check << ',' << r.value << ',' << r.threshold << ','
       << (r.pass ? 1 : 0) << '\n';
  os.precision(old);
}

}  // namespace cpo
