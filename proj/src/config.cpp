#include "cpo/config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cpo {

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::cpo: return "cpo";
    case Algorithm::trpo: return "trpo";
    case Algorithm::pdo: return "pdo";
    case Algorithm::fpo: return "fpo";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "cpo") return Algorithm::cpo;
  if (name == "trpo") return Algorithm::trpo;
  if (name == "pdo") return Algorithm::pdo;
  if (name == "fpo") return Algorithm::fpo;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

int RunConfig::path_length() const {
  if (max_path_length > 0) return max_path_length;
  return environment == "point_circle" ? circle.horizon : gather.horizon;
}

void RunConfig::validate() const {
  if (environment != "point_circle" && environment != "point_gather")
    throw std::invalid_argument("environment must be point_circle or point_gather");
  circle.validate();
  gather.validate();
  estimation.validate();
  trust_region.validate();
  shaping.validate();
  for (int h : policy_hidden)
    if (h < 1) throw std::invalid_argument("policy hidden sizes must be positive");
  if (batch_size < path_length()) throw std::invalid_argument("batch_size must cover at least one episode");
  if (iterations < 0) throw std::invalid_argument("iterations must be nonnegative");
  if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be positive");
  if (!(pdo_alpha >= 0.0) || !(pdo_nu_init >= 0.0)) throw std::invalid_argument("PDO settings must be nonnegative");
  if (!(fpo_lambda >= 0.0)) throw std::invalid_argument("fpo lambda must be nonnegative");
}

namespace {

RunConfig common_base() {
  RunConfig c;
  c.estimation.gamma = 0.995;
  c.estimation.lambda_gae = 0.95;
  c.estimation.lambda_gae_cost = 1.0;
  c.trust_region.delta_kl = 0.01;
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"point_circle_paper", "point_gather_paper", "point_circle_desk", "point_gather_desk"};
}

RunConfig preset(const std::string& name) {
  RunConfig c = common_base();
  if (name == "point_circle_paper" || name == "point_circle_desk") {
    c.environment = "point_circle";
    c.cost_limit = 5.0;
    c.shaping.enabled = true;
    c.shaping.horizon_T = 5;
    c.shaping.alpha = 1.0;
    c.shaping.fit_steps = 25;
  } else if (name == "point_gather_paper" || name == "point_gather_desk") {
    c.environment = "point_gather";
    c.cost_limit = 0.1;
    c.shaping.enabled = false;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  if (name.ends_with("_paper")) {
    c.batch_size = 50000;
    c.policy_hidden = {64, 32};
    c.estimation.value_hidden = {64, 32};
    c.circle = CircleParams::reference();
    c.gather = GatherParams::reference();
  } else {
    c.batch_size = 4000;
    if (c.environment == "point_gather") {
      // bomb hits are rare at 4k steps; TD cost advantages and a heavier
      // metric ridge keep b from being dominated by noise
      c.estimation.lambda_gae_cost = 0.0;
      c.trust_region.cg.damping = 3.0;
    }
  }
  c.output_dir = "runs/" + name;
  return c;
}

void apply_paper_params(RunConfig& config) {
  config.circle.d = 15.0;
  config.circle.x_lim = 2.5;
  config.circle.horizon = 65;
  config.gather.horizon = 15;
  if (config.environment == "point_gather") config.cost_limit = 0.1;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters in number '" + v + "'");
  return x;
}

int to_int(const std::string& v) {
  std::size_t used = 0;
  const long x = std::stol(v, &used);
  if (used != v.size()) throw std::invalid_argument("not an integer: '" + v + "'");
  return static_cast<int>(x);
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("not a boolean: '" + v + "'");
}

std::vector<int> to_sizes(const std::string& v) {
  std::vector<int> out;
  if (v == "none" || v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(trim(item)));
  return out;
}

std::string sizes_text(const std::vector<int>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"run.algorithm", [](RunConfig& c, const std::string& v) { c.algorithm = algorithm_from_string(v); }},
      {"run.iterations", [](RunConfig& c, const std::string& v) { c.iterations = to_int(v); }},
      {"run.seed", [](RunConfig& c, const std::string& v) { c.seed = std::stoull(v); }},
      {"run.batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = to_int(v); }},
      {"run.max_path_length", [](RunConfig& c, const std::string& v) { c.max_path_length = to_int(v); }},
      {"run.output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
      {"run.checkpoint_every", [](RunConfig& c, const std::string& v) { c.checkpoint_every = to_int(v); }},
      {"run.debug_subproblems", [](RunConfig& c, const std::string& v) { c.debug_subproblems = to_bool(v); }},

      {"environment.name", [](RunConfig& c, const std::string& v) { c.environment = v; }},
      {"environment.d", [](RunConfig& c, const std::string& v) { c.circle.d = to_double(v); }},
      {"environment.x_lim", [](RunConfig& c, const std::string& v) { c.circle.x_lim = to_double(v); }},
      {"environment.start_noise", [](RunConfig& c, const std::string& v) { c.circle.start_noise = to_double(v); }},
      {"environment.circle_horizon", [](RunConfig& c, const std::string& v) { c.circle.horizon = to_int(v); }},
      {"environment.gather_horizon", [](RunConfig& c, const std::string& v) { c.gather.horizon = to_int(v); }},
      {"environment.n_apples", [](RunConfig& c, const std::string& v) { c.gather.n_apples = to_int(v); }},
      {"environment.n_bombs", [](RunConfig& c, const std::string& v) { c.gather.n_bombs = to_int(v); }},
      {"environment.apple_reward", [](RunConfig& c, const std::string& v) { c.gather.apple_reward = to_double(v); }},
      {"environment.bomb_cost", [](RunConfig& c, const std::string& v) { c.gather.bomb_cost = to_double(v); }},
      {"environment.arena_radius", [](RunConfig& c, const std::string& v) { c.gather.arena_radius = to_double(v); }},
      {"environment.catch_radius", [](RunConfig& c, const std::string& v) { c.gather.catch_radius = to_double(v); }},
      {"environment.spawn_clearance",
       [](RunConfig& c, const std::string& v) { c.gather.spawn_clearance = to_double(v); }},
      {"environment.missing_distance",
       [](RunConfig& c, const std::string& v) { c.gather.missing_distance = to_double(v); }},
      {"environment.smoothing",
       [](RunConfig& c, const std::string& v) { c.circle.dynamics.smoothing = c.gather.dynamics.smoothing = to_double(v); }},
      {"environment.action_gain",
       [](RunConfig& c, const std::string& v) { c.circle.dynamics.action_gain = c.gather.dynamics.action_gain = to_double(v); }},
      {"environment.dt", [](RunConfig& c, const std::string& v) { c.circle.dynamics.dt = c.gather.dynamics.dt = to_double(v); }},

      {"policy.hidden", [](RunConfig& c, const std::string& v) { c.policy_hidden = to_sizes(v); }},
      {"policy.log_std_init", [](RunConfig& c, const std::string& v) { c.log_std_init = to_double(v); }},

      {"estimation.gamma", [](RunConfig& c, const std::string& v) { c.estimation.gamma = to_double(v); }},
      {"estimation.lambda_gae", [](RunConfig& c, const std::string& v) { c.estimation.lambda_gae = to_double(v); }},
      {"estimation.lambda_gae_cost",
       [](RunConfig& c, const std::string& v) { c.estimation.lambda_gae_cost = to_double(v); }},
      {"estimation.value_fit_iters",
       [](RunConfig& c, const std::string& v) { c.estimation.value_fit_iters = to_int(v); }},
      {"estimation.value_fit_step",
       [](RunConfig& c, const std::string& v) { c.estimation.value_fit_step = to_double(v); }},
      {"estimation.value_hidden", [](RunConfig& c, const std::string& v) { c.estimation.value_hidden = to_sizes(v); }},
      {"estimation.normalize_advantages",
       [](RunConfig& c, const std::string& v) { c.estimation.normalize_advantages = to_bool(v); }},
      {"estimation.discounted_weighting",
       [](RunConfig& c, const std::string& v) { c.estimation.discounted_weighting = to_bool(v); }},
      {"estimation.fisher_fraction",
       [](RunConfig& c, const std::string& v) { c.estimation.fisher_fraction = to_double(v); }},

      {"trust_region.delta_kl", [](RunConfig& c, const std::string& v) { c.trust_region.delta_kl = to_double(v); }},
      {"trust_region.backtrack_ratio",
       [](RunConfig& c, const std::string& v) { c.trust_region.backtrack_ratio = to_double(v); }},
      {"trust_region.backtrack_budget",
       [](RunConfig& c, const std::string& v) { c.trust_region.backtrack_budget = to_int(v); }},
      {"trust_region.cg_iters", [](RunConfig& c, const std::string& v) { c.trust_region.cg.max_iters = to_int(v); }},
      {"trust_region.cg_tol", [](RunConfig& c, const std::string& v) { c.trust_region.cg.tol = to_double(v); }},
      {"trust_region.cg_damping", [](RunConfig& c, const std::string& v) { c.trust_region.cg.damping = to_double(v); }},
      {"trust_region.accept_violation_tol",
       [](RunConfig& c, const std::string& v) { c.trust_region.accept_violation_tol = to_double(v); }},

      {"constraint.limit", [](RunConfig& c, const std::string& v) { c.cost_limit = to_double(v); }},

      {"shaping.enabled", [](RunConfig& c, const std::string& v) { c.shaping.enabled = to_bool(v); }},
      {"shaping.horizon_T", [](RunConfig& c, const std::string& v) { c.shaping.horizon_T = to_int(v); }},
      {"shaping.alpha", [](RunConfig& c, const std::string& v) { c.shaping.alpha = to_double(v); }},
      {"shaping.fit_steps", [](RunConfig& c, const std::string& v) { c.shaping.fit_steps = to_int(v); }},
      {"shaping.step", [](RunConfig& c, const std::string& v) { c.shaping.step = to_double(v); }},
      {"shaping.hidden", [](RunConfig& c, const std::string& v) { c.shaping.hidden = to_sizes(v); }},

      {"pdo.alpha", [](RunConfig& c, const std::string& v) { c.pdo_alpha = to_double(v); }},
      {"pdo.nu_init", [](RunConfig& c, const std::string& v) { c.pdo_nu_init = to_double(v); }},
      {"fpo.lambda", [](RunConfig& c, const std::string& v) { c.fpo_lambda = to_double(v); }},
  };
  return table;
}

}  // namespace

RunConfig parse_config(std::istream& in, const RunConfig& base) {
  RunConfig config = base;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section == "run" && key == "preset") {
      config = preset(value);
      continue;
    }
    const auto it = setters().find(section + "." + key);
    if (it == setters().end()) throw std::invalid_argument(where + "unknown key '" + section + "." + key + "'");
    try {
      it->second(config, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument(where + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::string& file_or_preset) {
  for (const auto& name : preset_names())
    if (name == file_or_preset) return preset(name);
  std::ifstream in(file_or_preset);
  if (!in) throw std::invalid_argument("cannot open config '" + file_or_preset + "' (and it is not a preset)");
  return parse_config(in);
}

std::string to_config_text(const RunConfig& c) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << std::boolalpha;
  os << "[run]\nalgorithm = " << to_string(c.algorithm) << "\niterations = " << c.iterations
     << "\nseed = " << c.seed << "\nbatch_size = " << c.batch_size << "\nmax_path_length = " << c.max_path_length
     << "\noutput_dir = " << c.output_dir << "\ncheckpoint_every = " << c.checkpoint_every
     << "\ndebug_subproblems = " << c.debug_subproblems << "\n\n";
  os << "[environment]\nname = " << c.environment << "\nd = " << c.circle.d << "\nx_lim = " << c.circle.x_lim
     << "\nstart_noise = " << c.circle.start_noise << "\ncircle_horizon = " << c.circle.horizon
     << "\ngather_horizon = " << c.gather.horizon << "\nn_apples = " << c.gather.n_apples
     << "\nn_bombs = " << c.gather.n_bombs << "\napple_reward = " << c.gather.apple_reward
     << "\nbomb_cost = " << c.gather.bomb_cost << "\narena_radius = " << c.gather.arena_radius
     << "\ncatch_radius = " << c.gather.catch_radius << "\nspawn_clearance = " << c.gather.spawn_clearance
     << "\nmissing_distance = " << c.gather.missing_distance << "\nsmoothing = " << c.circle.dynamics.smoothing
     << "\naction_gain = " << c.circle.dynamics.action_gain << "\ndt = " << c.circle.dynamics.dt << "\n\n";
  os << "[policy]\nhidden = " << sizes_text(c.policy_hidden) << "\nlog_std_init = " << c.log_std_init << "\n\n";
  os << "[estimation]\ngamma = " << c.estimation.gamma << "\nlambda_gae = " << c.estimation.lambda_gae
     << "\nlambda_gae_cost = " << c.estimation.lambda_gae_cost << "\nvalue_fit_iters = " << c.estimation.value_fit_iters
     << "\nvalue_fit_step = " << c.estimation.value_fit_step
     << "\nvalue_hidden = " << sizes_text(c.estimation.value_hidden)
     << "\nnormalize_advantages = " << c.estimation.normalize_advantages
     << "\ndiscounted_weighting = " << c.estimation.discounted_weighting
     << "\nfisher_fraction = " << c.estimation.fisher_fraction << "\n\n";
  os << "[trust_region]\ndelta_kl = " << c.trust_region.delta_kl << "\nbacktrack_ratio = " << c.trust_region.backtrack_ratio
     << "\nbacktrack_budget = " << c.trust_region.backtrack_budget << "\ncg_iters = " << c.trust_region.cg.max_iters
     << "\ncg_tol = " << c.trust_region.cg.tol << "\ncg_damping = " << c.trust_region.cg.damping
     << "\naccept_violation_tol = " << c.trust_region.accept_violation_tol << "\n\n";
  os << "[constraint]\nlimit = " << c.cost_limit << "\n\n";
  os << "[shaping]\nenabled = " << c.shaping.enabled << "\nhorizon_T = " << c.shaping.horizon_T
     << "\nalpha = " << c.shaping.alpha << "\nfit_steps = " << c.shaping.fit_steps << "\nstep = " << c.shaping.step
     << "\nhidden = " << sizes_text(c.shaping.hidden) << "\n\n";
  os << "[pdo]\nalpha = " << c.pdo_alpha << "\nnu_init = " << c.pdo_nu_init << "\n\n";
  os << "[fpo]\nlambda = " << c.fpo_lambda << "\n";
  return os.str();
}

}  // namespace cpo
