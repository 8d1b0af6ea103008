// cpo: train | verify | solve

#include "cpo/config.hpp"
#include "cpo/solve_file.hpp"
#include "cpo/trainer.hpp"
#include "cpo/verify.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

int run_train(const std::string& config_name, const std::optional<std::uint64_t>& seed, bool paper_params,
              const std::string& out_dir, bool debug, const std::optional<int>& iterations,
              const std::string& algorithm, bool quiet) {
  cpo::RunConfig config;
  try {
    config = cpo::load_config(config_name);
    if (paper_params) cpo::apply_paper_params(config);
    if (seed) config.seed = *seed;
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (iterations) config.iterations = *iterations;
    if (!algorithm.empty()) config.algorithm = cpo::algorithm_from_string(algorithm);
    if (debug) config.debug_subproblems = true;
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 1;
  }
  try {
    cpo::train(config, quiet ? nullptr : &std::cerr);
  } catch (const cpo::TrainingError& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cout << "metrics written to " << config.output_dir << "/metrics.csv\n";
  return 0;
}

int run_verify(const std::string& suite, int trials, std::uint64_t seed, const std::string& report_path) {
  cpo::VerifyReport report;
  try {
    report = cpo::run_suite(suite, trials, seed);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  if (report_path.empty() || report_path == "-") {
    cpo::write_report_csv(std::cout, report);
  } else {
    std::ofstream out(report_path);
    if (!out) {
      std::cerr << "cannot write " << report_path << '\n';
      return 1;
    }
    cpo::write_report_csv(out, report);
  }
  const auto failing = report.failing_seeds();
  std::cerr << suite << ": " << report.records.size() << " checks over " << trials << " trials in " << report.seconds
            << " s, " << failing.size() << " failing trials\n";
  if (!failing.empty()) {
    std::cerr << "failing seeds:";
    for (auto s : failing) std::cerr << ' ' << s;
    std::cerr << '\n';
    return 1;
  }
  return 0;
}

int run_solve(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open " << path << '\n';
    return 1;
  }
  cpo::ProblemFile problem;
  try {
    problem = cpo::parse_problem(in);
  } catch (const std::exception& e) {
    std::cerr << "malformed problem: " << e.what() << '\n';
    return 1;
  }
  cpo::LqclpSolution solution;
  try {
    solution = cpo::solve_problem(problem);
  } catch (const std::exception& e) {
    std::cerr << "malformed problem: " << e.what() << '\n';
    return 1;
  }
  std::cout << cpo::format_solution(solution);
  return solution.case_tag == cpo::CaseTag::infeasible ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained policy optimization toolkit"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Run a training job");
  std::string config_name, out_dir, algorithm;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> iterations;
  bool paper_params = false, debug = false, quiet = false;
  train->add_option("--config", config_name, "Config file or preset name")->required();
  train->add_option("--seed", train_seed, "Override the run seed");
  train->add_flag("--paper-params", paper_params, "Use the original environment parameters");
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--iterations", iterations, "Override the iteration count");
  train->add_option("--algorithm", algorithm, "Override the algorithm (cpo, trpo, pdo, fpo)");
  train->add_flag("--debug-subproblems", debug, "Write subproblems.csv with one LQCLP row per iteration");
  train->add_flag("--quiet", quiet, "No per-iteration log on stderr");

  auto* verify = app.add_subcommand("verify", "Run a randomized property suite");
  std::string suite, report_path;
  int trials = 100;
  std::uint64_t verify_seed = 0;
  verify->add_option("--suite", suite, "theory, solver or gradients")->required();
  verify->add_option("--trials", trials, "Number of random trials")->check(CLI::PositiveNumber);
  verify->add_option("--seed", verify_seed, "Suite seed");
  verify->add_option("--report", report_path, "CSV report path (default stdout)");

  auto* solve = app.add_subcommand("solve", "Solve an LQCLP problem file");
  std::string problem_path;
  solve->add_option("--problem", problem_path, "Problem file")->required();

  CLI11_PARSE(app, argc, argv);

  if (*train) return run_train(config_name, train_seed, paper_params, out_dir, debug, iterations, algorithm, quiet);
  if (*verify) return run_verify(suite, trials, verify_seed, report_path);
  if (*solve) return run_solve(problem_path);
  return 1;
}
