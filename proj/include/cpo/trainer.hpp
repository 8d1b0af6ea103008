#pragma once

// Training loop shared by all algorithms: sample, estimate, update, record.

#include "cpo/algorithms.hpp"
#include "cpo/checkpoint.hpp"
#include "cpo/config.hpp"
#include "cpo/environments.hpp"
#include "cpo/estimation.hpp"
#include "cpo/policy.hpp"
#include "cpo/shaping.hpp"

#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpo {

/// Column order of metrics.csv (schema version 1).
inline constexpr const char* kMetricsHeader =
    "iteration,steps,mean_return,mean_cost_return,mean_shaped_cost_return,c_estimate,lambda_star,nu_star,"
    "case_tag,step_kind,kl,backtracks,accepted,predictor_loss";
inline constexpr const char* kSubproblemHeader = "iteration,q,r,s,c,delta,case_tag,lambda_star,nu_star";

struct IterationMetrics {
  int iteration = 0;
  long long steps = 0;              // cumulative environment steps
  double mean_return = 0.0;         // undiscounted, per episode
  double mean_cost_return = 0.0;    // discounted raw cost
  double mean_shaped_cost_return = 0.0;
  double c_estimate = 0.0;          // constrained return estimate minus the limit
  double lambda_star = 0.0;
  double nu_star = 0.0;
  std::string case_tag;
  std::string step_kind;
  double kl = 0.0;
  int backtracks = 0;
  bool accepted = false;
  double predictor_loss = 0.0;
  LqclpProblem subproblem;
};

std::string format_metrics_row(const IterationMetrics& m);
std::string format_subproblem_row(const IterationMetrics& m);

std::unique_ptr<Environment> make_environment(const RunConfig& config);

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, IterationMetrics row) : std::runtime_error(what), row_(std::move(row)) {}
  const IterationMetrics& row() const { return row_; }

 private:
  IterationMetrics row_;
};

class Trainer {
 public:
  explicit Trainer(RunConfig config);

  /// One sample-estimate-update cycle. Throws TrainingError on non-finite values.
  IterationMetrics iterate();

  const ParamPolicy& policy() const { return policy_; }
  const RunConfig& config() const { return config_; }
  int iteration() const { return iteration_; }
  const DualState& dual() const { return dual_; }
  Checkpoint checkpoint() const;

 private:
  RunConfig config_;
  std::unique_ptr<Environment> env_;
  ParamPolicy policy_;
  ValueFunction reward_values_;
  ValueFunction cost_values_;
  FailurePredictor predictor_;
  DualState dual_;
  int iteration_ = 0;
  long long steps_ = 0;
};

/// Runs config.iterations iterations and writes metrics.csv, config.txt,
/// checkpoint_NNNN.txt every checkpoint_every iterations, checkpoint_final.txt
/// and, when debugging, subproblems.csv into config.output_dir.
std::vector<IterationMetrics> train(const RunConfig& config, std::ostream* log = nullptr);

}  // namespace cpo
