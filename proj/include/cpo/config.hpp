#pragma once

// Run configuration: a flat sectioned key-value text format plus named
// presets. See README.md for the full key list.

#include "cpo/algorithms.hpp"
#include "cpo/environments.hpp"
#include "cpo/estimation.hpp"
#include "cpo/shaping.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cpo {

enum class Algorithm { cpo, trpo, pdo, fpo };
std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

struct RunConfig {
  Algorithm algorithm = Algorithm::cpo;
  std::string environment = "point_gather";  // point_circle | point_gather
  CircleParams circle = CircleParams::desk();
  GatherParams gather = GatherParams::desk();

  std::vector<int> policy_hidden{16, 8};
  double log_std_init = -0.5;

  EstimatorConfig estimation;
  TrustRegionConfig trust_region;
  ShapingConfig shaping;
  double cost_limit = 0.1;
  double pdo_alpha = 0.01;
  double pdo_nu_init = 0.0;
  double fpo_lambda = 1.0;

  int batch_size = 4000;
  int max_path_length = 0;  // 0: the environment's horizon
  int iterations = 150;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  int checkpoint_every = 10;
  bool debug_subproblems = false;

  /// Rollout cut-off actually used.
  int path_length() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

std::vector<std::string> preset_names();
/// Throws std::invalid_argument for unknown names.
RunConfig preset(const std::string& name);

/// Applies "key = value" lines grouped under [section] headers on top of
/// `base`. A `preset` key under [run] restarts from that preset. Throws
/// std::invalid_argument with the line number on malformed input.
RunConfig parse_config(std::istream& in, const RunConfig& base = RunConfig{});
/// A preset name or a path to a config file.
RunConfig load_config(const std::string& file_or_preset);

/// Environment values from the original experiments: Circle d = 15,
/// x_lim = 2.5, horizon 65; Gather horizon 15 and cost limit 0.1.
void apply_paper_params(RunConfig& config);

/// Serializes every field in the format parse_config reads.
std::string to_config_text(const RunConfig& config);

}  // namespace cpo
