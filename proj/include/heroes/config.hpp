#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "heroes/scheduling.hpp"

namespace heroes {

enum class Scheme { kHeroes, kFedAvg, kAdp, kHeteroFl, kFlanc };

std::string scheme_name(Scheme s);
Scheme parse_scheme(const std::string& tag);  // throws ConfigError

enum class BlockRule { kLeastTrained, kRandom };

struct ModelSpec {
  std::vector<std::size_t> hidden{16};  // hidden layer widths (per width unit)
  std::size_t max_width = 4;             // P
  std::size_t rank = 8;                  // R
  double init_scale = 1.0;               // multiplies the coefficient init std
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct DataSpec {
  std::size_t classes = 5;
  std::size_t per_class = 400;
  std::size_t dim = 16;
  double spread = 1.0;
  friend bool operator==(const DataSpec&, const DataSpec&) = default;
};

struct PartitionConfig {
  double gamma = 40.0;
  std::size_t shard_size = 0;  // 0 = largest that fits
  friend bool operator==(const PartitionConfig&, const PartitionConfig&) = default;
};

struct TrainConfig {
  double eta = 0.05;
  std::size_t batch_size = 16;
  std::int64_t tau0 = 5;
  std::size_t num_probes = 8;
  double adp_round_budget = 10.0;  // s
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EnvConfig {
  std::vector<double> tier_means{0.5, 1.0, 2.0, 4.0};  // s per reference iteration
  double tier_std_frac = 0.1;
  double upload_min_mbps = 1.0;
  double upload_max_mbps = 5.0;
  double download_min_mbps = 10.0;
  double download_max_mbps = 20.0;
  double planner_noise = 0.0;  // log-normal sigma applied to planner cost inputs
  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

struct ExperimentConfig {
  Scheme scheme = Scheme::kHeroes;
  std::uint64_t seed = 0;
  std::size_t clients = 20;       // N
  std::size_t participants = 5;   // K
  double target_accuracy = 0.85;
  std::size_t max_rounds = 10000;
  bool stop_at_target = true;
  BlockRule block_selection = BlockRule::kLeastTrained;
  ModelSpec model;
  DataSpec data;
  PartitionConfig partition;
  SchedulerConfig scheduler;
  double beta2 = 0.0;
  TrainConfig train;
  EnvConfig env;
  std::string output_dir = "out";

  // Throws ConfigError naming the offending key.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Grammar, one statement per line:
//   [section]            following keys are read as section.key
//   key = value          scalars, or comma-separated lists
//   # comment            also allowed after a value
// Required: experiment.scheme, experiment.seed. Unknown keys, duplicate keys,
// malformed values and missing required keys raise ConfigError with the key
// and line number.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

// Every key with its effective value, in a form parse_config_text accepts.
std::string emit_config(const ExperimentConfig& cfg);

// (full key, value text) for every key, in emission order.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg);

}  // namespace heroes
