#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "heroes/client.hpp"
#include "heroes/composition.hpp"
#include "heroes/config.hpp"
#include "heroes/data.hpp"
#include "heroes/environment.hpp"
#include "heroes/mlp.hpp"
#include "heroes/scheduling.hpp"

namespace heroes {

constexpr double kBitsPerParameter = 64.0;

// Layer shapes of the composed MLP: features -> hidden... -> classes.
std::vector<LayerShape> layer_shapes(const ExperimentConfig& cfg);

// FLOPs of one local iteration of a width-p composed model (composition plus
// forward/backward on a batch).
double factorized_iteration_flops(const std::vector<LayerShape>& shapes, std::size_t width, std::size_t batch);
// FLOPs of one iteration of a dense model with the given weight sizes.
double dense_iteration_flops(const std::vector<std::pair<std::size_t, std::size_t>>& weight_dims, std::size_t batch);
// Dense full-width model: the reference for compute speed.
double reference_iteration_flops(const std::vector<LayerShape>& shapes, std::size_t batch);

// Parameters sent in one direction by a width-p client: basis, reduced
// coefficient and bias prefix of every layer.
std::size_t factorized_payload_params(const std::vector<LayerShape>& shapes, std::size_t width);
std::size_t dense_payload_params(const MlpModel& model);

// k^2 I O P^2 / (k^2 I + p^2 O): basis plus reduced coefficient is smaller
// than the dense full-width weight iff R is below this.
double rank_payload_threshold(const LayerShape& shape, std::size_t width);

// HeteroFL width ratio 2^-q for the client's compute quartile q (by profile
// mean, fastest first, ties to the smaller id).
double heterofl_ratio(const std::vector<ClientProfile>& profiles, std::size_t client_id);

// Top-left slice of every layer of a full-width dense model at ratio r.
// The first layer keeps every input row and the last every output column.
MlpModel heterofl_submodel(const MlpModel& full, double ratio);

// Entry-wise mean of top-left-aligned sub-tensors over the contributors
// covering each entry; other entries keep their value.
void aggregate_regions(Tensor& global, const std::vector<Tensor>& parts);

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  std::vector<std::size_t> participants;
  std::vector<double> widths;  // width multiplier; heterofl reports ratio * P
  std::vector<std::int64_t> taus;
  std::vector<double> client_times;  // realized
  double round_time = 0.0;
  double avg_wait = 0.0;
  double planned_wait = 0.0;
  std::vector<double> planned_times;  // heroes: tau mu + nu under the planner's inputs
  double rounding_slack = 0.0;        // heroes: max mu over clients with no integer tau in the waiting window
  double block_var = 0.0;
  double sim_time = 0.0;          // cumulative
  std::uint64_t traffic_bits = 0; // cumulative
  double test_acc = 0.0;
  double global_loss = 0.0;
  bool bootstrap = false;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct SimState {
  ExperimentConfig cfg;
  Dataset data;
  Partition partition;
  std::vector<Shard> shards;
  Shard train_set;
  Shard test_set;
  std::vector<ClientProfile> profiles;
  std::vector<LayerShape> shapes;
  double reference_flops = 0.0;

  // heroes and flanc: global factors (flanc uses only the bases here)
  std::vector<FactorizedLayer> layers;
  std::vector<Tensor> biases;  // full width, P O per layer
  std::vector<BlockLedger> ledgers;
  // flanc: width class -> per-layer coefficient (R x p^2 O) and ledgers
  std::map<std::size_t, std::vector<Tensor>> flanc_coefficients;
  std::map<std::size_t, std::vector<BlockLedger>> flanc_ledgers;
  // fedavg, adp, heterofl
  MlpModel dense;

  std::optional<double> L;
  double sigma2 = 0.0;
  double G2 = 0.0;
  bool have_estimates = false;

  double global_loss = 0.0;
  std::size_t round = 0;
  double clock = 0.0;
  std::uint64_t traffic_bits = 0;
  std::size_t variance_violations = 0;
};

SimState make_state(const ExperimentConfig& cfg);

// The full-width global model of the configured scheme.
MlpModel global_model(const SimState& state);

RoundRecord run_round(SimState& state);
RoundRecord run_heroes_round(SimState& state);
RoundRecord baseline_fedavg(SimState& state);
RoundRecord baseline_adp(SimState& state);
RoundRecord baseline_heterofl(SimState& state);
RoundRecord baseline_flanc(SimState& state);

// Concatenated per-class ledgers of the flanc baseline, per layer.
std::vector<BlockLedger> flanc_combined_ledgers(const SimState& state);

struct Summary {
  std::string scheme;
  std::uint64_t seed = 0;
  std::size_t rounds = 0;
  double sim_time = 0.0;
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  std::optional<double> time_to_target;
  std::optional<std::size_t> rounds_to_target;
  std::optional<std::uint64_t> traffic_bits_to_target;
  std::uint64_t traffic_bits = 0;
  double mean_wait = 0.0;
  double final_block_var = 0.0;
  std::size_t variance_violations = 0;
  std::size_t shard_size = 0;
  std::size_t discarded = 0;
};

struct ExperimentResult {
  std::vector<RoundRecord> records;
  Summary summary;
};

// Runs rounds while the simulated clock is below T_max, stopping early at
// max_rounds or (if enabled) once the target accuracy is reached.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

Summary summarize(const SimState& state, const std::vector<RoundRecord>& records);

// Fixed header: round,sim_time_s,test_acc,global_loss,avg_wait_s,traffic_bytes_cum,block_var
std::string metrics_csv(const std::vector<RoundRecord>& records);
std::string summary_json(const Summary& s, const ExperimentConfig& cfg);

}  // namespace heroes
