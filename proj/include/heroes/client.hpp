#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "heroes/composition.hpp"
#include "heroes/mlp.hpp"

namespace heroes {

// A client's local data. `targets` is only needed by the squared-error head.
struct Shard {
  Tensor features;          // samples x features
  std::vector<int> labels;  // samples
  Tensor targets;           // samples x outputs, or empty

  std::size_t size() const { return labels.size(); }
  Batch batch(std::span<const std::size_t> rows) const;
  Batch full() const;
};

// Sorted row indices of `batch` samples drawn without replacement.
// batch_size >= n returns every row.
std::vector<std::size_t> sample_batch(std::size_t n, std::size_t batch_size, std::uint64_t seed);

// Probe batches for the gradient-moment estimators: the shard is shuffled
// and cut into consecutive chunks, reshuffling whenever it runs out, so
// num_probes * batch_size == n visits every sample exactly once. Each chunk
// is sorted.
std::vector<std::vector<std::size_t>> probe_batches(std::size_t n, std::size_t batch_size, std::size_t num_probes,
                                                    std::uint64_t seed);

// tau plain SGD steps on seeded mini-batches. If `batch_losses` is given it
// receives the loss of every step's batch before the update.
MlpModel sgd_train(MlpModel model, const Shard& shard, double eta, std::size_t batch_size, std::int64_t tau,
                   std::uint64_t seed, std::vector<double>* batch_losses = nullptr);

// Width-p model from the layers' bases and the given reduced coefficients.
// Biases are the width-p prefixes (length p O per layer).
MlpModel compose_model(std::span<const FactorizedLayer> layers, std::span<const Tensor> reduced,
                       std::span<const Tensor> biases, std::size_t width);

MlpModel local_train(std::span<const FactorizedLayer> layers, std::span<const Tensor> reduced,
                     std::span<const Tensor> biases, std::size_t width, std::int64_t tau, const Shard& shard,
                     double eta, std::size_t batch_size, std::uint64_t seed,
                     std::vector<double>* batch_losses = nullptr);

// ||g_after - g_before|| / ||x_after - x_before|| over flattened vectors.
// Throws DomainError if the parameter vectors are identical.
double estimate_L(std::span<const double> x_before, std::span<const double> x_after,
                  std::span<const double> g_before, std::span<const double> g_after);
// Same, with full-shard gradients computed here.
double estimate_L(const MlpModel& before, const MlpModel& after, const Shard& shard);

// Mean over probe batches of ||g_batch - g_full||^2.
double estimate_sigma2(const MlpModel& model, const Shard& shard, std::size_t batch_size, std::size_t num_probes,
                       std::uint64_t seed);
// Mean over probe batches of ||g_batch||^2.
double estimate_G2(const MlpModel& model, const Shard& shard, std::size_t batch_size, std::size_t num_probes,
                   std::uint64_t seed);

struct SmoothnessEstimates {
  std::optional<double> L;  // empty when the model did not move
  double sigma2 = 0.0;
  double G2 = 0.0;
};

struct ClientTask {
  std::size_t client_id = 0;
  std::size_t width = 1;
  std::vector<BlockSelection> selections;  // one per layer
  std::int64_t tau = 1;
  std::uint64_t seed = 0;
};

struct Hyperparams {
  double eta = 0.05;
  std::size_t batch_size = 16;
  std::size_t num_probes = 8;
};

struct ClientReport {
  std::size_t client_id = 0;
  std::size_t width = 1;
  std::vector<Tensor> bases;         // per layer, k^2 I x R
  std::vector<Tensor> coefficients;  // per layer, R x p^2 O
  std::vector<Tensor> biases;        // per layer, p O
  SmoothnessEstimates estimates;
  std::int64_t iterations = 0;

  friend bool operator==(const ClientReport& a, const ClientReport& b) {
    return a.client_id == b.client_id && a.width == b.width && a.bases == b.bases &&
           a.coefficients == b.coefficients && a.biases == b.biases && a.estimates.L == b.estimates.L &&
           a.estimates.sigma2 == b.estimates.sigma2 && a.estimates.G2 == b.estimates.G2 &&
           a.iterations == b.iterations;
  }
};

// Width-p prefix of a full-width bias.
Tensor bias_prefix(const Tensor& full, std::size_t width, std::size_t out_channels);

// One client round: reduce and compose the global factors, train tau steps,
// estimate L, sigma^2 and G^2, decompose each trained weight at the layer's
// rank (basis aligned to the downloaded one) and report.
ClientReport client_round(std::span<const FactorizedLayer> global, std::span<const Tensor> global_biases,
                          const ClientTask& task, const Shard& shard, const Hyperparams& hp);

}  // namespace heroes
