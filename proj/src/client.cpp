#include "heroes/client.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "heroes/errors.hpp"
#include "heroes/rng.hpp"

namespace heroes {

namespace {

void require_nonempty(const Shard& shard) {
  if (shard.size() == 0) throw DomainError("empty shard");
}

std::vector<double> full_gradient(const MlpModel& model, const Shard& shard) {
  return flatten(backward(model, shard.full()));
}

struct ProbeMoments {
  double sigma2 = 0.0;
  double G2 = 0.0;
};

ProbeMoments probe_moments(const MlpModel& model, const Shard& shard, std::size_t batch_size,
                           std::size_t num_probes, std::uint64_t seed) {
  require_nonempty(shard);
  if (num_probes < 1) throw DomainError("num_probes must be >= 1");
  const std::vector<double> full = full_gradient(model, shard);
  ProbeMoments m;
  for (const auto& rows : probe_batches(shard.size(), batch_size, num_probes, seed)) {
    const std::vector<double> g = flatten(backward(model, shard.batch(rows)));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = g[i] - full[i];
      m.sigma2 += d * d;
      m.G2 += g[i] * g[i];
    }
  }
  m.sigma2 /= static_cast<double>(num_probes);
  m.G2 /= static_cast<double>(num_probes);
  return m;
}

}  // namespace

Batch Shard::batch(std::span<const std::size_t> rows) const {
  if (rows.empty()) throw DomainError("empty batch");
  const std::size_t d = features.cols();
  Batch b;
  b.inputs = Tensor::matrix(rows.size(), d);
  b.labels.reserve(rows.size());
  const bool has_targets = !targets.empty();
  if (has_targets) b.targets = Tensor::matrix(rows.size(), targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= size()) throw DomainError("batch row " + std::to_string(r) + " outside shard");
    for (std::size_t j = 0; j < d; ++j) b.inputs(i, j) = features(r, j);
    b.labels.push_back(labels[r]);
    if (has_targets)
      for (std::size_t j = 0; j < targets.cols(); ++j) b.targets(i, j) = targets(r, j);
  }
  return b;
}

Batch Shard::full() const {
  std::vector<std::size_t> rows(size());
  std::iota(rows.begin(), rows.end(), 0);
  return batch(rows);
}

std::vector<std::size_t> sample_batch(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  if (n == 0) throw DomainError("empty shard");
  if (batch_size == 0) throw DomainError("batch size must be positive");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (batch_size >= n) return idx;
  Rng rng(seed);
  for (std::size_t i = 0; i < batch_size; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(batch_size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::vector<std::size_t>> probe_batches(std::size_t n, std::size_t batch_size, std::size_t num_probes,
                                                    std::uint64_t seed) {
  if (n == 0) throw DomainError("empty shard");
  if (batch_size == 0) throw DomainError("batch size must be positive");
  batch_size = std::min(batch_size, n);
  Rng rng(seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  auto shuffle = [&] {
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  };
  shuffle();
  std::size_t pos = 0;
  std::vector<std::vector<std::size_t>> out;
  out.reserve(num_probes);
  for (std::size_t k = 0; k < num_probes; ++k) {
    if (pos + batch_size > n) {
      shuffle();
      pos = 0;
    }
    std::vector<std::size_t> chunk(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                                   perm.begin() + static_cast<std::ptrdiff_t>(pos + batch_size));
    std::sort(chunk.begin(), chunk.end());
    out.push_back(std::move(chunk));
    pos += batch_size;
  }
  return out;
}

MlpModel sgd_train(MlpModel model, const Shard& shard, double eta, std::size_t batch_size, std::int64_t tau,
                   std::uint64_t seed, std::vector<double>* batch_losses) {
  require_nonempty(shard);
  if (tau < 1) throw DomainError("tau must be >= 1");
  if (batch_losses) batch_losses->clear();
  for (std::int64_t t = 0; t < tau; ++t) {
    const auto rows = sample_batch(shard.size(), batch_size, derive_seed(seed, Stream::kBatches, {std::uint64_t(t)}));
    LossAndGradients lg = loss_and_gradients(model, shard.batch(rows));
    if (batch_losses) batch_losses->push_back(lg.loss);
    model = sgd_step(std::move(model), lg.grads, eta);
  }
  return model;
}

MlpModel compose_model(std::span<const FactorizedLayer> layers, std::span<const Tensor> reduced,
                       std::span<const Tensor> biases, std::size_t width) {
  if (layers.empty()) throw ShapeError("no layers");
  if (reduced.size() != layers.size() || biases.size() != layers.size())
    throw ShapeError("one reduced coefficient and bias per layer required");
  MlpModel m;
  m.input_repeat = width;
  m.output_fold = width;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].shape.kernel != 1) throw ShapeError("the MLP only supports kernel size 1");
    m.weights.push_back(compose(layers[l], reduced[l], width));
    m.biases.push_back(biases[l]);
  }
  m.validate();
  return m;
}

MlpModel local_train(std::span<const FactorizedLayer> layers, std::span<const Tensor> reduced,
                     std::span<const Tensor> biases, std::size_t width, std::int64_t tau, const Shard& shard,
                     double eta, std::size_t batch_size, std::uint64_t seed, std::vector<double>* batch_losses) {
  require_nonempty(shard);
  if (tau < 1) throw DomainError("tau must be >= 1");
  return sgd_train(compose_model(layers, reduced, biases, width), shard, eta, batch_size, tau, seed, batch_losses);
}

double estimate_L(std::span<const double> x_before, std::span<const double> x_after,
                  std::span<const double> g_before, std::span<const double> g_after) {
  if (x_before.size() != x_after.size() || g_before.size() != g_after.size() || x_before.size() != g_before.size())
    throw ShapeError("estimate_L: vector lengths differ");
  double dx = 0.0, dg = 0.0;
  for (std::size_t i = 0; i < x_before.size(); ++i) {
    const double a = x_after[i] - x_before[i];
    const double b = g_after[i] - g_before[i];
    dx += a * a;
    dg += b * b;
  }
  if (dx == 0.0) throw DomainError("estimate_L: models are identical");
  return std::sqrt(dg) / std::sqrt(dx);
}

double estimate_L(const MlpModel& before, const MlpModel& after, const Shard& shard) {
  require_nonempty(shard);
  const auto xb = flatten_parameters(before), xa = flatten_parameters(after);
  const auto gb = full_gradient(before, shard), ga = full_gradient(after, shard);
  return estimate_L(xb, xa, gb, ga);
}

double estimate_sigma2(const MlpModel& model, const Shard& shard, std::size_t batch_size, std::size_t num_probes,
                       std::uint64_t seed) {
  return probe_moments(model, shard, batch_size, num_probes, seed).sigma2;
}

double estimate_G2(const MlpModel& model, const Shard& shard, std::size_t batch_size, std::size_t num_probes,
                   std::uint64_t seed) {
  return probe_moments(model, shard, batch_size, num_probes, seed).G2;
}

Tensor bias_prefix(const Tensor& full, std::size_t width, std::size_t out_channels) {
  const std::size_t n = width * out_channels;
  if (n > full.size()) throw ShapeError("bias prefix longer than the bias");
  return Tensor({n}, std::vector<double>(full.values().begin(), full.values().begin() + static_cast<std::ptrdiff_t>(n)));
}

ClientReport client_round(std::span<const FactorizedLayer> global, std::span<const Tensor> global_biases,
                          const ClientTask& task, const Shard& shard, const Hyperparams& hp) {
  if (task.selections.size() != global.size()) throw DomainError("one block selection per layer required");
  if (global_biases.size() != global.size()) throw ShapeError("one bias per layer required");
  std::vector<Tensor> reduced, biases;
  for (std::size_t l = 0; l < global.size(); ++l) {
    if (task.selections[l].width != task.width) throw DomainError("selection width differs from assigned width");
    reduced.push_back(reduce_coefficient(global[l], task.selections[l]));
    biases.push_back(bias_prefix(global_biases[l], task.width, global[l].shape.out_channels));
  }
  const MlpModel before = compose_model(global, reduced, biases, task.width);
  const MlpModel after = sgd_train(before, shard, hp.eta, hp.batch_size, task.tau, task.seed);

  ClientReport report;
  report.client_id = task.client_id;
  report.width = task.width;
  report.iterations = task.tau;
  if (flatten_parameters(before) != flatten_parameters(after))
    report.estimates.L = estimate_L(before, after, shard);
  const std::uint64_t probe_seed = derive_seed(task.seed, Stream::kProbes);
  const ProbeMoments m = probe_moments(before, shard, hp.batch_size, hp.num_probes, probe_seed);
  report.estimates.sigma2 = m.sigma2;
  report.estimates.G2 = m.G2;

  for (std::size_t l = 0; l < global.size(); ++l) {
    Factors f = decompose_aligned(after.weights[l], global[l].shape, task.width, global[l].shape.rank,
                                  global[l].basis);
    report.bases.push_back(std::move(f.basis));
    report.coefficients.push_back(std::move(f.coefficient));
    report.biases.push_back(after.biases[l]);
  }
  return report;
}

}  // namespace heroes
