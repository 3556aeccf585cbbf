#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "heroes/client.hpp"
#include "heroes/errors.hpp"
#include "heroes/rng.hpp"
#include "oracles.hpp"

using namespace heroes;

namespace {

Shard random_shard(std::size_t n, std::size_t d, std::size_t classes, std::uint64_t seed) {
  const Batch b = oracle::random_batch(n, d, classes, seed);
  return {b.inputs, b.labels, {}};
}

struct Factored {
  std::vector<FactorizedLayer> layers;
  std::vector<Tensor> biases;  // full width
};

Factored small_factored(std::uint64_t seed) {
  Factored f;
  f.layers.push_back(make_factorized_layer({1, 3, 4, 2, 2}, seed));
  f.layers.push_back(make_factorized_layer({1, 4, 2, 2, 2}, seed + 1));
  f.biases = {Tensor({8}, 0.1), Tensor({4}, -0.05)};
  return f;
}

std::vector<BlockSelection> selections(std::size_t width) {
  return {select_blocks(BlockLedger(4), width), select_blocks(BlockLedger(4), width)};
}

std::vector<double> gradient(const MlpModel& m, const Batch& b) { return flatten(backward(m, b)); }

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

TEST(SampleBatch, SortedDistinctAndComplete) {
  const auto rows = sample_batch(50, 10, 3);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end()));
  EXPECT_EQ(std::adjacent_find(rows.begin(), rows.end()), rows.end());
  EXPECT_EQ(sample_batch(5, 9, 1), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(sample_batch(50, 10, 3), rows);
  EXPECT_THROW(sample_batch(0, 1, 1), DomainError);
}

TEST(ProbeBatches, ExhaustivePartition) {
  const auto probes = probe_batches(12, 3, 4, 9);
  std::vector<std::size_t> all;
  for (const auto& p : probes) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(all[i], i);
}

TEST(LocalTrain, ZeroRateReturnsComposedModel) {
  const Factored f = small_factored(1);
  const Shard shard = random_shard(20, 3, 2, 2);
  std::vector<Tensor> red, bias;
  for (std::size_t l = 0; l < 2; ++l) {
    red.push_back(reduce_coefficient(f.layers[l], selections(2)[l]));
    bias.push_back(bias_prefix(f.biases[l], 2, f.layers[l].shape.out_channels));
  }
  const MlpModel m = local_train(f.layers, red, bias, 2, 1, shard, 0.0, 4, 7);
  EXPECT_EQ(m, compose_model(f.layers, red, bias, 2));
  EXPECT_THROW(local_train(f.layers, red, bias, 2, 0, shard, 0.1, 4, 7), DomainError);
  EXPECT_THROW(local_train(f.layers, red, bias, 2, 1, Shard{}, 0.1, 4, 7), DomainError);
}

TEST(LocalTrain, SeparableLossDecreases) {
  Shard shard;
  shard.features = Tensor::matrix(40, 3);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (std::size_t i = 0; i < 40; ++i) {
    const int y = static_cast<int>(i % 2);
    shard.labels.push_back(y);
    for (std::size_t j = 0; j < 3; ++j) shard.features(i, j) = (y ? 2.0 : -2.0) + nd(gen);
  }
  const Factored f = small_factored(3);
  std::vector<Tensor> red, bias;
  for (std::size_t l = 0; l < 2; ++l) {
    red.push_back(reduce_coefficient(f.layers[l], selections(1)[l]));
    bias.push_back(bias_prefix(f.biases[l], 1, f.layers[l].shape.out_channels));
  }
  std::vector<double> losses;
  const MlpModel start = compose_model(f.layers, red, bias, 1);
  const MlpModel end = local_train(f.layers, red, bias, 1, 200, shard, 0.1, 40, 11, &losses);
  ASSERT_EQ(losses.size(), 200u);
  EXPECT_LT(losses.back(), losses.front());
  EXPECT_LT(forward(end, shard.full()).loss, forward(start, shard.full()).loss);
}

TEST(LocalTrain, Deterministic) {
  const Factored f = small_factored(4);
  const Shard shard = random_shard(30, 3, 2, 5);
  std::vector<Tensor> red, bias;
  for (std::size_t l = 0; l < 2; ++l) {
    red.push_back(reduce_coefficient(f.layers[l], selections(2)[l]));
    bias.push_back(bias_prefix(f.biases[l], 2, f.layers[l].shape.out_channels));
  }
  EXPECT_EQ(local_train(f.layers, red, bias, 2, 7, shard, 0.05, 8, 42),
            local_train(f.layers, red, bias, 2, 7, shard, 0.05, 8, 42));
}

TEST(EstimateL, QuadraticCurvatureTwo) {
  // f(x) = 0.5 * 2 * ||x||^2 has gradient 2 x.
  const std::vector<double> a{1.0, -2.0, 0.5}, b{0.3, 4.0, -1.0};
  std::vector<double> ga, gb;
  for (double x : a) ga.push_back(2 * x);
  for (double x : b) gb.push_back(2 * x);
  EXPECT_DOUBLE_EQ(estimate_L(a, b, ga, gb), 2.0);
}

TEST(EstimateL, LinearLossIsZero) {
  const std::vector<double> a{1.0, 2.0}, b{3.0, -1.0}, g{0.7, -0.2};
  EXPECT_EQ(estimate_L(a, b, g, g), 0.0);
  EXPECT_THROW(estimate_L(a, a, g, g), DomainError);
}

TEST(EstimateL, ModelPairMatchesNormOracle) {
  const Shard shard = random_shard(12, 4, 3, 8);
  const MlpModel a = oracle::random_model({4, 5, 3}, 20), b = oracle::random_model({4, 5, 3}, 21);
  const auto ga = gradient(a, shard.full()), gb = gradient(b, shard.full());
  const double want = std::sqrt(sq_dist(ga, gb)) / std::sqrt(sq_dist(flatten_parameters(a), flatten_parameters(b)));
  EXPECT_NEAR(estimate_L(a, b, shard), want, 1e-10);
}

TEST(Moments, FullBatchHasNoVariance) {
  const Shard shard = random_shard(10, 4, 3, 1);
  const MlpModel m = oracle::random_model({4, 6, 3}, 2);
  EXPECT_NEAR(estimate_sigma2(m, shard, 10, 5, 3), 0.0, 1e-24);
  EXPECT_NEAR(estimate_sigma2(m, shard, 100, 5, 3), 0.0, 1e-24);
}

TEST(Moments, IdenticalSamplesHaveNoVariance) {
  Shard shard = random_shard(1, 4, 3, 4);
  shard.features = Tensor::from_rows({{0.1, 0.2, 0.3, 0.4}, {0.1, 0.2, 0.3, 0.4}});
  shard.labels = {1, 1};
  const MlpModel m = oracle::random_model({4, 6, 3}, 5);
  EXPECT_NEAR(estimate_sigma2(m, shard, 1, 6, 7), 0.0, 1e-24);
}

TEST(Moments, ExhaustiveSingleSampleProbes) {
  const Shard shard = random_shard(4, 3, 2, 12);
  const MlpModel m = oracle::random_model({3, 5, 2}, 13);
  const auto full = gradient(m, shard.full());
  double sig = 0.0, g2 = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::vector<std::size_t> row{i};
    const auto g = gradient(m, shard.batch(row));
    sig += sq_dist(g, full) / 4.0;
    g2 += sq_dist(g, std::vector<double>(g.size(), 0.0)) / 4.0;
  }
  EXPECT_NEAR(estimate_sigma2(m, shard, 1, 4, 99), sig, 1e-12);
  EXPECT_NEAR(estimate_G2(m, shard, 1, 4, 99), g2, 1e-12);
}

TEST(Moments, SingleSampleAndStationaryPoint) {
  const Shard one = random_shard(1, 3, 2, 14);
  const MlpModel m = oracle::random_model({3, 4, 2}, 15);
  const auto g = gradient(m, one.full());
  EXPECT_NEAR(estimate_G2(m, one, 1, 3, 1), sq_dist(g, std::vector<double>(g.size(), 0.0)), 1e-14);

  MlpModel zero = oracle::random_model({3, 2}, 16);
  zero.head = Head::kSquaredError;
  for (double& x : zero.weights[0].storage()) x = 0.0;
  for (double& x : zero.biases[0].storage()) x = 0.0;
  Shard fit = random_shard(6, 3, 2, 17);
  fit.targets = Tensor::matrix(6, 2);
  EXPECT_EQ(estimate_G2(zero, fit, 2, 4, 1), 0.0);
  EXPECT_THROW(estimate_G2(zero, fit, 2, 0, 1), DomainError);
}

TEST(ClientRound, UntrainedRoundtripAndShapes) {
  const Factored f = small_factored(30);
  const Shard shard = random_shard(16, 3, 2, 31);
  ClientTask task{3, 2, selections(2), 1, 77};
  Hyperparams hp{0.0, 4, 4};
  const ClientReport r = client_round(f.layers, f.biases, task, shard, hp);
  ASSERT_EQ(r.bases.size(), 2u);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_FALSE(r.estimates.L.has_value());
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& s = f.layers[l].shape;
    EXPECT_EQ(r.bases[l].shape(), (std::vector<std::size_t>{s.basis_rows(), s.rank}));
    EXPECT_EQ(r.coefficients[l].shape(), (std::vector<std::size_t>{s.rank, 4 * s.out_channels}));
    const Tensor before = matmul(f.layers[l].basis, reduce_coefficient(f.layers[l], task.selections[l]));
    EXPECT_LE(frobenius_norm(matmul(r.bases[l], r.coefficients[l]) - before), 1e-8);
    EXPECT_EQ(r.biases[l], bias_prefix(f.biases[l], 2, s.out_channels));
  }
}

TEST(ClientRound, TrainedReportIsDeterministic) {
  const Factored f = small_factored(40);
  const Shard shard = random_shard(24, 3, 2, 41);
  ClientTask task{1, 1, selections(1), 6, 1234};
  Hyperparams hp{0.1, 8, 5};
  const ClientReport a = client_round(f.layers, f.biases, task, shard, hp);
  const ClientReport b = client_round(f.layers, f.biases, task, shard, hp);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.iterations, 6);
  ASSERT_TRUE(a.estimates.L.has_value());
  EXPECT_GT(*a.estimates.L, 0.0);
  EXPECT_GE(a.estimates.sigma2, 0.0);
  EXPECT_GT(a.estimates.G2, 0.0);
}

TEST(ClientRound, RejectsMismatchedSelections) {
  const Factored f = small_factored(50);
  const Shard shard = random_shard(8, 3, 2, 51);
  ClientTask task{0, 2, selections(1), 1, 1};
  EXPECT_THROW(client_round(f.layers, f.biases, task, shard, Hyperparams{}), DomainError);
}
