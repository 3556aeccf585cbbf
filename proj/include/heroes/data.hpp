#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "heroes/client.hpp"
#include "heroes/tensor.hpp"

namespace heroes {

struct Dataset {
  Tensor features;          // samples x dim
  std::vector<int> labels;  // samples, in [0, classes)
  std::size_t classes = 0;
  std::vector<std::uint32_t> train;  // ascending sample indices
  std::vector<std::uint32_t> test;   // ascending, disjoint from train

  void validate() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// C Gaussian clusters: centers ~ N(0, 1) per coordinate, samples = center +
// spread * N(0, 1). Samples are stored class by class. Each class is split
// 90/10 into train/test (test count rounded to nearest).
Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread, std::uint64_t seed);

struct PartitionSpec {
  double gamma = 100.0;  // dominant-class share in percent, [100 / C, 100]
  std::size_t clients = 1;
  std::uint64_t seed = 0;
  std::size_t shard_size = 0;  // 0 picks the largest size that fits
};

struct Partition {
  std::vector<std::vector<std::uint32_t>> shards;  // dataset sample indices per client
  std::size_t shard_size = 0;
  std::size_t discarded = 0;  // training samples assigned to no client
};

// Per-class sample counts of one shard. The dominant class gets gamma % of
// shard_size and the other classes share the rest evenly; fractional counts
// are rounded by largest remainder, ties going to dominant, dominant + 1,
// dominant - 1, dominant + 2, ... (mod C).
std::vector<std::size_t> class_quota(std::size_t classes, std::size_t dominant, double gamma,
                                     std::size_t shard_size);

// Client n's dominant class is n mod C. Throws DomainError if a class runs
// out of training samples.
Partition partition_noniid(const Dataset& ds, const PartitionSpec& spec);

Shard make_shard(const Dataset& ds, std::span<const std::uint32_t> rows);

// Binary layout, all little-endian:
//   "HRDS" | u32 version (1) | u32 samples | u32 dim | u32 classes |
//   u32 n_train | u32 n_test | f64 features[samples * dim] (row-major) |
//   i32 labels[samples] | u32 train[n_train] | u32 test[n_test]
std::vector<std::uint8_t> serialize_dataset(const Dataset& ds);
Dataset deserialize_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace heroes
