#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace heroes {

struct ClientProfile {
  std::size_t id = 0;
  double compute_mean = 1.0;  // s per reference iteration
  double compute_std = 0.0;
  double upload_lo = 1e6;  // bit/s
  double upload_hi = 5e6;
  double download_lo = 10e6;
  double download_hi = 20e6;

  void validate() const;
};

struct EnvSample {
  double seconds_per_ref_iter = 0.0;  // Gaussian draw, truncated at 10% of the mean
  double q = 0.0;                     // FLOP/s = reference FLOPs / seconds_per_ref_iter
  double b_up = 0.0;                  // bit/s
  double b_down = 0.0;                // bit/s
};

// Client n gets tier n mod tiers; std = std_frac * tier mean. Bandwidths in Mb/s.
std::vector<ClientProfile> default_profiles(std::size_t clients, const std::vector<double>& tier_means,
                                            double std_frac, double up_lo_mbps, double up_hi_mbps,
                                            double down_lo_mbps, double down_hi_mbps);

// K distinct ids from [0, N), ascending; deterministic in (seed, round).
std::vector<std::size_t> sample_participants(std::size_t n, std::size_t k, std::uint64_t seed, std::uint64_t round);

// Deterministic in (seed, profile.id, round).
EnvSample sample_environment(const ClientProfile& profile, std::uint64_t seed, std::uint64_t round,
                             double reference_flops);

}  // namespace heroes
