#include "heroes/environment.hpp"

#include <algorithm>
#include <numeric>

#include "heroes/errors.hpp"
#include "heroes/rng.hpp"

namespace heroes {

void ClientProfile::validate() const {
  if (!(compute_mean > 0.0) || compute_std < 0.0) throw DomainError("profile: compute mean must be positive");
  if (!(upload_lo > 0.0) || upload_hi < upload_lo) throw DomainError("profile: bad upload range");
  if (download_lo < upload_hi || download_hi < download_lo) throw DomainError("profile: bad download range");
}

std::vector<ClientProfile> default_profiles(std::size_t clients, const std::vector<double>& tier_means,
                                            double std_frac, double up_lo_mbps, double up_hi_mbps,
                                            double down_lo_mbps, double down_hi_mbps) {
  if (tier_means.empty()) throw DomainError("no compute tiers");
  std::vector<ClientProfile> out;
  for (std::size_t n = 0; n < clients; ++n) {
    ClientProfile p;
    p.id = n;
    p.compute_mean = tier_means[n % tier_means.size()];
    p.compute_std = std_frac * p.compute_mean;
    p.upload_lo = up_lo_mbps * 1e6;
    p.upload_hi = up_hi_mbps * 1e6;
    p.download_lo = down_lo_mbps * 1e6;
    p.download_hi = down_hi_mbps * 1e6;
    p.validate();
    out.push_back(p);
  }
  return out;
}

std::vector<std::size_t> sample_participants(std::size_t n, std::size_t k, std::uint64_t seed, std::uint64_t round) {
  if (k < 1 || k > n) throw DomainError("participants must lie in [1, N]");
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(seed, Stream::kParticipants, {round}));
  for (std::size_t i = 0; i < k; ++i) std::swap(ids[i], ids[i + rng.below(n - i)]);
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

EnvSample sample_environment(const ClientProfile& profile, std::uint64_t seed, std::uint64_t round,
                             double reference_flops) {
  profile.validate();
  if (!(reference_flops > 0.0)) throw DomainError("reference FLOPs must be positive");
  Rng rng(derive_seed(seed, Stream::kEnvironment, {profile.id, round}));
  EnvSample s;
  const double t = profile.compute_std > 0.0 ? rng.normal(profile.compute_mean, profile.compute_std)
                                              : profile.compute_mean;
  s.seconds_per_ref_iter = std::max(t, 0.1 * profile.compute_mean);
  s.q = reference_flops / s.seconds_per_ref_iter;
  s.b_up = rng.uniform(profile.upload_lo, profile.upload_hi);
  s.b_down = rng.uniform(profile.download_lo, profile.download_hi);
  return s;
}

}  // namespace heroes
