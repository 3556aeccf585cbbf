#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "heroes/composition.hpp"

namespace heroes {

// ---- cost model ------------------------------------------------------------

struct CostInputs {
  double flops_per_iter = 0.0;  // FLOPs of one local iteration at the assigned width
  double q = 0.0;               // compute speed, FLOP/s
  double upload_bits = 0.0;     // size of the uploaded basis + reduced coefficient
  double b = 0.0;               // upload bandwidth, bit/s
};

double iter_time(const CostInputs& c);   // flops_per_iter / q
double comm_time(const CostInputs& c);   // upload_bits / b
double round_time(std::span<const double> client_times);   // slowest client
double avg_waiting(std::span<const double> client_times);  // mean idle time before aggregation
double block_variance(std::span<const std::int64_t> counts);  // population variance

// ---- convergence bound -----------------------------------------------------

struct BoundParams {
  double F0 = 0.0;     // current global loss
  double eta = 0.0;    // learning rate
  double L = 0.0;      // smoothness
  double G2 = 0.0;     // stochastic-gradient second moment bound
  double sigma2 = 0.0; // stochastic-gradient variance bound
  double beta2 = 0.0;  // bound on the coefficient-reduction error

  void validate() const;
};

// 4 F0 / (H eta tau) + L eta tau (G2 + 18 sigma2) / 3 + 6 L^2 beta2
double conv_bound(const BoundParams& bp, std::int64_t rounds, double tau);

// Minimiser of conv_bound over tau: sqrt(12 F0 / (eta^2 H L (G2 + 18 sigma2))).
double tau_star(const BoundParams& bp, std::int64_t rounds);

// H (tau_star(H) mu + nu): total time if every round looks like this one.
double completion_estimate(const BoundParams& bp, std::int64_t rounds, double mu, double nu);

// ---- planner configuration ---------------------------------------------------

struct SchedulerConfig {
  double rho = 2.0;         // waiting-time threshold, s
  double delta = 1e12;      // block-variance threshold (monitored, not enforced)
  double mu_max = 1.5;      // max per-iteration time, s
  std::size_t max_width = 4;  // P
  double t_max = 3000.0;    // total simulated time budget, s
  // Loss-bound target. The round-count search only considers H whose bound
  // conv_bound(H, tau_star(H)) is at most epsilon.
  double epsilon = 1e12;
  std::int64_t h_search_max = 512;
  std::int64_t tau_cap = 64;  // upper clamp on any assigned tau

  void validate() const;
  friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

// Result of minimising completion_estimate over integer H.
struct HorizonChoice {
  std::int64_t rounds = 1;
  double tau = 0.0;  // tau_star at `rounds`, real-valued
  double total_time = 0.0;
  bool feasible = false;  // some H in range met the epsilon bound
};

// Exhaustive scan over H in [1, h_search_max]. Among H meeting the epsilon
// bound, the one with least completion estimate (ties: smaller H). If none
// meet it, the H with the smallest bound.
HorizonChoice best_horizon(const BoundParams& bp, double mu, double nu, const SchedulerConfig& cfg);

// Largest p in [1, P] with mu(p) <= mu_max; 1 if none. mu_by_width[p-1] = mu(p).
std::size_t assign_width(std::span<const double> mu_by_width, double mu_max);

struct FastestCandidate {
  std::size_t client_id = 0;
  double mu = 0.0;
  double nu = 0.0;
  HorizonChoice horizon;
};

struct FastestPick {
  std::size_t client_id = 0;
  std::int64_t rounds = 1;
  std::int64_t tau = 1;
  double round_time = 0.0;  // tau mu + nu of the picked client
};

// argmin of total completion estimate, ties to the smaller client id. tau is
// round(tau_star) clamped to [1, tau_cap].
FastestPick pick_fastest(std::span<const FastestCandidate> candidates, std::int64_t tau_cap);

struct TauInterval {
  std::int64_t lo = 1;
  std::int64_t hi = 1;
  bool feasible = true;  // false when the waiting bound could not be met
  friend bool operator==(const TauInterval&, const TauInterval&) = default;
};

// tau range keeping 0 <= T_l - (tau mu + nu) <= rho. Both ends clamped to
// >= 1; an empty range collapses to [hi, hi].
TauInterval freq_interval(double fastest_time, double mu, double nu, double rho);

// tau in the interval minimising the mean (over layers) block variance after
// adding tau to the selected blocks; ties to the smaller tau.
std::int64_t assign_frequency(const TauInterval& interval, std::span<const BlockSelection> selections,
                              std::span<const BlockLedger> ledgers);

// ---- round planning ----------------------------------------------------------

// Per-width costs of one participating client, index p-1.
struct ClientCosts {
  std::size_t client_id = 0;
  std::vector<double> mu_by_width;
  std::vector<double> nu_by_width;
};

struct ClientAssignment {
  std::size_t client_id = 0;
  std::size_t width = 1;
  std::vector<BlockSelection> selections;  // one per layer
  std::int64_t tau = 1;
  double mu = 0.0;
  double nu = 0.0;
  double predicted_time = 0.0;
  TauInterval interval;
};

struct RoundPlan {
  std::vector<ClientAssignment> clients;  // ascending client id
  std::size_t fastest_id = 0;
  std::int64_t horizon = 0;  // H chosen for the fastest client (0 for bootstrap)
  double fastest_time = 0.0;
  double round_time = 0.0;
  double avg_waiting = 0.0;
  double block_variance = 0.0;  // mean over layers, after the ledger update
  bool bootstrap = false;

  const ClientAssignment& assignment(std::size_t client_id) const;
};

// Chooses the blocks for one client across all layers.
using BlockSelector =
    std::function<std::vector<BlockSelection>(std::span<const BlockLedger> ledgers, std::size_t width,
                                              std::size_t client_id)>;

// Least-trained selection, independently per layer.
std::vector<BlockSelection> least_trained_selection(std::span<const BlockLedger> ledgers, std::size_t width,
                                                    std::size_t client_id);

double mean_block_variance(std::span<const BlockLedger> ledgers);

// One round of the parameter-server procedure: widths, fastest client and
// its tau, everyone else's tau within the waiting bound, block selection and
// ledger update. Ledgers are updated in place.
RoundPlan plan_round(std::span<const ClientCosts> clients, std::vector<BlockLedger>& ledgers, const BoundParams& bp,
                     const SchedulerConfig& cfg, const BlockSelector& selector = least_trained_selection);

// First round: no estimates yet, every client runs the same predefined tau.
RoundPlan plan_bootstrap_round(std::span<const ClientCosts> clients, std::vector<BlockLedger>& ledgers,
                               std::int64_t tau0, const SchedulerConfig& cfg,
                               const BlockSelector& selector = least_trained_selection);

}  // namespace heroes
