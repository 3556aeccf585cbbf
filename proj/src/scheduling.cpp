#include "heroes/scheduling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "heroes/errors.hpp"

namespace heroes {

namespace {

// Guards floor/ceil of quotients that are integral in exact arithmetic.
constexpr double kIntegralSlack = 1e-9;

void require_nonempty(std::span<const double> xs, const char* what) {
  if (xs.empty()) throw DomainError(std::string(what) + ": no clients");
}

std::int64_t clamp_tau(double tau, std::int64_t cap) {
  const auto r = static_cast<std::int64_t>(std::llround(tau));
  return std::clamp<std::int64_t>(r, 1, std::max<std::int64_t>(cap, 1));
}

std::vector<ClientCosts> sorted_by_id(std::span<const ClientCosts> clients, std::size_t max_width) {
  if (clients.empty()) throw DomainError("plan_round: no participating clients");
  std::vector<ClientCosts> out(clients.begin(), clients.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i > 0 && out[i].client_id == out[i - 1].client_id) throw DomainError("duplicate client id in plan");
    if (out[i].mu_by_width.size() != max_width || out[i].nu_by_width.size() != max_width)
      throw DomainError("per-width cost tables must have P entries");
  }
  return out;
}

void finish_plan(RoundPlan& plan, std::span<const BlockLedger> ledgers) {
  std::vector<double> times;
  for (const auto& a : plan.clients) times.push_back(a.predicted_time);
  plan.round_time = round_time(times);
  plan.avg_waiting = avg_waiting(times);
  plan.block_variance = mean_block_variance(ledgers);
}

}  // namespace

double iter_time(const CostInputs& c) {
  if (!(c.q > 0.0)) throw DomainError("iter_time: compute speed must be positive");
  if (c.flops_per_iter < 0.0) throw DomainError("iter_time: negative FLOPs");
  return c.flops_per_iter / c.q;
}

double comm_time(const CostInputs& c) {
  if (!(c.b > 0.0)) throw DomainError("comm_time: bandwidth must be positive");
  if (c.upload_bits < 0.0) throw DomainError("comm_time: negative payload");
  return c.upload_bits / c.b;
}

double round_time(std::span<const double> client_times) {
  require_nonempty(client_times, "round_time");
  return *std::max_element(client_times.begin(), client_times.end());
}

double avg_waiting(std::span<const double> client_times) {
  const double t = round_time(client_times);
  double s = 0.0;
  for (double x : client_times) s += t - x;
  return s / static_cast<double>(client_times.size());
}

double block_variance(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw DomainError("block_variance: empty set");
  const double n = static_cast<double>(counts.size());
  double mean = 0.0;
  for (auto c : counts) mean += static_cast<double>(c);
  mean /= n;
  double v = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - mean;
    v += d * d;
  }
  return v / n;
}

void BoundParams::validate() const {
  if (!(eta > 0.0)) throw DomainError("bound: eta must be positive");
  if (!(L > 0.0)) throw DomainError("bound: L must be positive");
  if (G2 < 0.0 || sigma2 < 0.0 || beta2 < 0.0 || F0 < 0.0) throw DomainError("bound: negative parameter");
  if (!std::isfinite(F0) || !std::isfinite(G2) || !std::isfinite(sigma2) || !std::isfinite(beta2) ||
      !std::isfinite(L) || !std::isfinite(eta))
    throw NumericError("bound: non-finite parameter");
}

double conv_bound(const BoundParams& bp, std::int64_t rounds, double tau) {
  bp.validate();
  if (rounds < 1) throw DomainError("conv_bound: H must be >= 1");
  if (!(tau >= 1.0)) throw DomainError("conv_bound: tau must be >= 1");
  const double h = static_cast<double>(rounds);
  return 4.0 * bp.F0 / (h * bp.eta * tau) + bp.L * bp.eta * tau * (bp.G2 + 18.0 * bp.sigma2) / 3.0 +
         6.0 * bp.L * bp.L * bp.beta2;
}

double tau_star(const BoundParams& bp, std::int64_t rounds) {
  bp.validate();
  if (rounds < 1) throw DomainError("tau_star: H must be >= 1");
  const double denom = bp.eta * bp.eta * static_cast<double>(rounds) * bp.L * (bp.G2 + 18.0 * bp.sigma2);
  if (!(denom > 0.0)) throw DomainError("tau_star: zero denominator (G2 + 18 sigma2 must be positive)");
  return std::sqrt(12.0 * bp.F0 / denom);
}

double completion_estimate(const BoundParams& bp, std::int64_t rounds, double mu, double nu) {
  if (mu < 0.0 || nu < 0.0) throw DomainError("completion_estimate: negative time");
  return static_cast<double>(rounds) * (tau_star(bp, rounds) * mu + nu);
}

void SchedulerConfig::validate() const {
  if (!(rho > 0.0) || !(delta > 0.0) || !(mu_max > 0.0) || !(t_max >= 0.0) || !(epsilon > 0.0))
    throw DomainError("scheduler config: thresholds must be positive");
  if (max_width < 1 || h_search_max < 1 || tau_cap < 1) throw DomainError("scheduler config: bounds must be >= 1");
}

HorizonChoice best_horizon(const BoundParams& bp, double mu, double nu, const SchedulerConfig& cfg) {
  HorizonChoice best;
  double best_total = std::numeric_limits<double>::infinity();
  double best_bound = std::numeric_limits<double>::infinity();
  HorizonChoice tightest;
  for (std::int64_t h = 1; h <= cfg.h_search_max; ++h) {
    const double tau = tau_star(bp, h);
    // conv_bound's domain is tau >= 1; below that the bound is evaluated at 1.
    const double bound = conv_bound(bp, h, std::max(tau, 1.0));
    const double total = completion_estimate(bp, h, mu, nu);
    if (bound <= cfg.epsilon && total < best_total) {
      best_total = total;
      best = {h, tau, total, true};
    }
    if (bound < best_bound) {
      best_bound = bound;
      tightest = {h, tau, total, false};
    }
  }
  return best.feasible ? best : tightest;
}

std::size_t assign_width(std::span<const double> mu_by_width, double mu_max) {
  std::size_t width = 1;
  for (std::size_t p = 1; p <= mu_by_width.size(); ++p)
    if (mu_by_width[p - 1] <= mu_max) width = p;
  return width;
}

FastestPick pick_fastest(std::span<const FastestCandidate> candidates, std::int64_t tau_cap) {
  if (candidates.empty()) throw DomainError("pick_fastest: no candidates");
  const FastestCandidate* best = &candidates.front();
  for (const auto& c : candidates) {
    const double a = c.horizon.total_time, b = best->horizon.total_time;
    if (a < b || (a == b && c.client_id < best->client_id)) best = &c;
  }
  FastestPick out;
  out.client_id = best->client_id;
  out.rounds = best->horizon.rounds;
  out.tau = clamp_tau(best->horizon.tau, tau_cap);
  out.round_time = static_cast<double>(out.tau) * best->mu + best->nu;
  return out;
}

TauInterval freq_interval(double fastest_time, double mu, double nu, double rho) {
  if (!(mu > 0.0)) throw DomainError("freq_interval: mu must be positive");
  const double upper = (fastest_time - nu) / mu;
  const double lower = (fastest_time - rho - nu) / mu;
  TauInterval out;
  out.hi = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(upper + kIntegralSlack)));
  out.lo = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(lower - kIntegralSlack)));
  if (out.lo > out.hi || upper + kIntegralSlack < 1.0) {
    out.lo = out.hi;
    out.feasible = false;
  }
  return out;
}

double mean_block_variance(std::span<const BlockLedger> ledgers) {
  if (ledgers.empty()) return 0.0;
  double s = 0.0;
  for (const auto& l : ledgers) s += block_variance(l.counts);
  return s / static_cast<double>(ledgers.size());
}

std::int64_t assign_frequency(const TauInterval& interval, std::span<const BlockSelection> selections,
                              std::span<const BlockLedger> ledgers) {
  if (interval.lo > interval.hi || interval.lo < 1) throw DomainError("assign_frequency: empty interval");
  if (selections.size() != ledgers.size()) throw DomainError("assign_frequency: one selection per layer");
  std::vector<BlockLedger> trial(ledgers.begin(), ledgers.end());
  std::int64_t best_tau = interval.lo;
  double best_v = std::numeric_limits<double>::infinity();
  for (std::int64_t tau = interval.lo; tau <= interval.hi; ++tau) {
    for (std::size_t l = 0; l < trial.size(); ++l) {
      trial[l] = ledgers[l];
      ledger_update(trial[l], selections[l], tau);
    }
    const double v = mean_block_variance(trial);
    if (v < best_v) {
      best_v = v;
      best_tau = tau;
    }
  }
  return best_tau;
}

const ClientAssignment& RoundPlan::assignment(std::size_t client_id) const {
  for (const auto& a : clients)
    if (a.client_id == client_id) return a;
  throw DomainError("client " + std::to_string(client_id) + " not in plan");
}

std::vector<BlockSelection> least_trained_selection(std::span<const BlockLedger> ledgers, std::size_t width,
                                                    std::size_t /*client_id*/) {
  std::vector<BlockSelection> out;
  out.reserve(ledgers.size());
  for (const auto& l : ledgers) out.push_back(select_blocks(l, width));
  return out;
}

RoundPlan plan_round(std::span<const ClientCosts> clients, std::vector<BlockLedger>& ledgers, const BoundParams& bp,
                     const SchedulerConfig& cfg, const BlockSelector& selector) {
  cfg.validate();
  bp.validate();
  const auto sorted = sorted_by_id(clients, cfg.max_width);

  RoundPlan plan;
  std::vector<FastestCandidate> candidates;
  for (const auto& c : sorted) {
    ClientAssignment a;
    a.client_id = c.client_id;
    a.width = assign_width(c.mu_by_width, cfg.mu_max);
    a.mu = c.mu_by_width[a.width - 1];
    a.nu = c.nu_by_width[a.width - 1];
    candidates.push_back({a.client_id, a.mu, a.nu, best_horizon(bp, a.mu, a.nu, cfg)});
    plan.clients.push_back(std::move(a));
  }

  const FastestPick fastest = pick_fastest(candidates, cfg.tau_cap);
  plan.fastest_id = fastest.client_id;
  plan.horizon = fastest.rounds;
  plan.fastest_time = fastest.round_time;

  for (auto& a : plan.clients) {
    a.selections = selector(ledgers, a.width, a.client_id);
    if (a.client_id == fastest.client_id) {
      a.tau = fastest.tau;
      a.interval = {fastest.tau, fastest.tau, true};
    } else {
      a.interval = freq_interval(fastest.round_time, a.mu, a.nu, cfg.rho);
      if (a.interval.hi > cfg.tau_cap) {
        a.interval.hi = cfg.tau_cap;
        if (a.interval.lo > a.interval.hi) {
          a.interval.lo = a.interval.hi;
          a.interval.feasible = false;
        }
      }
      a.tau = assign_frequency(a.interval, a.selections, ledgers);
    }
    for (std::size_t l = 0; l < ledgers.size(); ++l) ledger_update(ledgers[l], a.selections[l], a.tau);
    a.predicted_time = static_cast<double>(a.tau) * a.mu + a.nu;
  }
  finish_plan(plan, ledgers);
  return plan;
}

RoundPlan plan_bootstrap_round(std::span<const ClientCosts> clients, std::vector<BlockLedger>& ledgers,
                               std::int64_t tau0, const SchedulerConfig& cfg, const BlockSelector& selector) {
  cfg.validate();
  if (tau0 < 1) throw DomainError("bootstrap tau must be >= 1");
  const auto sorted = sorted_by_id(clients, cfg.max_width);
  RoundPlan plan;
  plan.bootstrap = true;
  double fastest = std::numeric_limits<double>::infinity();
  for (const auto& c : sorted) {
    ClientAssignment a;
    a.client_id = c.client_id;
    a.width = assign_width(c.mu_by_width, cfg.mu_max);
    a.mu = c.mu_by_width[a.width - 1];
    a.nu = c.nu_by_width[a.width - 1];
    a.tau = tau0;
    a.interval = {tau0, tau0, true};
    a.selections = selector(ledgers, a.width, a.client_id);
    for (std::size_t l = 0; l < ledgers.size(); ++l) ledger_update(ledgers[l], a.selections[l], a.tau);
    a.predicted_time = static_cast<double>(a.tau) * a.mu + a.nu;
    if (a.predicted_time < fastest) {
      fastest = a.predicted_time;
      plan.fastest_id = a.client_id;
      plan.fastest_time = a.predicted_time;
    }
    plan.clients.push_back(std::move(a));
  }
  finish_plan(plan, ledgers);
  return plan;
}

}  // namespace heroes
