#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace oracle {

using heroes::Batch;
using heroes::MlpModel;
using heroes::Tensor;

double forward_loss(const MlpModel& model, const Batch& batch) {
  const std::size_t n = batch.inputs.rows();
  const std::size_t d = batch.inputs.cols();
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> a(d * model.input_repeat);
    for (std::size_t t = 0; t < model.input_repeat; ++t)
      for (std::size_t j = 0; j < d; ++j) a[t * d + j] = batch.inputs(s, j);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      const Tensor& w = model.weights[l];
      std::vector<double> z(w.cols());
      for (std::size_t o = 0; o < w.cols(); ++o) {
        double acc = model.biases[l][o];
        for (std::size_t i = 0; i < w.rows(); ++i) acc += a[i] * w(i, o);
        z[o] = acc;
      }
      if (l + 1 < model.weights.size())
        for (double& x : z) x = x > 0.0 ? x : 0.0;
      a = std::move(z);
    }
    const std::size_t c = a.size() / model.output_fold;
    std::vector<double> out(c, 0.0);
    for (std::size_t t = 0; t < model.output_fold; ++t)
      for (std::size_t j = 0; j < c; ++j) out[j] += a[t * c + j];
    if (model.head == heroes::Head::kSquaredError) {
      double e = 0.0;
      for (std::size_t j = 0; j < c; ++j) e += (out[j] - batch.targets(s, j)) * (out[j] - batch.targets(s, j));
      total += 0.5 * e;
    } else {
      const double m = *std::max_element(out.begin(), out.end());
      double z = 0.0;
      for (double x : out) z += std::exp(x - m);
      total += std::log(z) + m - out[static_cast<std::size_t>(batch.labels[s])];
    }
  }
  return total / static_cast<double>(n);
}

namespace {

std::vector<double*> parameter_slots(MlpModel& m) {
  std::vector<double*> out;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (double& x : m.weights[l].storage()) out.push_back(&x);
    for (double& x : m.biases[l].storage()) out.push_back(&x);
  }
  return out;
}

}  // namespace

std::vector<double> finite_difference_gradient(const MlpModel& model, const Batch& batch, double step) {
  MlpModel m = model;
  auto slots = parameter_slots(m);
  std::vector<double> g(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double x = *slots[i];
    *slots[i] = x + step;
    const double up = forward_loss(m, batch);
    *slots[i] = x - step;
    const double down = forward_loss(m, batch);
    *slots[i] = x;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

MlpModel random_model(const std::vector<std::size_t>& dims, std::uint64_t seed, double scale) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, scale);
  MlpModel m;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Tensor w = Tensor::matrix(dims[l], dims[l + 1]);
    for (double& x : w.storage()) x = nd(gen);
    Tensor b({dims[l + 1]});
    for (double& x : b.storage()) x = nd(gen);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  return m;
}

Batch random_batch(std::size_t rows, std::size_t features, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Batch b;
  b.inputs = Tensor::matrix(rows, features);
  for (double& x : b.inputs.storage()) x = nd(gen);
  for (std::size_t i = 0; i < rows; ++i) b.labels.push_back(static_cast<int>(gen() % classes));
  return b;
}

std::vector<double> singular_values(const Tensor& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  const auto& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

double optimal_residual(const Tensor& m, std::size_t r) {
  const auto s = singular_values(m);
  double acc = 0.0;
  for (std::size_t i = r; i < s.size(); ++i) acc += s[i] * s[i];
  return std::sqrt(acc);
}

double iter_time(double flops, double q) { return flops / q; }
double comm_time(double bits, double b) { return bits / b; }

double round_time(const std::vector<double>& t) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : t)
    if (x > m) m = x;
  return m;
}

double avg_waiting(const std::vector<double>& t) {
  const double m = round_time(t);
  double s = 0.0;
  for (double x : t) s += m - x;
  return s / static_cast<double>(t.size());
}

double block_variance(const std::vector<std::int64_t>& counts) {
  double mean = 0.0;
  for (auto c : counts) mean += static_cast<double>(c);
  mean /= static_cast<double>(counts.size());
  double v = 0.0;
  for (auto c : counts) v += (static_cast<double>(c) - mean) * (static_cast<double>(c) - mean);
  return v / static_cast<double>(counts.size());
}

double conv_bound(const heroes::BoundParams& bp, std::int64_t H, double tau) {
  const double h = static_cast<double>(H);
  const double a = 4.0 * bp.F0 / (h * bp.eta * tau);
  const double b = bp.L * bp.eta * tau * (bp.G2 + 18.0 * bp.sigma2) / 3.0;
  const double c = 6.0 * bp.L * bp.L * bp.beta2;
  return a + b + c;
}

double tau_star(const heroes::BoundParams& bp, std::int64_t H) {
  return std::sqrt(12.0 * bp.F0 /
                   (bp.eta * bp.eta * static_cast<double>(H) * bp.L * (bp.G2 + 18.0 * bp.sigma2)));
}

std::vector<std::size_t> least_trained(const std::vector<std::int64_t>& counts, std::size_t width) {
  std::vector<std::pair<std::int64_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < counts.size(); ++i) pairs.push_back({counts[i], i});
  std::sort(pairs.begin(), pairs.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < width * width; ++i) out.push_back(pairs[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

double mean_variance_after(const std::vector<std::vector<std::int64_t>>& ledgers,
                           const std::vector<std::vector<std::size_t>>& blocks, std::int64_t tau) {
  double s = 0.0;
  for (std::size_t l = 0; l < ledgers.size(); ++l) {
    auto c = ledgers[l];
    for (auto i : blocks[l]) c[i] += tau;
    s += block_variance(c);
  }
  return s / static_cast<double>(ledgers.size());
}

}  // namespace

Plan brute_force_plan(const std::vector<heroes::ClientCosts>& clients, std::vector<std::vector<std::int64_t>> ledgers,
                      const heroes::BoundParams& bp, const heroes::SchedulerConfig& cfg) {
  auto sorted = clients;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  const std::size_t K = sorted.size();

  std::vector<std::size_t> width(K, 1);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t p = 1; p <= cfg.max_width; ++p)
      if (sorted[k].mu_by_width[p - 1] <= cfg.mu_max) width[k] = p;

  // Each client's H: least completion estimate among H meeting epsilon,
  // else least bound. Then the least estimate across clients.
  std::size_t fastest = 0;
  std::int64_t best_h = 0;
  double best_tau = 0.0, best_total = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    const double mu = sorted[k].mu_by_width[width[k] - 1], nu = sorted[k].nu_by_width[width[k] - 1];
    std::int64_t h_ok = 0, h_tight = 0;
    double t_ok = std::numeric_limits<double>::infinity(), g_tight = std::numeric_limits<double>::infinity();
    for (std::int64_t H = 1; H <= cfg.h_search_max; ++H) {
      const double tau = oracle::tau_star(bp, H);
      const double g = oracle::conv_bound(bp, H, tau < 1.0 ? 1.0 : tau);
      const double total = static_cast<double>(H) * (tau * mu + nu);
      if (g <= cfg.epsilon && total < t_ok) {
        t_ok = total;
        h_ok = H;
      }
      if (g < g_tight) {
        g_tight = g;
        h_tight = H;
      }
    }
    const std::int64_t H = h_ok ? h_ok : h_tight;
    const double tau = oracle::tau_star(bp, H);
    const double total = static_cast<double>(H) * (tau * mu + nu);
    if (total < best_total) {
      best_total = total;
      fastest = k;
      best_h = H;
      best_tau = tau;
    }
  }
  std::int64_t tau_l = static_cast<std::int64_t>(std::llround(best_tau));
  tau_l = std::clamp<std::int64_t>(tau_l, 1, cfg.tau_cap);
  const double T_l = static_cast<double>(tau_l) * sorted[fastest].mu_by_width[width[fastest] - 1] +
                     sorted[fastest].nu_by_width[width[fastest] - 1];

  Plan plan;
  plan.fastest = sorted[fastest].client_id;
  plan.horizon = best_h;
  const double slack = 1e-9;
  for (std::size_t k = 0; k < K; ++k) {
    PlannedClient pc;
    pc.id = sorted[k].client_id;
    pc.width = width[k];
    for (const auto& l : ledgers) pc.blocks.push_back(least_trained(l, width[k]));
    if (k == fastest) {
      pc.tau = tau_l;
    } else {
      const double mu = sorted[k].mu_by_width[width[k] - 1], nu = sorted[k].nu_by_width[width[k] - 1];
      std::int64_t chosen = 0;
      double best_v = std::numeric_limits<double>::infinity();
      std::int64_t fallback = 1;
      for (std::int64_t tau = 1; tau <= cfg.tau_cap; ++tau) {
        const double t = static_cast<double>(tau);
        if (t <= (T_l - nu) / mu + slack) fallback = tau;
        const bool ok = t <= (T_l - nu) / mu + slack && t >= (T_l - cfg.rho - nu) / mu - slack;
        if (!ok) continue;
        const double v = mean_variance_after(ledgers, pc.blocks, tau);
        if (v < best_v) {
          best_v = v;
          chosen = tau;
        }
      }
      pc.tau = chosen ? chosen : fallback;
    }
    for (std::size_t l = 0; l < ledgers.size(); ++l)
      for (auto i : pc.blocks[l]) ledgers[l][i] += pc.tau;
    plan.clients.push_back(std::move(pc));
  }
  plan.ledgers = std::move(ledgers);
  return plan;
}

PlannerInstance random_planner_instance(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PlannerInstance in;
  in.cfg.max_width = 4;
  in.cfg.h_search_max = 64;
  in.cfg.tau_cap = 64;
  in.cfg.rho = 0.5 + 2.5 * u(gen);
  in.cfg.mu_max = 0.3 + 1.2 * u(gen);
  in.bp = {0.5 + 1.5 * u(gen), 0.02 + 0.08 * u(gen), 0.5 + 4.5 * u(gen), 0.5 + 4.5 * u(gen), 0.01 + 0.5 * u(gen),
           0.01 * u(gen)};
  const std::int64_t target_h = 1 + static_cast<std::int64_t>(gen() % 64);
  in.cfg.epsilon = oracle::conv_bound(in.bp, target_h, std::max(1.0, oracle::tau_star(in.bp, target_h)));
  std::vector<std::size_t> ids{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  for (std::size_t i = 0; i < 5; ++i) std::swap(ids[i], ids[i + gen() % (10 - i)]);
  for (std::size_t k = 0; k < 5; ++k) {
    heroes::ClientCosts c;
    c.client_id = ids[k];
    const double mu1 = 0.02 + 0.4 * u(gen), nu1 = 0.1 + 0.8 * u(gen);
    for (std::size_t p = 1; p <= 4; ++p) {
      c.mu_by_width.push_back(mu1 * static_cast<double>(p * p));
      c.nu_by_width.push_back(nu1 * (1.0 + 0.6 * static_cast<double>(p - 1)));
    }
    in.clients.push_back(std::move(c));
  }
  for (int l = 0; l < 2; ++l) {
    std::vector<std::int64_t> counts(16);
    for (auto& x : counts) x = static_cast<std::int64_t>(gen() % 40);
    in.ledgers.push_back(std::move(counts));
  }
  return in;
}

Plan as_plan(const heroes::RoundPlan& plan, const std::vector<heroes::BlockLedger>& ledgers) {
  Plan out;
  out.fastest = plan.fastest_id;
  out.horizon = plan.horizon;
  for (const auto& a : plan.clients) {
    PlannedClient pc{a.client_id, a.width, a.tau, {}};
    for (const auto& sel : a.selections) pc.blocks.push_back(sel.indices);
    out.clients.push_back(std::move(pc));
  }
  for (const auto& l : ledgers) out.ledgers.push_back(l.counts);
  return out;
}

std::vector<heroes::BlockLedger> as_ledgers(const std::vector<std::vector<std::int64_t>>& counts) {
  std::vector<heroes::BlockLedger> out;
  for (const auto& c : counts) {
    heroes::BlockLedger l;
    l.counts = c;
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace oracle
