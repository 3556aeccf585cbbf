#include "heroes/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include <json.hpp>

#include "heroes/errors.hpp"
#include "heroes/rng.hpp"

namespace heroes {

namespace {

// Per-client costs of one round, in planner and in realized form.
struct ClientEnv {
  std::size_t id = 0;
  EnvSample env;
  std::vector<double> mu, nu;  // index p - 1, realized
};

Hyperparams hyperparams(const ExperimentConfig& cfg) {
  return {cfg.train.eta, cfg.train.batch_size, cfg.train.num_probes};
}

std::uint64_t client_seed(const SimState& s, std::size_t client) {
  return derive_seed(s.cfg.seed, Stream::kBatches, {s.round, client});
}

std::vector<ClientEnv> draw_environment(const SimState& s, const std::vector<std::size_t>& ids) {
  const std::size_t P = s.cfg.model.max_width;
  std::vector<ClientEnv> out;
  for (auto id : ids) {
    ClientEnv c;
    c.id = id;
    c.env = sample_environment(s.profiles[id], s.cfg.seed, s.round, s.reference_flops);
    for (std::size_t p = 1; p <= P; ++p) {
      c.mu.push_back(factorized_iteration_flops(s.shapes, p, s.cfg.train.batch_size) / c.env.q);
      c.nu.push_back(static_cast<double>(factorized_payload_params(s.shapes, p)) * kBitsPerParameter / c.env.b_up);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ClientCosts> planner_costs(const SimState& s, const std::vector<ClientEnv>& envs) {
  std::vector<ClientCosts> out;
  for (const auto& c : envs) {
    ClientCosts cc{c.id, c.mu, c.nu};
    if (s.cfg.env.planner_noise > 0.0) {
      Rng rng(derive_seed(s.cfg.seed, Stream::kPlannerNoise, {s.round, c.id}));
      const double fm = std::exp(s.cfg.env.planner_noise * rng.normal());
      const double fn = std::exp(s.cfg.env.planner_noise * rng.normal());
      for (auto& m : cc.mu_by_width) m *= fm;
      for (auto& n : cc.nu_by_width) n *= fn;
    }
    out.push_back(std::move(cc));
  }
  return out;
}

void finish_record(SimState& s, RoundRecord& rec) {
  rec.round_time = round_time(rec.client_times);
  rec.avg_wait = avg_waiting(rec.client_times);
  s.clock += rec.round_time;
  rec.sim_time = s.clock;
  rec.traffic_bits = s.traffic_bits;
  const MlpModel model = global_model(s);
  rec.test_acc = accuracy(model, s.test_set.full());
  s.global_loss = forward(model, s.train_set.full()).loss;
  rec.global_loss = s.global_loss;
  if (rec.block_var > s.cfg.scheduler.delta) ++s.variance_violations;
  ++s.round;
  rec.round = s.round;
}

std::vector<std::pair<std::size_t, std::size_t>> weight_dims(const MlpModel& m) {
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  for (const auto& w : m.weights) dims.emplace_back(w.rows(), w.cols());
  return dims;
}

std::vector<Tensor> full_coefficients(const std::vector<FactorizedLayer>& layers) {
  std::vector<Tensor> out;
  for (const auto& l : layers) out.push_back(l.coefficient);
  return out;
}

// Shared path of fedavg, adp and heterofl: dense (sub)models, region-wise
// aggregation.
RoundRecord dense_round(SimState& s, const std::function<double(std::size_t)>& ratio_of,
                        const std::function<std::int64_t(const std::vector<double>& mu,
                                                         const std::vector<double>& nu)>& tau_rule) {
  const auto& cfg = s.cfg;
  RoundRecord rec;
  rec.participants = sample_participants(cfg.clients, cfg.participants, cfg.seed, s.round);

  std::vector<MlpModel> subs;
  std::vector<double> mu, nu;
  for (auto id : rec.participants) {
    const double ratio = ratio_of(id);
    MlpModel sub = ratio == 1.0 ? s.dense : heterofl_submodel(s.dense, ratio);
    const EnvSample env = sample_environment(s.profiles[id], cfg.seed, s.round, s.reference_flops);
    mu.push_back(dense_iteration_flops(weight_dims(sub), cfg.train.batch_size) / env.q);
    nu.push_back(static_cast<double>(dense_payload_params(sub)) * kBitsPerParameter / env.b_up);
    rec.widths.push_back(ratio * static_cast<double>(cfg.model.max_width));
    subs.push_back(std::move(sub));
  }
  const std::int64_t tau = tau_rule(mu, nu);

  std::vector<std::vector<Tensor>> w_parts(s.dense.weights.size()), b_parts(s.dense.weights.size());
  for (std::size_t i = 0; i < rec.participants.size(); ++i) {
    const auto id = rec.participants[i];
    MlpModel trained = sgd_train(subs[i], s.shards[id], cfg.train.eta, cfg.train.batch_size, tau, client_seed(s, id));
    for (std::size_t l = 0; l < trained.weights.size(); ++l) {
      w_parts[l].push_back(std::move(trained.weights[l]));
      b_parts[l].push_back(std::move(trained.biases[l]));
    }
    rec.taus.push_back(tau);
    rec.client_times.push_back(static_cast<double>(tau) * mu[i] + nu[i]);
    s.traffic_bits += 2 * static_cast<std::uint64_t>(dense_payload_params(subs[i])) *
                      static_cast<std::uint64_t>(kBitsPerParameter);
  }
  for (std::size_t l = 0; l < s.dense.weights.size(); ++l) {
    aggregate_regions(s.dense.weights[l], w_parts[l]);
    aggregate_regions(s.dense.biases[l], b_parts[l]);
  }
  rec.planned_wait = avg_waiting(rec.client_times);
  finish_record(s, rec);
  return rec;
}

BlockSelector random_selector(const SimState& s) {
  const std::uint64_t seed = s.cfg.seed;
  const std::uint64_t round = s.round;
  return [seed, round](std::span<const BlockLedger> ledgers, std::size_t width, std::size_t client) {
    Rng rng(derive_seed(seed, Stream::kAblation, {round, client}));
    std::vector<BlockSelection> out;
    for (const auto& l : ledgers) {
      const std::size_t n = l.counts.size(), k = width * width;
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
      idx.resize(k);
      std::sort(idx.begin(), idx.end());
      out.push_back({width, std::move(idx)});
    }
    return out;
  };
}

}  // namespace

std::vector<LayerShape> layer_shapes(const ExperimentConfig& cfg) {
  std::vector<std::size_t> dims{cfg.data.dim};
  dims.insert(dims.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
  dims.push_back(cfg.data.classes);
  std::vector<LayerShape> out;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerShape s{1, dims[l], dims[l + 1], cfg.model.rank, cfg.model.max_width};
    if (s.rank > s.basis_rows()) throw ConfigError("key 'model.rank': exceeds a layer's basis rows");
    out.push_back(s);
  }
  return out;
}

double factorized_iteration_flops(const std::vector<LayerShape>& shapes, std::size_t width, std::size_t batch) {
  double compose_flops = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  for (const auto& s : shapes) {
    const double k2 = static_cast<double>(s.kernel * s.kernel);
    compose_flops += 2.0 * k2 * static_cast<double>(s.in_channels * s.rank * width * width * s.out_channels);
    dims.emplace_back(s.kernel * s.kernel * width * s.in_channels, width * s.out_channels);
  }
  return compose_flops + dense_iteration_flops(dims, batch);
}

double dense_iteration_flops(const std::vector<std::pair<std::size_t, std::size_t>>& weight_dims, std::size_t batch) {
  double f = 0.0;
  for (const auto& [r, c] : weight_dims) f += 2.0 * 3.0 * static_cast<double>(batch * r * c);
  return f;
}

double reference_iteration_flops(const std::vector<LayerShape>& shapes, std::size_t batch) {
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  for (const auto& s : shapes)
    dims.emplace_back(s.kernel * s.kernel * s.max_width * s.in_channels, s.max_width * s.out_channels);
  return dense_iteration_flops(dims, batch);
}

std::size_t factorized_payload_params(const std::vector<LayerShape>& shapes, std::size_t width) {
  std::size_t n = 0;
  for (const auto& s : shapes) n += s.basis_rows() * s.rank + s.rank * width * width * s.out_channels + width * s.out_channels;
  return n;
}

std::size_t dense_payload_params(const MlpModel& model) { return model.parameter_count(); }

double rank_payload_threshold(const LayerShape& s, std::size_t width) {
  const double k2i = static_cast<double>(s.basis_rows());
  const double P = static_cast<double>(s.max_width), p = static_cast<double>(width);
  const double o = static_cast<double>(s.out_channels);
  return k2i * o * P * P / (k2i + p * p * o);
}

double heterofl_ratio(const std::vector<ClientProfile>& profiles, std::size_t client_id) {
  std::vector<std::size_t> order(profiles.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return profiles[a].compute_mean < profiles[b].compute_mean; });
  const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), client_id) - order.begin());
  if (pos == order.size()) throw DomainError("heterofl_ratio: unknown client");
  const std::size_t quartile = 4 * pos / profiles.size();
  return std::ldexp(1.0, -static_cast<int>(quartile));
}

MlpModel heterofl_submodel(const MlpModel& full, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw DomainError("heterofl ratio must lie in (0, 1]");
  full.validate();
  auto scaled = [ratio](std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))));
  };
  MlpModel sub = full;
  const std::size_t L = full.weights.size();
  for (std::size_t l = 0; l < L; ++l) {
    const Tensor& w = full.weights[l];
    const std::size_t rows = l == 0 ? w.rows() : scaled(w.rows());
    const std::size_t cols = l + 1 == L ? w.cols() : scaled(w.cols());
    Tensor sw = Tensor::matrix(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) sw(i, j) = w(i, j);
    sub.weights[l] = std::move(sw);
    sub.biases[l] = Tensor({cols}, std::vector<double>(full.biases[l].values().begin(),
                                                       full.biases[l].values().begin() + static_cast<std::ptrdiff_t>(cols)));
  }
  sub.validate();
  return sub;
}

void aggregate_regions(Tensor& global, const std::vector<Tensor>& parts) {
  if (parts.empty()) return;
  const bool vec = global.rank() == 1;
  const std::size_t R = vec ? 1 : global.rows(), C = vec ? global.size() : global.cols();
  std::vector<double> sum(R * C, 0.0);
  std::vector<std::size_t> count(R * C, 0);
  for (const auto& p : parts) {
    if (p.rank() != global.rank()) throw ShapeError("aggregate_regions: rank mismatch");
    const std::size_t pr = vec ? 1 : p.rows(), pc = vec ? p.size() : p.cols();
    if (pr > R || pc > C) throw ShapeError("aggregate_regions: part larger than the global tensor");
    for (std::size_t i = 0; i < pr; ++i)
      for (std::size_t j = 0; j < pc; ++j) {
        sum[i * C + j] += p[i * pc + j];
        ++count[i * C + j];
      }
  }
  for (std::size_t k = 0; k < R * C; ++k)
    if (count[k]) global[k] = sum[k] / static_cast<double>(count[k]);
}

SimState make_state(const ExperimentConfig& cfg) {
  cfg.validate();
  SimState s;
  s.cfg = cfg;
  s.data = make_blobs(cfg.data.classes, cfg.data.per_class, cfg.data.dim, cfg.data.spread, cfg.seed);
  s.partition = partition_noniid(s.data, {cfg.partition.gamma, cfg.clients, cfg.seed, cfg.partition.shard_size});
  for (const auto& rows : s.partition.shards) s.shards.push_back(make_shard(s.data, rows));
  s.train_set = make_shard(s.data, s.data.train);
  s.test_set = make_shard(s.data, s.data.test);
  s.profiles = default_profiles(cfg.clients, cfg.env.tier_means, cfg.env.tier_std_frac, cfg.env.upload_min_mbps,
                                cfg.env.upload_max_mbps, cfg.env.download_min_mbps, cfg.env.download_max_mbps);
  s.shapes = layer_shapes(cfg);
  s.reference_flops = reference_iteration_flops(s.shapes, cfg.train.batch_size);

  const std::size_t P = cfg.model.max_width;
  for (std::size_t l = 0; l < s.shapes.size(); ++l) {
    s.layers.push_back(make_factorized_layer(s.shapes[l], derive_seed(cfg.seed, Stream::kInit, {l}),
                                             cfg.model.init_scale));
    s.biases.emplace_back(std::vector<std::size_t>{P * s.shapes[l].out_channels});
    s.ledgers.emplace_back(P * P);
  }
  for (std::size_t p = 1; p <= P; ++p)
    for (std::size_t l = 0; l < s.shapes.size(); ++l) {
      s.flanc_coefficients[p].push_back(column_slice(s.layers[l].coefficient, 0, p * p * s.shapes[l].out_channels));
      s.flanc_ledgers[p].emplace_back(p * p);
    }
  s.dense = compose_model(s.layers, full_coefficients(s.layers), s.biases, P);
  s.global_loss = forward(global_model(s), s.train_set.full()).loss;
  return s;
}

MlpModel global_model(const SimState& s) {
  const std::size_t P = s.cfg.model.max_width;
  switch (s.cfg.scheme) {
    case Scheme::kHeroes: return compose_model(s.layers, full_coefficients(s.layers), s.biases, P);
    case Scheme::kFlanc: return compose_model(s.layers, s.flanc_coefficients.at(P), s.biases, P);
    default: return s.dense;
  }
}

RoundRecord run_round(SimState& s) {
  switch (s.cfg.scheme) {
    case Scheme::kHeroes: return run_heroes_round(s);
    case Scheme::kFedAvg: return baseline_fedavg(s);
    case Scheme::kAdp: return baseline_adp(s);
    case Scheme::kHeteroFl: return baseline_heterofl(s);
    case Scheme::kFlanc: return baseline_flanc(s);
  }
  throw DomainError("unknown scheme");
}

RoundRecord run_heroes_round(SimState& s) {
  const auto& cfg = s.cfg;
  RoundRecord rec;
  rec.participants = sample_participants(cfg.clients, cfg.participants, cfg.seed, s.round);
  const auto envs = draw_environment(s, rec.participants);
  const auto costs = planner_costs(s, envs);
  const BlockSelector selector =
      cfg.block_selection == BlockRule::kRandom ? random_selector(s) : BlockSelector(least_trained_selection);

  const bool estimates_usable = s.have_estimates && s.L && *s.L > 0.0 && s.G2 + 18.0 * s.sigma2 > 0.0;
  RoundPlan plan;
  if (estimates_usable) {
    const BoundParams bp{s.global_loss, cfg.train.eta, *s.L, s.G2, s.sigma2, cfg.beta2};
    plan = plan_round(costs, s.ledgers, bp, cfg.scheduler, selector);
  } else {
    plan = plan_bootstrap_round(costs, s.ledgers, cfg.train.tau0, cfg.scheduler, selector);
  }
  rec.bootstrap = plan.bootstrap;
  rec.planned_wait = plan.avg_waiting;
  for (const auto& a : plan.clients) {
    rec.planned_times.push_back(a.predicted_time);
    if (!a.interval.feasible) rec.rounding_slack = std::max(rec.rounding_slack, a.mu);
  }

  std::vector<ClientReport> reports;
  for (const auto& a : plan.clients) {
    const ClientTask task{a.client_id, a.width, a.selections, a.tau, client_seed(s, a.client_id)};
    reports.push_back(client_round(s.layers, s.biases, task, s.shards[a.client_id], hyperparams(cfg)));
  }

  // Aggregation, in ascending client id.
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    std::vector<Tensor> bases, biases;
    std::map<std::size_t, std::vector<Tensor>> contributions;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      bases.push_back(reports[i].bases[l]);
      biases.push_back(reports[i].biases[l]);
      for (auto& [idx, block] :
           split_reduced(reports[i].coefficients[l], plan.clients[i].selections[l], s.shapes[l].out_channels))
        contributions[idx].push_back(std::move(block));
    }
    s.layers[l].basis = aggregate_basis(bases);
    apply_blocks(s.layers[l], aggregate_blocks(contributions));
    aggregate_regions(s.biases[l], biases);
  }
  std::vector<double> Ls;
  double sig = 0.0, g2 = 0.0;
  for (const auto& r : reports) {
    if (r.estimates.L) Ls.push_back(*r.estimates.L);
    sig += r.estimates.sigma2;
    g2 += r.estimates.G2;
  }
  if (!Ls.empty()) s.L = std::accumulate(Ls.begin(), Ls.end(), 0.0) / static_cast<double>(Ls.size());
  s.sigma2 = sig / static_cast<double>(reports.size());
  s.G2 = g2 / static_cast<double>(reports.size());
  s.have_estimates = true;

  for (std::size_t i = 0; i < plan.clients.size(); ++i) {
    const auto& a = plan.clients[i];
    const auto& e = envs[i];
    rec.widths.push_back(static_cast<double>(a.width));
    rec.taus.push_back(a.tau);
    rec.client_times.push_back(static_cast<double>(a.tau) * e.mu[a.width - 1] + e.nu[a.width - 1]);
    s.traffic_bits += 2 * static_cast<std::uint64_t>(factorized_payload_params(s.shapes, a.width)) *
                      static_cast<std::uint64_t>(kBitsPerParameter);
  }
  rec.block_var = mean_block_variance(s.ledgers);
  finish_record(s, rec);
  return rec;
}

RoundRecord baseline_fedavg(SimState& s) {
  const std::int64_t tau = s.cfg.train.tau0;
  return dense_round(
      s, [](std::size_t) { return 1.0; }, [tau](const auto&, const auto&) { return tau; });
}

RoundRecord baseline_adp(SimState& s) {
  const double budget = s.cfg.train.adp_round_budget;
  const std::int64_t cap = s.cfg.scheduler.tau_cap;
  return dense_round(
      s, [](std::size_t) { return 1.0; },
      [budget, cap](const std::vector<double>& mu, const std::vector<double>& nu) {
        std::int64_t tau = cap;
        for (std::size_t i = 0; i < mu.size(); ++i) {
          const double fit = std::floor((budget - nu[i]) / mu[i]);
          tau = std::min<std::int64_t>(tau, fit < 1.0 ? 1 : static_cast<std::int64_t>(fit));
        }
        return std::max<std::int64_t>(tau, 1);
      });
}

RoundRecord baseline_heterofl(SimState& s) {
  const std::int64_t tau = s.cfg.train.tau0;
  const auto* profiles = &s.profiles;
  return dense_round(
      s, [profiles](std::size_t id) { return heterofl_ratio(*profiles, id); },
      [tau](const auto&, const auto&) { return tau; });
}

RoundRecord baseline_flanc(SimState& s) {
  const auto& cfg = s.cfg;
  RoundRecord rec;
  rec.participants = sample_participants(cfg.clients, cfg.participants, cfg.seed, s.round);
  const auto envs = draw_environment(s, rec.participants);
  const auto costs = planner_costs(s, envs);
  const std::int64_t tau = cfg.train.tau0;

  const std::size_t L = s.layers.size();
  std::vector<std::vector<Tensor>> bases(L), biases(L);
  std::map<std::size_t, std::vector<std::vector<Tensor>>> class_parts;  // width -> layer -> parts
  for (std::size_t i = 0; i < envs.size(); ++i) {
    const auto& e = envs[i];
    const std::size_t p = assign_width(costs[i].mu_by_width, cfg.scheduler.mu_max);
    std::vector<Tensor> bias_p;
    for (std::size_t l = 0; l < L; ++l) bias_p.push_back(bias_prefix(s.biases[l], p, s.shapes[l].out_channels));
    BlockSelection whole_class{p, std::vector<std::size_t>(p * p)};
    std::iota(whole_class.indices.begin(), whole_class.indices.end(), 0);
    const MlpModel before = compose_model(s.layers, s.flanc_coefficients.at(p), bias_p, p);
    const MlpModel after = sgd_train(before, s.shards[e.id], cfg.train.eta, cfg.train.batch_size, tau, client_seed(s, e.id));
    auto& parts = class_parts[p];
    parts.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      Factors f = decompose_aligned(after.weights[l], s.shapes[l], p, s.shapes[l].rank, s.layers[l].basis);
      bases[l].push_back(std::move(f.basis));
      parts[l].push_back(std::move(f.coefficient));
      biases[l].push_back(after.biases[l]);
      ledger_update(s.flanc_ledgers.at(p)[l], whole_class, tau);
    }
    rec.widths.push_back(static_cast<double>(p));
    rec.taus.push_back(tau);
    rec.client_times.push_back(static_cast<double>(tau) * e.mu[p - 1] + e.nu[p - 1]);
    s.traffic_bits += 2 * static_cast<std::uint64_t>(factorized_payload_params(s.shapes, p)) *
                      static_cast<std::uint64_t>(kBitsPerParameter);
  }
  for (std::size_t l = 0; l < L; ++l) {
    s.layers[l].basis = aggregate_basis(bases[l]);
    aggregate_regions(s.biases[l], biases[l]);
  }
  for (auto& [p, parts] : class_parts)
    for (std::size_t l = 0; l < L; ++l) s.flanc_coefficients[p][l] = aggregate_basis(parts[l]);
  rec.block_var = mean_block_variance(flanc_combined_ledgers(s));
  rec.planned_wait = avg_waiting(rec.client_times);
  finish_record(s, rec);
  return rec;
}

std::vector<BlockLedger> flanc_combined_ledgers(const SimState& s) {
  std::vector<BlockLedger> out(s.layers.size());
  for (const auto& [p, ledgers] : s.flanc_ledgers)
    for (std::size_t l = 0; l < ledgers.size(); ++l)
      out[l].counts.insert(out[l].counts.end(), ledgers[l].counts.begin(), ledgers[l].counts.end());
  return out;
}

Summary summarize(const SimState& s, const std::vector<RoundRecord>& records) {
  Summary out;
  out.scheme = scheme_name(s.cfg.scheme);
  out.seed = s.cfg.seed;
  out.rounds = records.size();
  out.sim_time = s.clock;
  out.traffic_bits = s.traffic_bits;
  out.variance_violations = s.variance_violations;
  out.shard_size = s.partition.shard_size;
  out.discarded = s.partition.discarded;
  out.final_accuracy = records.empty() ? accuracy(global_model(s), s.test_set.full()) : records.back().test_acc;
  out.best_accuracy = out.final_accuracy;
  double wait = 0.0;
  for (const auto& r : records) {
    out.best_accuracy = std::max(out.best_accuracy, r.test_acc);
    wait += r.avg_wait;
    if (!out.time_to_target && r.test_acc >= s.cfg.target_accuracy) {
      out.time_to_target = r.sim_time;
      out.rounds_to_target = r.round;
      out.traffic_bits_to_target = r.traffic_bits;
    }
  }
  out.mean_wait = records.empty() ? 0.0 : wait / static_cast<double>(records.size());
  out.final_block_var = records.empty() ? 0.0 : records.back().block_var;
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  SimState s = make_state(cfg);
  ExperimentResult res;
  while (s.clock < cfg.scheduler.t_max && res.records.size() < cfg.max_rounds) {
    res.records.push_back(run_round(s));
    if (cfg.stop_at_target && res.records.back().test_acc >= cfg.target_accuracy) break;
  }
  res.summary = summarize(s, res.records);
  return res;
}

std::string metrics_csv(const std::vector<RoundRecord>& records) {
  std::string out = "round,sim_time_s,test_acc,global_loss,avg_wait_s,traffic_bytes_cum,block_var\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.9g,%.6f,%llu,%.9g\n", r.round, r.sim_time, r.test_acc,
                  r.global_loss, r.avg_wait, static_cast<unsigned long long>(r.traffic_bits / 8), r.block_var);
    out += line;
  }
  return out;
}

std::string summary_json(const Summary& s, const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["scheme"] = s.scheme;
  j["seed"] = s.seed;
  j["target_accuracy"] = cfg.target_accuracy;
  j["completion_time_s"] = s.time_to_target ? nlohmann::ordered_json(*s.time_to_target) : nullptr;
  j["rounds_to_target"] = s.rounds_to_target ? nlohmann::ordered_json(*s.rounds_to_target) : nullptr;
  j["traffic_bytes_to_target"] =
      s.traffic_bits_to_target ? nlohmann::ordered_json(*s.traffic_bits_to_target / 8) : nullptr;
  j["final_accuracy"] = s.final_accuracy;
  j["best_accuracy"] = s.best_accuracy;
  j["traffic_bytes"] = s.traffic_bits / 8;
  j["mean_wait_s"] = s.mean_wait;
  j["rounds"] = s.rounds;
  j["sim_time_s"] = s.sim_time;
  j["final_block_var"] = s.final_block_var;
  j["variance_threshold_exceeded_rounds"] = s.variance_violations;
  j["shard_size"] = s.shard_size;
  j["discarded_samples"] = s.discarded;
  nlohmann::ordered_json c;
  for (const auto& [k, v] : config_entries(cfg)) c[k] = v;
  j["config"] = c;
  return j.dump(2) + "\n";
}

}  // namespace heroes
