#include "heroes/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "heroes/errors.hpp"

namespace heroes {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) throw ConfigError("expected a non-negative integer, got '" + s + "'");
  return v;
}

std::int64_t to_i64(const std::string& s) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

double to_double(const std::string& s) {
  if (s.empty()) throw ConfigError("expected a number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + f(xs[i]);
  return out;
}

std::string block_rule_name(BlockRule r) { return r == BlockRule::kRandom ? "random" : "least_trained"; }

struct KeyDef {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define HR_SIZE(key, field)                                                          \
  KeyDef {                                                                           \
    key, [](ExperimentConfig& c, const std::string& v) { c.field = to_u64(v); },     \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }            \
  }
#define HR_INT(key, field)                                                           \
  KeyDef {                                                                           \
    key, [](ExperimentConfig& c, const std::string& v) { c.field = to_i64(v); },     \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }            \
  }
#define HR_REAL(key, field)                                                          \
  KeyDef {                                                                           \
    key, [](ExperimentConfig& c, const std::string& v) { c.field = to_double(v); },  \
        [](const ExperimentConfig& c) { return fmt_double(c.field); }                \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      {"output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
       [](const ExperimentConfig& c) { return c.output_dir; }},
      {"experiment.scheme", [](ExperimentConfig& c, const std::string& v) { c.scheme = parse_scheme(v); },
       [](const ExperimentConfig& c) { return scheme_name(c.scheme); }},
      HR_SIZE("experiment.seed", seed),
      HR_SIZE("experiment.clients", clients),
      HR_SIZE("experiment.participants", participants),
      HR_REAL("experiment.target_accuracy", target_accuracy),
      HR_SIZE("experiment.max_rounds", max_rounds),
      {"experiment.stop_at_target", [](ExperimentConfig& c, const std::string& v) { c.stop_at_target = to_bool(v); },
       [](const ExperimentConfig& c) { return std::string(c.stop_at_target ? "true" : "false"); }},
      {"experiment.block_selection",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "least_trained") c.block_selection = BlockRule::kLeastTrained;
         else if (v == "random") c.block_selection = BlockRule::kRandom;
         else throw ConfigError("expected least_trained or random, got '" + v + "'");
       },
       [](const ExperimentConfig& c) { return block_rule_name(c.block_selection); }},
      {"model.hidden",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.hidden.clear();
         for (const auto& x : split_list(v)) c.model.hidden.push_back(to_u64(x));
       },
       [](const ExperimentConfig& c) {
         return join(c.model.hidden, [](std::size_t x) { return std::to_string(x); });
       }},
      HR_SIZE("model.max_width", model.max_width),
      HR_SIZE("model.rank", model.rank),
      HR_REAL("model.init_scale", model.init_scale),
      HR_SIZE("data.classes", data.classes),
      HR_SIZE("data.per_class", data.per_class),
      HR_SIZE("data.dim", data.dim),
      HR_REAL("data.spread", data.spread),
      HR_REAL("partition.gamma", partition.gamma),
      HR_SIZE("partition.shard_size", partition.shard_size),
      HR_REAL("scheduler.rho", scheduler.rho),
      HR_REAL("scheduler.delta", scheduler.delta),
      HR_REAL("scheduler.mu_max", scheduler.mu_max),
      HR_REAL("scheduler.t_max", scheduler.t_max),
      HR_REAL("scheduler.epsilon", scheduler.epsilon),
      HR_INT("scheduler.h_search_max", scheduler.h_search_max),
      HR_INT("scheduler.tau_cap", scheduler.tau_cap),
      HR_REAL("scheduler.beta2", beta2),
      HR_REAL("train.lr", train.eta),
      HR_SIZE("train.batch_size", train.batch_size),
      HR_INT("train.tau0", train.tau0),
      HR_SIZE("train.num_probes", train.num_probes),
      HR_REAL("train.adp_round_budget", train.adp_round_budget),
      {"env.tier_means",
       [](ExperimentConfig& c, const std::string& v) {
         c.env.tier_means.clear();
         for (const auto& x : split_list(v)) c.env.tier_means.push_back(to_double(x));
       },
       [](const ExperimentConfig& c) { return join(c.env.tier_means, fmt_double); }},
      HR_REAL("env.tier_std_frac", env.tier_std_frac),
      HR_REAL("env.upload_min_mbps", env.upload_min_mbps),
      HR_REAL("env.upload_max_mbps", env.upload_max_mbps),
      HR_REAL("env.download_min_mbps", env.download_min_mbps),
      HR_REAL("env.download_max_mbps", env.download_max_mbps),
      HR_REAL("env.planner_noise", env.planner_noise),
  };
  return table;
}

#undef HR_SIZE
#undef HR_INT
#undef HR_REAL

const KeyDef* find_key(const std::string& name) {
  for (const auto& k : key_table())
    if (k.name == name) return &k;
  return nullptr;
}

[[noreturn]] void fail(const std::string& key, const std::string& msg) {
  throw ConfigError("key '" + key + "': " + msg);
}

}  // namespace

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kHeroes: return "heroes";
    case Scheme::kFedAvg: return "fedavg";
    case Scheme::kAdp: return "adp";
    case Scheme::kHeteroFl: return "heterofl";
    case Scheme::kFlanc: return "flanc";
  }
  return "?";
}

Scheme parse_scheme(const std::string& tag) {
  for (Scheme s : {Scheme::kHeroes, Scheme::kFedAvg, Scheme::kAdp, Scheme::kHeteroFl, Scheme::kFlanc})
    if (scheme_name(s) == tag) return s;
  throw ConfigError("unknown scheme '" + tag + "' (expected heroes, fedavg, adp, heterofl or flanc)");
}

void ExperimentConfig::validate() const {
  if (clients == 0) fail("experiment.clients", "must be positive");
  if (participants == 0 || participants > clients) fail("experiment.participants", "must lie in [1, clients]");
  if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0)) fail("experiment.target_accuracy", "must lie in [0, 1]");
  if (model.hidden.empty()) fail("model.hidden", "needs at least one hidden layer");
  for (auto h : model.hidden)
    if (h == 0) fail("model.hidden", "widths must be positive");
  if (model.max_width == 0) fail("model.max_width", "must be positive");
  if (model.rank == 0) fail("model.rank", "must be positive");
  if (!(model.init_scale > 0.0)) fail("model.init_scale", "must be positive");
  if (scheduler.max_width != model.max_width) fail("model.max_width", "scheduler and model disagree");
  if (data.classes < 2) fail("data.classes", "need at least two classes");
  if (data.per_class == 0) fail("data.per_class", "must be positive");
  if (data.dim == 0) fail("data.dim", "must be positive");
  if (!(data.spread >= 0.0)) fail("data.spread", "must be non-negative");
  if (partition.gamma < 100.0 / static_cast<double>(data.classes) - 1e-9 || partition.gamma > 100.0)
    fail("partition.gamma", "must lie in [100 / classes, 100]");
  if (!(scheduler.rho > 0.0)) fail("scheduler.rho", "must be positive");
  if (!(scheduler.delta > 0.0)) fail("scheduler.delta", "must be positive");
  if (!(scheduler.mu_max > 0.0)) fail("scheduler.mu_max", "must be positive");
  if (!(scheduler.t_max >= 0.0)) fail("scheduler.t_max", "must be non-negative");
  if (!(scheduler.epsilon > 0.0)) fail("scheduler.epsilon", "must be positive");
  if (scheduler.h_search_max < 1) fail("scheduler.h_search_max", "must be >= 1");
  if (scheduler.tau_cap < 1) fail("scheduler.tau_cap", "must be >= 1");
  if (!(beta2 >= 0.0)) fail("scheduler.beta2", "must be non-negative");
  if (!(train.eta > 0.0)) fail("train.lr", "must be positive");
  if (train.batch_size == 0) fail("train.batch_size", "must be positive");
  if (train.tau0 < 1) fail("train.tau0", "must be >= 1");
  if (train.num_probes == 0) fail("train.num_probes", "must be positive");
  if (!(train.adp_round_budget > 0.0)) fail("train.adp_round_budget", "must be positive");
  if (env.tier_means.empty()) fail("env.tier_means", "needs at least one tier");
  for (double m : env.tier_means)
    if (!(m > 0.0)) fail("env.tier_means", "must be positive");
  if (!(env.tier_std_frac >= 0.0)) fail("env.tier_std_frac", "must be non-negative");
  if (!(env.upload_min_mbps > 0.0) || env.upload_max_mbps < env.upload_min_mbps)
    fail("env.upload_min_mbps", "need 0 < upload_min <= upload_max");
  if (env.download_min_mbps < env.upload_max_mbps || env.download_max_mbps < env.download_min_mbps)
    fail("env.download_min_mbps", "download range must lie above the upload range");
  if (!(env.planner_noise >= 0.0)) fail("env.planner_noise", "must be non-negative");
  if (output_dir.empty()) fail("output_dir", "must not be empty");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  for (int line_no = 1; std::getline(in, raw); ++line_no) {
    const auto where = "line " + std::to_string(line_no) + ": ";
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "missing key");
    const std::string full = section.empty() ? key : section + "." + key;
    const KeyDef* def = find_key(full);
    if (!def) throw ConfigError(where + "unknown key '" + full + "'");
    if (!seen.insert(full).second) throw ConfigError(where + "duplicate key '" + full + "'");
    try {
      def->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + "key '" + full + "': " + e.what());
    }
  }
  for (const char* required : {"experiment.scheme", "experiment.seed"})
    if (!seen.count(required)) throw ConfigError(std::string("missing required key '") + required + "'");
  cfg.scheduler.max_width = cfg.model.max_width;
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : key_table()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : key_table()) {
    const auto dot = k.name.find('.');
    const std::string sec = dot == std::string::npos ? "" : k.name.substr(0, dot);
    const std::string key = dot == std::string::npos ? k.name : k.name.substr(dot + 1);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += key + " = " + k.get(cfg) + "\n";
  }
  return out;
}

}  // namespace heroes
