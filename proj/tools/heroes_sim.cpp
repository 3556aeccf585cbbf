#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "heroes/config.hpp"
#include "heroes/simulator.hpp"

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Round-based federated learning simulator"};
  std::string config_path, scheme, out_dir;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "experiment config file")->required();
  auto* scheme_opt = app.add_option("--scheme", scheme, "heroes, fedavg, adp, heterofl or flanc (overrides config)");
  auto* seed_opt = app.add_option("--seed", seed, "experiment seed (overrides config)");
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    heroes::ExperimentConfig cfg = heroes::parse_config(config_path);
    if (*scheme_opt) cfg.scheme = heroes::parse_scheme(scheme);
    if (*seed_opt) cfg.seed = seed;
    if (*out_opt) cfg.output_dir = out_dir;
    cfg.validate();

    const heroes::ExperimentResult res = heroes::run_experiment(cfg);
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "metrics.csv", heroes::metrics_csv(res.records));
    write_file(dir / "summary.json", heroes::summary_json(res.summary, cfg));

    const auto& s = res.summary;
    std::printf("%s seed=%llu rounds=%zu sim_time=%.1fs final_acc=%.4f", s.scheme.c_str(),
                static_cast<unsigned long long>(s.seed), s.rounds, s.sim_time, s.final_accuracy);
    if (s.time_to_target) std::printf(" time_to_target=%.1fs", *s.time_to_target);
    std::printf(" mean_wait=%.2fs traffic=%.2fMB\n", s.mean_wait, static_cast<double>(s.traffic_bits) / 8e6);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
