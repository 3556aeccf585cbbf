#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct SimRun {
  int status = -1;
  std::string output;  // stdout and stderr
};

SimRun run_sim(const std::string& args) {
  const std::string cmd = std::string(HEROES_SIM_PATH) + " " + args + " 2>&1";
  SimRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  r.status = pclose(pipe);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "heroes_cli_test";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << body;
  return p;
}

const char* kSmall =
    "[experiment]\nscheme = heroes\nseed = 3\nclients = 6\nparticipants = 3\nmax_rounds = 5\nstop_at_target = false\n"
    "[model]\nhidden = 4\nmax_width = 2\nrank = 3\n"
    "[data]\nclasses = 3\nper_class = 40\ndim = 4\n"
    "[train]\nbatch_size = 8\nnum_probes = 2\n";

}  // namespace

TEST(Cli, MissingConfigNamesTheFlag) {
  const SimRun r = run_sim("");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("--config"), std::string::npos) << r.output;
}

TEST(Cli, BadConfigReportsKeyAndExitsNonzero) {
  const fs::path cfg = write_config("bad.conf", std::string(kSmall) + "[model]\nwidht = 2\n");
  const SimRun r = run_sim("--config " + cfg.string());
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("model.widht"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("line"), std::string::npos) << r.output;
}

TEST(Cli, WritesOutputsAndRerunsByteIdentical) {
  const fs::path cfg = write_config("small.conf", kSmall);
  const fs::path out_a = fs::temp_directory_path() / "heroes_cli_test" / "a";
  const fs::path out_b = fs::temp_directory_path() / "heroes_cli_test" / "b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  const SimRun a = run_sim("--config " + cfg.string() + " --out " + out_a.string());
  const SimRun b = run_sim("--config " + cfg.string() + " --scheme heroes --seed 3 --out " + out_b.string());
  ASSERT_EQ(a.status, 0) << a.output;
  ASSERT_EQ(b.status, 0) << b.output;

  const std::string csv = slurp(out_a / "metrics.csv");
  EXPECT_EQ(csv.rfind("round,sim_time_s,test_acc,global_loss,avg_wait_s,traffic_bytes_cum,block_var\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_EQ(csv, slurp(out_b / "metrics.csv"));
  // summaries differ only in the echoed output_dir
  auto without_out_dir = [](std::string text) {
    const auto at = text.find("\"output_dir\"");
    return at == std::string::npos ? text : text.erase(at, text.find('\n', at) - at);
  };
  EXPECT_EQ(without_out_dir(slurp(out_a / "summary.json")), without_out_dir(slurp(out_b / "summary.json")));
}

TEST(Cli, OverridesChangeTheRun) {
  const fs::path cfg = write_config("small.conf", kSmall);
  const fs::path out = fs::temp_directory_path() / "heroes_cli_test" / "fedavg";
  const SimRun r = run_sim("--config " + cfg.string() + " --scheme fedavg --seed 4 --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.output;
  const std::string summary = slurp(out / "summary.json");
  EXPECT_NE(summary.find("\"scheme\": \"fedavg\""), std::string::npos);
  EXPECT_NE(summary.find("\"seed\": 4"), std::string::npos);
  EXPECT_NE(run_sim("--config " + cfg.string() + " --scheme bogus").status, 0);
}

TEST(Cli, ReferenceConfigParses) {
  const SimRun r = run_sim("--config " + std::string(HEROES_SOURCE_DIR) + "/configs/reference.conf --help");
  EXPECT_EQ(r.status, 0);
}
