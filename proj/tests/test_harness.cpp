#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cer/harness.hpp"

using namespace cer;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("cer_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommandResult {
  int exit_code;
  std::string output;
};

CommandResult run_command(const std::string& cmd) {
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string output;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe) != nullptr) output += buf;
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), output};
}

ExperimentConfig tiny_experiment(const fs::path& out, uint64_t extra_seed = 1) {
  ExperimentConfig cfg = default_experiment(1);
  cfg.algorithms = {Algorithm::kDqn, Algorithm::kCer};
  cfg.seeds = {0, extra_seed};
  cfg.agent.episodes = 8;
  cfg.agent.kappa = 64;
  cfg.grid.timeout = 30;
  cfg.out_dir = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("smoothing truncates at the boundaries") {
  std::vector<double> ramp(101);
  for (int i = 0; i <= 100; ++i) ramp[i] = i;
  const auto s = smooth(ramp, 25);
  CHECK(s[50] == doctest::Approx(50.0));    // mean of 25..75
  CHECK(s[0] == doctest::Approx(12.5));     // mean of 0..25
  CHECK(s[100] == doctest::Approx(87.5));   // mean of 75..100

  const std::vector<double> constant(40, 3.2);
  for (double v : smooth(constant, 25)) CHECK(v == doctest::Approx(3.2));

  const std::vector<double> any{1.0, 9.0, -4.0};
  CHECK(smooth(any, 0) == any);
  CHECK_THROWS_AS(smooth(any, -1), std::invalid_argument);
}

TEST_CASE("seed bands are a tenth of the population deviation") {
  const std::vector<std::vector<double>> two{{0.0, 4.0}, {2.0, 4.0}};
  const Band b = band_across_seeds(two);
  CHECK(b.mean[0] == doctest::Approx(1.0));
  CHECK(b.band[0] == doctest::Approx(0.1));  // population std of {0,2} is 1
  CHECK(b.mean[1] == doctest::Approx(4.0));
  CHECK(b.band[1] == doctest::Approx(0.0));

  const Band solo = band_across_seeds({{1.0, 2.0, 3.0}});
  for (double v : solo.band) CHECK(v == 0.0);

  for (double v : b.band) CHECK(v >= 0.0);
}

TEST_CASE("built-in experiments carry the published parameters") {
  const ExperimentConfig e1 = default_experiment(1);
  CHECK(e1.grid.size == 8);
  CHECK(e1.grid.timeout == 100);
  CHECK(e1.agent.epsilon_decay == 0.995);
  CHECK(e1.grid.terminal_rewards.at(VisitPattern::kNone) == 1.0);
  CHECK(e1.grid.terminal_rewards.at(VisitPattern::kOnlyW1) == 10.0);
  CHECK(e1.grid.waypoints.size() == 1);
  CHECK(e1.seeds.size() == 10);

  const ExperimentConfig e2 = default_experiment(2);
  CHECK(e2.grid.size == 8);
  CHECK(e2.grid.timeout == 160);
  CHECK(e2.agent.epsilon_decay == 0.995);
  CHECK(e2.grid.terminal_rewards.at(VisitPattern::kOnlyW1) == 2.0);
  CHECK(e2.grid.terminal_rewards.at(VisitPattern::kOnlyW2) == 2.0);
  CHECK(e2.grid.terminal_rewards.at(VisitPattern::kBoth) == 10.0);
  CHECK(e2.grid.waypoints.size() == 2);

  const ExperimentConfig e3 = default_experiment(3);
  CHECK(e3.grid.size == 12);
  CHECK(e3.grid.timeout == 240);
  CHECK(e3.agent.epsilon_decay == 0.999);
  CHECK(e3.grid.terminal_rewards.at(VisitPattern::kOnlyW1) == 10.0);

  const ExperimentConfig e4 = default_experiment(4);
  CHECK(e4.grid.size == 8);
  CHECK(e4.grid.timeout == 160);
  CHECK(e4.agent.epsilon_decay == 0.999);
  CHECK(e4.grid.terminal_rewards.at(VisitPattern::kOnlyW1) == -1.0);
  CHECK(e4.grid.terminal_rewards.at(VisitPattern::kBoth) == 10.0);

  const ExperimentConfig e5 = default_experiment(5);
  CHECK(e5.grid.size == e3.grid.size);
  CHECK(e5.grid.timeout == e3.grid.timeout);
  REQUIRE(e5.probes.size() == 2);
  CHECK(e5.probes[0].cell == Cell{3, 7});  // just below the waypoint
  CHECK_FALSE(e5.probes[0].v1);
  CHECK(e5.probes[1].cell == Cell{4, 8});  // just to its right
  CHECK(e5.probes[1].v1);

  CHECK_THROWS_AS(default_experiment(0), std::invalid_argument);
  CHECK_THROWS_AS(default_experiment(6), std::invalid_argument);

  // Shared hyperparameters.
  CHECK(e1.agent.gamma == 0.99);
  CHECK(e1.agent.kappa == 4096);
  CHECK(e1.agent.delta_threshold == 0.99);
  CHECK(e1.agent.psi == 10.0);
  CHECK(e1.agent.learning_rate == 0.01);
  CHECK(e1.agent.mem_capacity == size_t{1} << 16);
  CHECK(e1.agent.per.alpha == 0.6);
  CHECK(e1.agent.per.beta_start == 0.4);
  CHECK(e1.agent.per.beta_end == 1.0);
}

TEST_CASE("probe requests encode the probed cell") {
  const GridConfig g = default_experiment(3).grid;
  ProbeSpec spec{"below_w1", {3, 7}, false, false, 0, 3};
  const ProbeRequest req = to_probe_request(spec, g);
  CHECK(req.state[0] == doctest::Approx(3.0 / 11.0).epsilon(1e-12));
  CHECK(req.state[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
  CHECK(req.state[2] == 0.0);

  spec.cell = {99, 0};
  CHECK_THROWS_AS(to_probe_request(spec, g), std::invalid_argument);
}

TEST_CASE("probe values under a zero network are zero") {
  const GridConfig g = default_experiment(3).grid;
  const MlpParams zeros = MlpParams::zeros(g.state_dim());
  for (const ProbeSpec& spec : default_probes(g)) {
    const ProbeRequest req = to_probe_request(spec, g);
    const auto q = forward(zeros, req.state.view());
    CHECK(q[req.action_a] == 0.0);
    CHECK(q[req.action_b] == 0.0);
  }
}

TEST_CASE("json overrides replace defaults and reject unknown keys") {
  ExperimentConfig cfg = default_experiment(1);
  const auto overrides = nlohmann::json::parse(R"({
    "episodes": 77,
    "algorithms": ["cer", "dqn"],
    "seeds": [3, 4, 5],
    "jobs": 1,
    "agent": {"kappa": 128, "epsilon_decay": 0.9},
    "per": {"alpha": 0.5},
    "grid": {"timeout": 50}
  })");
  apply_overrides(cfg, overrides);
  CHECK(cfg.agent.episodes == 77);
  CHECK(cfg.algorithms == std::vector<Algorithm>{Algorithm::kCer, Algorithm::kDqn});
  CHECK(cfg.seeds == std::vector<uint64_t>{3, 4, 5});
  CHECK(cfg.agent.kappa == 128);
  CHECK(cfg.agent.epsilon_decay == 0.9);
  CHECK(cfg.agent.per.alpha == 0.5);
  CHECK(cfg.grid.timeout == 50);
  CHECK_NOTHROW(validate(cfg));

  ExperimentConfig other = default_experiment(1);
  CHECK_THROWS_AS(apply_overrides(other, nlohmann::json::parse(R"({"typo": 1})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_overrides(other, nlohmann::json::parse(R"({"agent": {"lr": 1}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_overrides(other, nlohmann::json::parse(R"({"experiment": 2})")),
                  std::invalid_argument);

  // Overriding the grid in experiment 5 re-derives the default probes.
  ExperimentConfig e5 = default_experiment(5);
  apply_overrides(e5, nlohmann::json::parse(R"({"grid": {"waypoints": [[5, 6]]}})"));
  REQUIRE(e5.probes.size() == 2);
  CHECK(e5.probes[0].cell == Cell{5, 5});

  // Invariant-violating overrides fail validation.
  ExperimentConfig bad = default_experiment(1);
  apply_overrides(bad, nlohmann::json::parse(R"({"agent": {"psi": 60.0}})"));
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("csv numbers use nine significant digits") {
  CHECK(format_value(9.86) == "9.86");
  CHECK(format_value(-0.01) == "-0.01");
  CHECK(format_value(0.123456789123) == "0.123456789");
  CHECK(format_value(12345.6789) == "12345.6789");
  CHECK(format_value(0.0) == "0");
}

TEST_CASE("a small experiment writes runs, aggregates and a manifest") {
  const fs::path out = temp_dir("small_experiment");
  const ExperimentConfig cfg = tiny_experiment(out);
  const ExperimentResults results = run_experiment(cfg);

  CHECK(results.all_ok());
  REQUIRE(results.runs.size() == 4);

  for (const char* name : {"dqn_seed0.csv", "dqn_seed1.csv", "cer_seed0.csv", "cer_seed1.csv",
                           "agg_dqn.csv", "agg_cer.csv", "manifest.json"})
    CHECK(fs::exists(out / name));

  // Run CSV: header plus one row per episode.
  std::ifstream run_csv(out / "cer_seed0.csv");
  std::string line;
  std::getline(run_csv, line);
  CHECK(line == "episode,return,smoothed_return,loss,epsilon,cer_size");
  int rows = 0;
  while (std::getline(run_csv, line)) ++rows;
  CHECK(rows == cfg.agent.episodes);

  // Aggregate CSV mirrors the episode count.
  std::ifstream agg_csv(out / "agg_cer.csv");
  std::getline(agg_csv, line);
  CHECK(line == "episode,mean,band");
  rows = 0;
  while (std::getline(agg_csv, line)) ++rows;
  CHECK(rows == cfg.agent.episodes);

  // Manifest echoes the effective configuration and the oracle value.
  const auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
  CHECK(manifest["experiment"] == 1);
  CHECK(manifest["agent"]["episodes"] == 8);
  CHECK(manifest["agent"]["kappa"] == 64);
  CHECK(manifest["grid"]["timeout"] == 30);
  CHECK(manifest["seeds"].size() == 2);
  CHECK(manifest["runs"].size() == 4);
  for (const auto& r : manifest["runs"]) CHECK(r["status"] == "ok");
  // Timeout 30 still fits the 14-step waypoint route.
  CHECK(std::abs(manifest["oracle"]["optimal_return"].get<double>() - 9.86) < 1e-12);

  fs::remove_all(out);
}

TEST_CASE("reruns with the same config are byte-identical") {
  const fs::path out1 = temp_dir("rerun_a");
  const fs::path out2 = temp_dir("rerun_b");
  run_experiment(tiny_experiment(out1));
  run_experiment(tiny_experiment(out2));
  for (const char* name : {"dqn_seed0.csv", "dqn_seed1.csv", "cer_seed0.csv", "cer_seed1.csv",
                           "agg_dqn.csv", "agg_cer.csv"})
    CHECK(read_file(out1 / name) == read_file(out2 / name));
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("plotdata converts aggregates into gnuplot columns") {
  const fs::path out = temp_dir("plotdata");
  run_experiment(tiny_experiment(out));
  const int written = emit_plotdata(out.string(), "");
  CHECK(written == 2);
  REQUIRE(fs::exists(out / "agg_cer.dat"));
  std::ifstream dat(out / "agg_cer.dat");
  std::string line;
  std::getline(dat, line);
  CHECK(line == "# agg_cer");
  std::getline(dat, line);
  CHECK(line == "# episode mean band");
  std::getline(dat, line);
  CHECK(line.rfind("0 ", 0) == 0);
  CHECK(line.find(',') == std::string::npos);

  CHECK_THROWS_AS(emit_plotdata((out / "missing").string(), ""), std::runtime_error);
  fs::remove_all(out);
}

#ifdef CER_CLI_PATH
TEST_CASE("cli oracle prints the published optima") {
  const std::string cli = CER_CLI_PATH;
  CHECK(run_command(cli + " oracle --experiment 1").output == "9.86\n");
  CHECK(run_command(cli + " oracle --experiment 2").output == "9.72\n");
  CHECK(run_command(cli + " oracle --experiment 3").output == "9.78\n");
  CHECK(run_command(cli + " oracle --experiment 1").exit_code == 0);
}

TEST_CASE("cli rejects unknown experiments and flags with a usage error") {
  const std::string cli = CER_CLI_PATH;
  CHECK(run_command(cli + " run --experiment 6").exit_code == 1);
  CHECK(run_command(cli + " run --experiment 1 --bogus-flag 3").exit_code == 1);
  CHECK(run_command(cli + " oracle").exit_code == 1);
  CHECK(run_command(cli + " run --experiment 1 --config /nonexistent.json").exit_code == 1);
}

TEST_CASE("cli run writes a csv per algorithm-seed pair") {
  const fs::path out = temp_dir("cli_run");
  const fs::path config = out / "override.json";
  {
    std::ofstream cfg(config);
    cfg << R"({"agent": {"kappa": 64}, "grid": {"timeout": 30}})";
  }
  const std::string cli = CER_CLI_PATH;
  const CommandResult r = run_command(cli + " run --experiment 1 --algorithms cer --seeds 0" +
                                      " --episodes 6 --out " + (out / "res").string() +
                                      " --config " + config.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "res" / "cer_seed0.csv"));
  CHECK(fs::exists(out / "res" / "agg_cer.csv"));
  CHECK(fs::exists(out / "res" / "manifest.json"));

  // Effective values are echoed into the manifest.
  const auto manifest = nlohmann::json::parse(read_file(out / "res" / "manifest.json"));
  CHECK(manifest["agent"]["kappa"] == 64);
  CHECK(manifest["agent"]["episodes"] == 6);
  CHECK(manifest["algorithms"].size() == 1);
  fs::remove_all(out);
}
#endif
