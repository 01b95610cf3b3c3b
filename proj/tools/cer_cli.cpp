// Command-line front end: `run` trains the selected algorithms across seeds,
// `oracle` prints the best achievable return for an experiment's grid, and
// `plotdata` converts aggregate CSVs into gnuplot-ready files.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cer/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config file " + path + ": " + e.what());
  }
}

int resolve_experiment_id(int flag_value, const nlohmann::json& config) {
  if (flag_value > 0) return flag_value;
  if (config.contains("experiment")) return config["experiment"].get<int>();
  throw std::invalid_argument("--experiment is required (or set it in the config file)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive experience replay lab: waypoint-gridworld DQN experiments"};
  app.require_subcommand(1);

  // --- run ---
  auto* run = app.add_subcommand("run", "Train algorithms across seeds and write CSV results");
  int run_experiment_id = -1;
  std::vector<std::string> algorithms;
  std::vector<uint64_t> seeds;
  int episodes = -1;
  std::string out_dir, config_path;
  int jobs = -1;
  bool dump_cer = false;
  run->add_option("--experiment", run_experiment_id, "Experiment id (1..5)");
  run->add_option("--algorithms", algorithms,
                  "Subset of dqn,per,cer,cer-nocontrast (default: all)")
      ->delimiter(',');
  run->add_option("--seeds", seeds, "Seed list (default: 0..9)")->delimiter(',');
  run->add_option("--episodes", episodes, "Episodes per run (overrides the default)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--config", config_path, "JSON config file overriding any default");
  run->add_option("--jobs", jobs, "Worker threads (default: hardware)");
  run->add_flag("--dump-cer", dump_cer, "Also dump final CER buffer contents per run");

  // --- oracle ---
  auto* oracle = app.add_subcommand("oracle", "Print the best achievable episode return");
  int oracle_experiment_id = -1;
  std::string oracle_config_path;
  oracle->add_option("--experiment", oracle_experiment_id, "Experiment id (1..5)");
  oracle->add_option("--config", oracle_config_path, "JSON config file overriding any default");

  // --- plotdata ---
  auto* plotdata = app.add_subcommand("plotdata", "Emit gnuplot-compatible .dat files");
  std::string in_dir, plot_out_dir;
  plotdata->add_option("--in", in_dir, "Directory containing aggregate CSVs")->required();
  plotdata->add_option("--out", plot_out_dir, "Output directory (default: same as --in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (run->parsed()) {
      nlohmann::json overrides = nlohmann::json::object();
      if (!config_path.empty()) overrides = load_config_file(config_path);
      cer::ExperimentConfig cfg =
          cer::default_experiment(resolve_experiment_id(run_experiment_id, overrides));
      cer::apply_overrides(cfg, overrides);
      if (!algorithms.empty()) {
        cfg.algorithms.clear();
        for (const std::string& a : algorithms) cfg.algorithms.push_back(cer::parse_algorithm(a));
      }
      if (run->count("--seeds") > 0) cfg.seeds = seeds;
      if (episodes > 0) cfg.agent.episodes = episodes;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (jobs >= 0) cfg.jobs = jobs;
      if (dump_cer) cfg.dump_cer = true;
      cer::validate(cfg);

      const cer::ExperimentResults results = cer::run_experiment(cfg);
      int failed = 0;
      for (const auto& r : results.runs) {
        if (!r.ok) {
          std::cerr << "run " << cer::to_string(r.algorithm) << " seed " << r.seed
                    << " failed: " << r.error << "\n";
          ++failed;
        }
      }
      std::cout << "wrote " << (results.runs.size() - failed) << "/" << results.runs.size()
                << " runs to " << cfg.out_dir << "\n";
      return failed == 0 ? kExitOk : kExitRuntime;
    }

    if (oracle->parsed()) {
      nlohmann::json overrides = nlohmann::json::object();
      if (!oracle_config_path.empty()) overrides = load_config_file(oracle_config_path);
      cer::ExperimentConfig cfg =
          cer::default_experiment(resolve_experiment_id(oracle_experiment_id, overrides));
      cer::apply_overrides(cfg, overrides);
      std::cout << cer::format_value(cer::optimal_return(cfg.grid)) << "\n";
      return kExitOk;
    }

    if (plotdata->parsed()) {
      const int n = cer::emit_plotdata(in_dir, plot_out_dir);
      std::cout << "wrote " << n << " .dat files\n";
      return n > 0 ? kExitOk : kExitRuntime;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
