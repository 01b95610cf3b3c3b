#pragma once

#include <string>
#include <vector>

#include "cer/agent.hpp"
#include "cer/gridworld.hpp"
#include "cer/metrics.hpp"

#include <json.hpp>

namespace cer {

// Figure smoothing half-width (episodes) used for all reported curves.
inline constexpr int kSmoothWindow = 25;
inline constexpr double kBandScale = 0.10;

// A probed grid cell plus the two action values to record.
struct ProbeSpec {
  std::string name;
  Cell cell;
  bool v1 = false;
  bool v2 = false;
  int action_a = 0;
  int action_b = 0;
};

ProbeRequest to_probe_request(const ProbeSpec& spec, const GridConfig& grid);

// The two standard probes around the first waypoint: the cell below it
// before visiting (up vs right), and the cell to its right after visiting
// (right vs down).
std::vector<ProbeSpec> default_probes(const GridConfig& grid);

struct ExperimentConfig {
  int id = 1;
  GridConfig grid;
  AgentConfig agent;  // per-run algorithm/seed are filled in by the runner
  std::vector<Algorithm> algorithms{Algorithm::kDqn, Algorithm::kPer, Algorithm::kCer,
                                    Algorithm::kCerNoContrast};
  std::vector<uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<ProbeSpec> probes;
  std::string out_dir;
  int jobs = 0;  // 0 = hardware concurrency
  bool dump_cer = false;
};

// Built-in experiment definitions 1..5. 5 shares 3's task and adds probes.
ExperimentConfig default_experiment(int id);

// Applies a JSON override document on top of `config`. Unknown keys throw.
void apply_overrides(ExperimentConfig& config, const nlohmann::json& overrides);

void validate(const ExperimentConfig& config);

struct RunRecord {
  Algorithm algorithm;
  uint64_t seed = 0;
  std::string file;  // per-run csv, relative to out_dir
  bool ok = false;
  std::string error;
  RunMetrics metrics;
};

struct ExperimentResults {
  ExperimentConfig config;
  std::vector<RunRecord> runs;
  bool all_ok() const;
};

// Trains every algorithm x seed combination (bounded worker pool), writes
// per-run CSVs, per-algorithm aggregate CSVs and a manifest under
// config.out_dir. A failed seed is recorded and skipped in aggregates.
ExperimentResults run_experiment(const ExperimentConfig& config);

// 9-significant-digit formatting used for every CSV number, so reruns are
// byte-stable.
std::string format_value(double x);

// Converts aggregate CSVs under `in_dir` into whitespace-separated .dat
// files for gnuplot. Returns the number of files written.
int emit_plotdata(const std::string& in_dir, const std::string& out_dir);

}  // namespace cer
