#pragma once

#include <span>
#include <string>
#include <vector>

#include "cer/core.hpp"
#include "cer/gridworld.hpp"

namespace cer {

// A state/action pair whose Q-values are recorded after every episode.
struct ProbeRequest {
  std::string name;
  StateVec state;
  int action_a = 0;
  int action_b = 0;
};

struct RunMetrics {
  std::vector<double> returns;
  std::vector<double> losses;
  std::vector<double> epsilons;
  std::vector<size_t> mem_sizes;
  std::vector<size_t> cer_sizes;
  std::vector<int> cer_admitted;

  struct ProbeSeries {
    std::string name;
    int action_a = 0;
    int action_b = 0;
    std::vector<double> a;
    std::vector<double> b;
  };
  std::vector<ProbeSeries> probes;

  double wall_seconds = 0.0;

  // Greedy rollout with the trained network, recorded after the last episode.
  double final_greedy_return = 0.0;
  Outcome final_greedy_outcome = Outcome::kOngoing;
  bool final_greedy_visited_w1 = false;
  bool final_greedy_visited_w2 = false;

  size_t episodes() const { return returns.size(); }
};

// Centered moving average over +-window episodes, truncated at the ends.
// window = 0 is the identity.
std::vector<double> smooth(std::span<const double> series, int window);

struct Band {
  std::vector<double> mean;
  std::vector<double> band;  // 0.10 * population std across seeds
};

// Per-episode mean and band across seed series (all the same length).
// A single series yields a zero band.
Band band_across_seeds(const std::vector<std::vector<double>>& per_seed, double scale = 0.10);

}  // namespace cer
