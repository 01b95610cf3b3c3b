#pragma once

#include <span>
#include <string>
#include <vector>

#include "cer/core.hpp"
#include "cer/gridworld.hpp"
#include "cer/metrics.hpp"
#include "cer/qnet.hpp"
#include "cer/replay.hpp"

namespace cer {

enum class Algorithm : int { kDqn = 0, kPer = 1, kCer = 2, kCerNoContrast = 3 };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct PerParams {
  double alpha = 0.6;
  double beta_start = 0.4;
  double beta_end = 1.0;
  double priority_floor = 1e-3;
};

struct AgentConfig {
  Algorithm algorithm = Algorithm::kDqn;
  double gamma = 0.99;
  double epsilon_initial = 1.0;
  double epsilon_decay = 0.995;  // multiplicative, per episode
  double epsilon_floor = 0.01;
  double delta_threshold = 0.99;  // deviation fraction for significant steps
  double psi = 10.0;              // percentile gate width
  size_t kappa = 4096;            // training batch size
  double learning_rate = 0.01;
  int episodes = 2000;
  // Episodes collected before the first gradient step. Training on the
  // near-uniform returns of the first few episodes reliably kills the small
  // rectifier trunk, so some buffer diversity is required first.
  int warmup_episodes = 30;
  // Adam steps per episode on the assembled batch. Non-taken outputs are
  // held to their pre-fit predictions, which keeps the shared trunk from
  // drifting while the taken action is regressed to its return.
  int fit_steps = 4;
  uint64_t seed = 0;
  size_t mem_capacity = TransitionRing::kDefaultCapacity;
  size_t cer_capacity = TransitionRing::kDefaultCapacity;
  double contrastive_tol = 1e-9;
  // When set, the terminal reward enters every target at full value instead
  // of being discounted with the final step.
  bool undiscounted_terminal = false;
  PerParams per;
};

void validate(const AgentConfig& config);

// Epsilon-greedy: uniform random action with probability epsilon, otherwise
// the argmax with first-index tie-break.
int select_action(const std::array<double, 4>& q_values, double epsilon, Rng& rng);

// Return-to-go targets by reverse accumulation: tau_t = r_{t+1} + gamma * tau_{t+1}.
std::vector<double> mc_targets(std::span<const double> rewards, double gamma);

struct EpisodeStep {
  StateVec state;
  int action = 0;
  double reward = 0.0;
  StateVec next_state;
};

struct EpisodeTrace {
  std::vector<EpisodeStep> steps;
  Outcome outcome = Outcome::kOngoing;
  double terminal_bonus = 0.0;  // terminal reward folded into the last step
  std::vector<double> targets;
  double episode_return = 0.0;  // undiscounted sum of rewards
};

// Fills trace.targets and trace.episode_return.
void compute_targets(EpisodeTrace& trace, double gamma, bool undiscounted_terminal);

// One training run: owns the network, optimizer, buffers and RNG stream.
// Strictly single-threaded and deterministic for a given config.
class Trainer {
 public:
  Trainer(AgentConfig agent_config, GridConfig grid_config);

  // Rolls one episode, computes targets, and applies the algorithm's
  // buffer updates. Returns the trace; `cer_admitted` is the number of
  // transitions the episode added to the CER buffer (0 for DQN/PER).
  EpisodeTrace run_episode(int* cer_admitted = nullptr);

  // One training round: assembles the kappa-sample batch for the algorithm,
  // freezes per-sample target vectors (taken action -> its return, others ->
  // current predictions), and runs `fit_steps` Adam steps toward them. For
  // PER the drawn priorities are refreshed afterwards. Returns the batch's
  // taken-action MSE under the pre-update network.
  double train_once();

  void decay_epsilon() { epsilon_ = std::max(cfg_.epsilon_floor, epsilon_ * cfg_.epsilon_decay); }

  // Full loop: episodes x (run_episode, train_once, probe, decay).
  RunMetrics run(std::span<const ProbeRequest> probes = {});

  // Greedy evaluation episode; no exploration, no buffer writes.
  struct GreedyResult {
    double episode_return = 0.0;
    Outcome outcome = Outcome::kOngoing;
    bool visited_w1 = false;
    bool visited_w2 = false;
  };
  GreedyResult greedy_rollout() const;

  const MlpParams& params() const { return params_; }
  MlpParams& mutable_params() { return params_; }
  const MemBuffer& mem() const { return mem_; }
  const CerBuffer& cer() const { return cer_; }
  const PerBuffer& per() const { return per_; }
  double epsilon() const { return epsilon_; }
  int episode_index() const { return episode_index_; }
  const AgentConfig& config() const { return cfg_; }
  const GridConfig& grid() const { return grid_; }
  Rng& rng() { return rng_; }

 private:
  double beta_now() const;

  AgentConfig cfg_;
  GridConfig grid_;
  Rng rng_;
  MlpParams params_;
  AdamState adam_;
  MemBuffer mem_;
  CerBuffer cer_;
  PerBuffer per_;
  double epsilon_;
  int episode_index_ = 0;
};

}  // namespace cer
