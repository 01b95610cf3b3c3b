#include "cer/agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace cer {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kDqn: return "dqn";
    case Algorithm::kPer: return "per";
    case Algorithm::kCer: return "cer";
    case Algorithm::kCerNoContrast: return "cer-nocontrast";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "dqn") return Algorithm::kDqn;
  if (name == "per") return Algorithm::kPer;
  if (name == "cer") return Algorithm::kCer;
  if (name == "cer-nocontrast" || name == "cer_nocontrast") return Algorithm::kCerNoContrast;
  throw std::invalid_argument("unknown algorithm: " + name);
}

void validate(const AgentConfig& config) {
  if (config.gamma < 0.0 || config.gamma > 1.0)
    throw std::invalid_argument("agent: gamma must be in [0, 1]");
  if (config.epsilon_initial < 0.0 || config.epsilon_initial > 1.0)
    throw std::invalid_argument("agent: epsilon_initial must be in [0, 1]");
  if (config.epsilon_decay <= 0.0 || config.epsilon_decay > 1.0)
    throw std::invalid_argument("agent: epsilon_decay must be in (0, 1]");
  if (config.epsilon_floor < 0.0 || config.epsilon_floor > 1.0)
    throw std::invalid_argument("agent: epsilon_floor must be in [0, 1]");
  if (config.delta_threshold <= 0.0 || config.delta_threshold > 1.0)
    throw std::invalid_argument("agent: delta_threshold must be in (0, 1]");
  if (config.psi <= 0.0 || config.psi >= 50.0)
    throw std::invalid_argument("agent: psi must be in (0, 50)");
  if (config.kappa == 0) throw std::invalid_argument("agent: kappa must be positive");
  if (config.learning_rate <= 0.0) throw std::invalid_argument("agent: bad learning rate");
  if (config.episodes < 1) throw std::invalid_argument("agent: episodes must be >= 1");
  if (config.warmup_episodes < 0) throw std::invalid_argument("agent: negative warmup");
  if (config.fit_steps < 1) throw std::invalid_argument("agent: fit_steps must be >= 1");
  if (config.mem_capacity == 0 || config.cer_capacity == 0)
    throw std::invalid_argument("agent: zero buffer capacity");
  if (config.per.alpha < 0.0) throw std::invalid_argument("agent: per.alpha must be >= 0");
  if (config.per.priority_floor <= 0.0)
    throw std::invalid_argument("agent: per.priority_floor must be positive");
}

int select_action(const std::array<double, 4>& q_values, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("select_action: bad epsilon");
  if (epsilon > 0.0 && rng.uniform() < epsilon) return rng.uniform_int(kNumActions);
  int best = 0;
  for (int a = 1; a < kNumActions; ++a)
    if (q_values[a] > q_values[best]) best = a;
  return best;
}

std::vector<double> mc_targets(std::span<const double> rewards, double gamma) {
  std::vector<double> targets(rewards.size());
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    targets[i] = acc;
  }
  return targets;
}

void compute_targets(EpisodeTrace& trace, double gamma, bool undiscounted_terminal) {
  if (trace.outcome == Outcome::kOngoing)
    throw std::invalid_argument("compute_targets: episode not finished");

  std::vector<double> rewards;
  rewards.reserve(trace.steps.size());
  for (const EpisodeStep& s : trace.steps) rewards.push_back(s.reward);
  trace.episode_return = 0.0;
  for (double r : rewards) trace.episode_return += r;

  if (undiscounted_terminal && trace.terminal_bonus != 0.0) {
    rewards.back() -= trace.terminal_bonus;
    trace.targets = mc_targets(rewards, gamma);
    for (double& tau : trace.targets) tau += trace.terminal_bonus;
  } else {
    trace.targets = mc_targets(rewards, gamma);
  }
}

Trainer::Trainer(AgentConfig agent_config, GridConfig grid_config)
    : cfg_(agent_config),
      grid_(std::move(grid_config)),
      rng_(agent_config.seed),
      params_(MlpParams::zeros(1)),
      adam_(AdamState::init(1, agent_config.learning_rate)),
      mem_(agent_config.mem_capacity),
      cer_(agent_config.cer_capacity),
      per_(agent_config.mem_capacity, agent_config.per.alpha, agent_config.per.priority_floor),
      epsilon_(agent_config.epsilon_initial) {
  validate(cfg_);
  validate(grid_);
  params_ = MlpParams::init(grid_.state_dim(), rng_);
  adam_ = AdamState::init(grid_.state_dim(), cfg_.learning_rate);
}

EpisodeTrace Trainer::run_episode(int* cer_admitted) {
  EpisodeTrace trace;
  GridState state = reset(grid_);
  StateVec encoded = encode(state, grid_);

  while (true) {
    const auto q = forward(params_, encoded.view());
    const int action = select_action(q, epsilon_, rng_);
    const StepResult result = step(state, static_cast<Action>(action), grid_);
    StateVec next_encoded = encode(result.next_state, grid_);
    trace.steps.push_back({encoded, action, result.reward, next_encoded});
    state = result.next_state;
    encoded = next_encoded;
    if (result.done) {
      trace.outcome = result.outcome;
      if (result.outcome == Outcome::kGoalReached)
        trace.terminal_bonus = grid_.terminal_rewards.at(visit_pattern(state));
      break;
    }
  }

  compute_targets(trace, cfg_.gamma, cfg_.undiscounted_terminal);

  std::vector<Transition> transitions;
  transitions.reserve(trace.steps.size());
  for (size_t t = 0; t < trace.steps.size(); ++t) {
    transitions.push_back({trace.steps[t].state, trace.steps[t].action, trace.targets[t],
                           episode_index_, static_cast<int>(t)});
  }

  int admitted = 0;
  switch (cfg_.algorithm) {
    case Algorithm::kPer:
      for (Transition& t : transitions) per_.push(std::move(t));
      break;
    case Algorithm::kDqn:
      for (Transition& t : transitions) mem_.push(std::move(t));
      break;
    case Algorithm::kCer:
    case Algorithm::kCerNoContrast: {
      // The episode enters the main buffer first so the percentile gate and
      // the contrastive lookup both see it.
      for (const Transition& t : transitions) mem_.push(t);
      static thread_local std::vector<StateVec> next_states;
      next_states.clear();
      for (const EpisodeStep& s : trace.steps) next_states.push_back(s.next_state);
      admitted = admit_episode(transitions, next_states, cfg_.delta_threshold, cfg_.psi, mem_,
                               cer_, cfg_.algorithm == Algorithm::kCer, cfg_.contrastive_tol);
      break;
    }
  }
  if (cer_admitted != nullptr) *cer_admitted = admitted;
  return trace;
}

double Trainer::beta_now() const {
  const auto& p = cfg_.per;
  if (cfg_.episodes <= 1) return p.beta_end;
  const double frac = static_cast<double>(episode_index_) / (cfg_.episodes - 1);
  return p.beta_start + (p.beta_end - p.beta_start) * std::min(1.0, frac);
}

double Trainer::train_once() {
  static thread_local std::vector<const Transition*> items;
  static thread_local std::vector<double> weights;
  items.clear();
  weights.clear();
  items.reserve(cfg_.kappa);

  std::vector<size_t> per_slots;
  if (cfg_.algorithm == Algorithm::kPer) {
    const PerBuffer::Drawn drawn = per_.sample(cfg_.kappa, beta_now(), rng_);
    per_slots = drawn.indices;
    weights = drawn.weights;
    for (size_t slot : per_slots) items.push_back(&per_[slot]);
  } else if (cfg_.algorithm == Algorithm::kDqn) {
    for (size_t i = 0; i < cfg_.kappa; ++i) items.push_back(&mem_.sample(rng_));
  } else {
    AssembledBatch batch = assemble_batch(mem_, cer_, cfg_.kappa, epsilon_, rng_);
    items = std::move(batch.items);
  }

  // Freeze the fit targets: the taken action regresses to its return, the
  // other outputs to the network's own pre-fit predictions.
  static thread_local std::vector<FitSample> batch;
  batch.clear();
  batch.reserve(items.size());
  double loss = 0.0;
  for (size_t i = 0; i < items.size(); ++i) {
    const Transition& t = *items[i];
    const double w = weights.empty() ? 1.0 : weights[i];
    FitSample s;
    s.state = t.state.view();
    s.target = forward(params_, s.state);
    const double err = s.target[t.action] - t.target;
    loss += w * err * err;
    s.target[t.action] = t.target;
    s.weight = w;
    batch.push_back(s);
  }
  loss /= static_cast<double>(items.size());

  for (int step = 0; step < cfg_.fit_steps; ++step) {
    LossGrads lg = fit_loss_and_grads(params_, batch);
    adam_step(params_, adam_, lg.grads);
  }

  if (cfg_.algorithm == Algorithm::kPer) {
    // Refresh priorities with the errors the updated network makes.
    static thread_local std::vector<double> errors;
    errors.clear();
    errors.reserve(per_slots.size());
    for (size_t slot : per_slots) {
      const Transition& t = per_[slot];
      const auto q = forward(params_, t.state.view());
      errors.push_back(std::abs(q[t.action] - t.target));
    }
    per_.update(per_slots, errors);
  }
  return loss;
}

RunMetrics Trainer::run(std::span<const ProbeRequest> probes) {
  const auto start = std::chrono::steady_clock::now();

  RunMetrics metrics;
  metrics.returns.reserve(cfg_.episodes);
  for (const ProbeRequest& p : probes)
    metrics.probes.push_back({p.name, p.action_a, p.action_b, {}, {}});

  for (episode_index_ = 0; episode_index_ < cfg_.episodes; ++episode_index_) {
    int admitted = 0;
    const EpisodeTrace trace = run_episode(&admitted);
    const double loss = episode_index_ >= cfg_.warmup_episodes ? train_once() : 0.0;

    metrics.returns.push_back(trace.episode_return);
    metrics.losses.push_back(loss);
    metrics.epsilons.push_back(epsilon_);
    metrics.mem_sizes.push_back(cfg_.algorithm == Algorithm::kPer ? per_.size() : mem_.size());
    metrics.cer_sizes.push_back(cer_.size());
    metrics.cer_admitted.push_back(admitted);
    for (size_t i = 0; i < probes.size(); ++i) {
      const auto q = forward(params_, probes[i].state.view());
      metrics.probes[i].a.push_back(q[probes[i].action_a]);
      metrics.probes[i].b.push_back(q[probes[i].action_b]);
    }

    decay_epsilon();
  }

  const GreedyResult greedy = greedy_rollout();
  metrics.final_greedy_return = greedy.episode_return;
  metrics.final_greedy_outcome = greedy.outcome;
  metrics.final_greedy_visited_w1 = greedy.visited_w1;
  metrics.final_greedy_visited_w2 = greedy.visited_w2;

  metrics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return metrics;
}

Trainer::GreedyResult Trainer::greedy_rollout() const {
  GreedyResult result;
  GridState state = reset(grid_);
  while (true) {
    const auto q = forward(params_, encode(state, grid_).view());
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (q[a] > q[best]) best = a;
    const StepResult r = step(state, static_cast<Action>(best), grid_);
    result.episode_return += r.reward;
    state = r.next_state;
    if (r.done) {
      result.outcome = r.outcome;
      result.visited_w1 = state.v1;
      result.visited_w2 = state.v2;
      return result;
    }
  }
}

}  // namespace cer
