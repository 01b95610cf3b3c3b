#include "cer/gridworld.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace cer {

std::string to_string(Action a) {
  switch (a) {
    case Action::kUp: return "up";
    case Action::kDown: return "down";
    case Action::kLeft: return "left";
    case Action::kRight: return "right";
  }
  return "?";
}

Action parse_action(const std::string& name) {
  if (name == "up") return Action::kUp;
  if (name == "down") return Action::kDown;
  if (name == "left") return Action::kLeft;
  if (name == "right") return Action::kRight;
  throw std::invalid_argument("unknown action: " + name);
}

std::string to_string(VisitPattern p) {
  switch (p) {
    case VisitPattern::kNone: return "none";
    case VisitPattern::kOnlyW1: return "only_w1";
    case VisitPattern::kOnlyW2: return "only_w2";
    case VisitPattern::kBoth: return "both";
  }
  return "?";
}

VisitPattern parse_visit_pattern(const std::string& name) {
  if (name == "none") return VisitPattern::kNone;
  if (name == "only_w1") return VisitPattern::kOnlyW1;
  if (name == "only_w2") return VisitPattern::kOnlyW2;
  if (name == "both") return VisitPattern::kBoth;
  throw std::invalid_argument("unknown visit pattern: " + name);
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kOngoing: return "ongoing";
    case Outcome::kGoalReached: return "goal_reached";
    case Outcome::kTimedOut: return "timed_out";
  }
  return "?";
}

namespace {

bool in_bounds(const Cell& c, int size) {
  return c.x >= 0 && c.x < size && c.y >= 0 && c.y < size;
}

}  // namespace

void validate(const GridConfig& config) {
  if (config.size < 2) throw std::invalid_argument("grid: size must be >= 2");
  if (config.waypoints.size() > 2) throw std::invalid_argument("grid: at most two waypoints");
  if (!in_bounds(config.start, config.size)) throw std::invalid_argument("grid: start out of bounds");
  if (!in_bounds(config.goal, config.size)) throw std::invalid_argument("grid: goal out of bounds");
  if (config.start == config.goal) throw std::invalid_argument("grid: start equals goal");
  for (size_t i = 0; i < config.waypoints.size(); ++i) {
    const Cell& w = config.waypoints[i];
    if (!in_bounds(w, config.size)) throw std::invalid_argument("grid: waypoint out of bounds");
    if (w == config.start || w == config.goal)
      throw std::invalid_argument("grid: waypoint overlaps start or goal");
    for (size_t j = i + 1; j < config.waypoints.size(); ++j)
      if (w == config.waypoints[j]) throw std::invalid_argument("grid: duplicate waypoint");
  }
  if (config.timeout < 1) throw std::invalid_argument("grid: timeout must be >= 1");

  std::vector<VisitPattern> expected{VisitPattern::kNone};
  if (config.waypoints.size() >= 1) expected.push_back(VisitPattern::kOnlyW1);
  if (config.waypoints.size() == 2) {
    expected.push_back(VisitPattern::kOnlyW2);
    expected.push_back(VisitPattern::kBoth);
  }
  if (config.terminal_rewards.size() != expected.size())
    throw std::invalid_argument("grid: terminal reward map does not match waypoint count");
  for (VisitPattern p : expected)
    if (config.terminal_rewards.find(p) == config.terminal_rewards.end())
      throw std::invalid_argument("grid: missing terminal reward for pattern " + to_string(p));
}

GridState reset(const GridConfig& config, uint64_t /*seed*/) {
  GridState s;
  s.x = config.start.x;
  s.y = config.start.y;
  return s;
}

bool is_terminal(const GridState& state, const GridConfig& config) {
  if (state.x == config.goal.x && state.y == config.goal.y) return true;
  return state.steps_elapsed >= config.timeout;
}

VisitPattern visit_pattern(const GridState& state) {
  if (state.v1 && state.v2) return VisitPattern::kBoth;
  if (state.v1) return VisitPattern::kOnlyW1;
  if (state.v2) return VisitPattern::kOnlyW2;
  return VisitPattern::kNone;
}

StepResult step(const GridState& state, Action action, const GridConfig& config) {
  if (is_terminal(state, config)) throw std::invalid_argument("step: state is terminal");

  GridState next = state;
  // Clamped move: walking into an edge leaves the position unchanged but
  // still consumes the step.
  next.x = std::clamp(state.x + dx(action), 0, config.size - 1);
  next.y = std::clamp(state.y + dy(action), 0, config.size - 1);
  next.steps_elapsed = state.steps_elapsed + 1;

  if (!config.waypoints.empty() && Cell{next.x, next.y} == config.waypoints[0]) next.v1 = true;
  if (config.waypoints.size() == 2 && Cell{next.x, next.y} == config.waypoints[1]) next.v2 = true;

  StepResult result;
  result.reward = config.step_reward;
  if (next.x == config.goal.x && next.y == config.goal.y) {
    result.outcome = Outcome::kGoalReached;
    result.reward += config.terminal_rewards.at(visit_pattern(next));
  } else if (next.steps_elapsed >= config.timeout) {
    result.outcome = Outcome::kTimedOut;
  }
  result.done = result.outcome != Outcome::kOngoing;
  result.next_state = next;
  return result;
}

StateVec encode(const GridState& state, const GridConfig& config) {
  const double denom = config.size - 1;
  StateVec v{state.x / denom, state.y / denom};
  if (!config.waypoints.empty()) v.push_back(state.v1 ? 1.0 : 0.0);
  if (config.waypoints.size() == 2) v.push_back(state.v2 ? 1.0 : 0.0);
  return v;
}

std::map<VisitPattern, int> shortest_path_lengths(const GridConfig& config) {
  validate(config);
  const int n = config.size;
  const int cells = n * n;
  const int states = cells * 4;  // position x flag mask (bit0 = w1, bit1 = w2)
  auto index = [n](int x, int y, int mask) { return (mask * n + y) * n + x; };

  std::vector<int> dist(states, -1);
  std::deque<int> queue;
  const int start = index(config.start.x, config.start.y, 0);
  dist[start] = 0;
  queue.push_back(start);

  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    const int x = cur % n;
    const int y = (cur / n) % n;
    const int mask = cur / cells;
    // Goal entry ends the episode, so goal states have no successors.
    if (x == config.goal.x && y == config.goal.y) continue;

    for (int a = 0; a < kNumActions; ++a) {
      const Action act = static_cast<Action>(a);
      const int nx = std::clamp(x + dx(act), 0, n - 1);
      const int ny = std::clamp(y + dy(act), 0, n - 1);
      int nmask = mask;
      if (!config.waypoints.empty() && Cell{nx, ny} == config.waypoints[0]) nmask |= 1;
      if (config.waypoints.size() == 2 && Cell{nx, ny} == config.waypoints[1]) nmask |= 2;
      const int nidx = index(nx, ny, nmask);
      if (dist[nidx] < 0) {
        dist[nidx] = dist[cur] + 1;
        queue.push_back(nidx);
      }
    }
  }

  auto mask_pattern = [](int mask) {
    switch (mask) {
      case 1: return VisitPattern::kOnlyW1;
      case 2: return VisitPattern::kOnlyW2;
      case 3: return VisitPattern::kBoth;
      default: return VisitPattern::kNone;
    }
  };

  std::map<VisitPattern, int> lengths;
  for (int mask = 0; mask < 4; ++mask) {
    const int d = dist[index(config.goal.x, config.goal.y, mask)];
    if (d >= 0 && config.terminal_rewards.count(mask_pattern(mask)))
      lengths[mask_pattern(mask)] = d;
  }
  return lengths;
}

double optimal_return(const GridConfig& config) {
  const auto lengths = shortest_path_lengths(config);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [pattern, steps] : lengths) {
    if (steps > config.timeout) continue;
    best = std::max(best, config.terminal_rewards.at(pattern) + config.step_reward * steps);
  }
  if (!std::isfinite(best)) return config.step_reward * config.timeout;
  return best;
}

}  // namespace cer
