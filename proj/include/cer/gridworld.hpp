#pragma once

#include <map>
#include <string>
#include <vector>

#include "cer/core.hpp"

namespace cer {

// Which waypoints have been visited before reaching the goal. Determines
// the terminal reward paid on goal entry.
enum class VisitPattern : int { kNone = 0, kOnlyW1 = 1, kOnlyW2 = 2, kBoth = 3 };

std::string to_string(VisitPattern p);
VisitPattern parse_visit_pattern(const std::string& name);

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

// Deterministic N x N navigation task. The agent starts at `start`, moves
// one cell per action (clamped at the edges), and the episode ends on goal
// entry or after `timeout` actions. Visiting waypoint cells flips per-episode
// flags that select which terminal reward is paid at the goal.
struct GridConfig {
  int size = 8;
  Cell start{0, 0};
  Cell goal{7, 7};
  std::vector<Cell> waypoints;  // 0..2 cells
  double step_reward = -0.01;
  int timeout = 100;
  // Total terminal reward per visit pattern (not a delta on top of a base).
  std::map<VisitPattern, double> terminal_rewards{{VisitPattern::kNone, 1.0}};

  int state_dim() const { return 2 + static_cast<int>(waypoints.size()); }
};

// Throws std::invalid_argument when cells overlap, lie outside the grid, or
// the terminal reward map does not match the waypoint count.
void validate(const GridConfig& config);

struct GridState {
  int x = 0;
  int y = 0;
  bool v1 = false;
  bool v2 = false;
  int steps_elapsed = 0;
};

enum class Outcome : int { kOngoing = 0, kGoalReached = 1, kTimedOut = 2 };

std::string to_string(Outcome o);

struct StepResult {
  GridState next_state;
  double reward = 0.0;
  bool done = false;
  Outcome outcome = Outcome::kOngoing;
};

// Seed is reserved for stochastic variants; resets are deterministic.
GridState reset(const GridConfig& config, uint64_t seed = 0);

// Throws std::invalid_argument when `state` is already terminal.
StepResult step(const GridState& state, Action action, const GridConfig& config);

bool is_terminal(const GridState& state, const GridConfig& config);

VisitPattern visit_pattern(const GridState& state);

// (x/(size-1), y/(size-1), v1[, v2]); every component in [0, 1].
StateVec encode(const GridState& state, const GridConfig& config);

// Shortest number of steps from start to goal that ends with each visit
// pattern, ignoring the timeout. Patterns that cannot be realized (e.g. the
// goal is walled off, or a flag combination is unreachable) are absent.
// Paths may not pass through the goal cell since entry ends the episode.
std::map<VisitPattern, int> shortest_path_lengths(const GridConfig& config);

// Best achievable episode return: max over visit patterns reachable within
// the timeout of terminal_reward + step_reward * path_length. If the goal is
// unreachable in time, the best outcome is running out the clock.
double optimal_return(const GridConfig& config);

}  // namespace cer
