#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cer/core.hpp"

namespace cer {

// One stored sample: encoded state, action taken, and the Monte-Carlo
// return-to-go observed from that point.
struct Transition {
  StateVec state;
  int action = 0;
  double target = 0.0;
  int episode_id = 0;
  int step_index = 0;
};

// Fixed-capacity FIFO ring. Storage indices are stable slot numbers; once
// full, each push overwrites the oldest entry.
class TransitionRing {
 public:
  static constexpr size_t kDefaultCapacity = size_t{1} << 16;

  explicit TransitionRing(size_t capacity = kDefaultCapacity);

  void push(Transition t);
  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }

  const Transition& operator[](size_t slot) const { return data_[slot]; }

  // k = 0 is the most recently inserted entry.
  const Transition& from_newest(size_t k) const;

  const Transition& sample(Rng& rng) const;

 protected:
  std::vector<Transition> data_;
  size_t capacity_;
  size_t cursor_ = 0;  // next write slot
};

// The main experience buffer shared by all algorithms.
class MemBuffer : public TransitionRing {
 public:
  using TransitionRing::TransitionRing;

  void copy_targets(std::vector<double>& out) const;

  // Most recently inserted transition whose state lies within `state_tol`
  // (2-norm) of `state` and whose action differs. On these grids the default
  // tolerance means exact match, visit flags included.
  std::optional<Transition> find_contrastive(const StateVec& state, int action,
                                             double state_tol = 1e-9) const;
};

// Holds only transitions admitted by the deviation/percentile rule plus
// their contrastive partners.
class CerBuffer : public TransitionRing {
 public:
  using TransitionRing::TransitionRing;

  void dump_csv(std::ostream& out) const;
};

// Indices t with ||next_states[t] - states[t]||_2 >= delta_threshold * max
// deviation over the episode. A single-step episode returns {0}; an episode
// of identical deviations returns every index.
std::vector<int> significant_transitions(std::span<const StateVec> states,
                                         std::span<const StateVec> next_states,
                                         double delta_threshold);

struct PercentileCuts {
  double low = 0.0;
  double high = 0.0;
};

// Nearest-rank cuts over all stored targets: low = sorted[ceil(psi/100*N)-1],
// high = sorted[ceil((1-psi/100)*N)-1]. Empty buffer yields no cuts.
std::optional<PercentileCuts> percentile_cuts(const MemBuffer& mem, double psi);

inline bool percentile_gate(double target, const PercentileCuts& cuts) {
  return target >= cuts.high || target <= cuts.low;
}

// True iff `target` sits in the top or bottom psi percent of mem's targets.
bool percentile_gate(double target, const MemBuffer& mem, double psi);

// Episode-end admission: every significant transition whose target passes
// the percentile gate is appended to `cer`, followed by its contrastive
// partner from `mem` when one exists. Returns the number appended.
// `with_contrastive = false` gives the ablation that skips partner lookup.
int admit_episode(std::span<const Transition> episode, std::span<const StateVec> next_states,
                  double delta_threshold, double psi, const MemBuffer& mem, CerBuffer& cer,
                  bool with_contrastive, double state_tol = 1e-9);

// CER share of a training batch: floor((0.25 - 0.15 * epsilon) * kappa),
// i.e. 10% of the batch under full exploration growing to 25% as epsilon
// decays to zero.
size_t cer_quota(size_t kappa, double epsilon);

struct AssembledBatch {
  std::vector<const Transition*> items;  // valid until either buffer is pushed to
  size_t from_cer = 0;
};

// `from_cer = cer_quota(...)` samples uniformly with replacement from `cer`
// (zero when it is empty), remainder uniformly with replacement from `mem`.
AssembledBatch assemble_batch(const MemBuffer& mem, const CerBuffer& cer, size_t kappa,
                              double epsilon, Rng& rng);

// Binary-indexed sum of leaf priorities supporting O(log n) point updates
// and prefix descent. Capacity is rounded up to a power of two.
class SumTree {
 public:
  explicit SumTree(size_t capacity);

  void set(size_t leaf, double value);
  double get(size_t leaf) const { return tree_[cap_ + leaf]; }
  double total() const { return tree_[1]; }
  size_t capacity() const { return cap_; }

  // Leaf whose cumulative-sum interval contains u, for u in [0, total()).
  size_t find_prefix(double u) const;

 private:
  size_t cap_;
  std::vector<double> tree_;
};

// Prioritized replay: transitions sampled in proportion to priority^alpha
// with annealed importance-sampling weights. New entries are inserted at the
// running maximum priority so they are trained on at least once.
class PerBuffer {
 public:
  explicit PerBuffer(size_t capacity = TransitionRing::kDefaultCapacity, double alpha = 0.6,
                     double priority_floor = 1e-3);

  void push(Transition t);
  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  const Transition& operator[](size_t slot) const { return data_[slot]; }

  struct Drawn {
    std::vector<size_t> indices;
    std::vector<double> weights;  // (N * P(i))^-beta, normalized by batch max
  };
  Drawn sample(size_t count, double beta, Rng& rng) const;

  // Sets leaf priorities to (|error| + priority_floor)^alpha.
  void update(std::span<const size_t> indices, std::span<const double> abs_errors);

  double alpha() const { return alpha_; }
  double priority_floor() const { return priority_floor_; }
  double priority(size_t slot) const { return tree_.get(slot); }
  double tree_total() const { return tree_.total(); }

 private:
  std::vector<Transition> data_;
  size_t capacity_;
  size_t cursor_ = 0;
  double alpha_;
  double priority_floor_;
  double max_priority_ = 1.0;  // in leaf units, i.e. already exponentiated
  SumTree tree_;
};

}  // namespace cer
