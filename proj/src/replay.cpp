#include "cer/replay.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace cer {

TransitionRing::TransitionRing(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("TransitionRing: zero capacity");
  data_.reserve(std::min(capacity, size_t{1} << 20));
}

void TransitionRing::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
    cursor_ = data_.size() % capacity_;
  } else {
    data_[cursor_] = std::move(t);
    cursor_ = (cursor_ + 1) % capacity_;
  }
}

const Transition& TransitionRing::from_newest(size_t k) const {
  if (k >= data_.size()) throw std::invalid_argument("TransitionRing: index past oldest entry");
  const size_t n = data_.size();
  return data_[(cursor_ + n - 1 - k) % n];
}

const Transition& TransitionRing::sample(Rng& rng) const {
  if (data_.empty()) throw std::invalid_argument("TransitionRing: sample from empty buffer");
  return data_[rng.uniform_index(data_.size())];
}

void MemBuffer::copy_targets(std::vector<double>& out) const {
  out.clear();
  out.reserve(data_.size());
  for (const Transition& t : data_) out.push_back(t.target);
}

std::optional<Transition> MemBuffer::find_contrastive(const StateVec& state, int action,
                                                      double state_tol) const {
  for (size_t k = 0; k < data_.size(); ++k) {
    const Transition& t = from_newest(k);
    if (t.action == action) continue;
    if (t.state.size() != state.size()) continue;
    if (l2_distance(t.state, state) <= state_tol) return t;
  }
  return std::nullopt;
}

void CerBuffer::dump_csv(std::ostream& out) const {
  out << "s0,s1,s2,s3,action,target,episode_id,step_index\n";
  for (size_t k = size(); k-- > 0;) {
    const Transition& t = from_newest(k);  // oldest first
    for (int i = 0; i < StateVec::kMaxDim; ++i) {
      out << (i < t.state.size() ? t.state[i] : 0.0) << ",";
    }
    out << t.action << "," << t.target << "," << t.episode_id << "," << t.step_index << "\n";
  }
}

std::vector<int> significant_transitions(std::span<const StateVec> states,
                                         std::span<const StateVec> next_states,
                                         double delta_threshold) {
  if (states.empty() || states.size() != next_states.size())
    throw std::invalid_argument("significant_transitions: bad episode");
  if (delta_threshold <= 0.0 || delta_threshold > 1.0)
    throw std::invalid_argument("significant_transitions: threshold must be in (0, 1]");

  std::vector<double> deviation(states.size());
  double max_dev = 0.0;
  for (size_t t = 0; t < states.size(); ++t) {
    deviation[t] = l2_distance(states[t], next_states[t]);
    max_dev = std::max(max_dev, deviation[t]);
  }

  std::vector<int> indices;
  for (size_t t = 0; t < states.size(); ++t)
    if (deviation[t] >= delta_threshold * max_dev) indices.push_back(static_cast<int>(t));
  return indices;
}

namespace {

// ceil with a small backoff so that exactly-representable ranks (e.g.
// 0.9 * 10) are not pushed up by floating-point noise.
size_t nearest_rank(double fraction, size_t n) {
  const double raw = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  const auto rank = static_cast<size_t>(std::max(1.0, raw));
  return std::min(rank, n);
}

}  // namespace

std::optional<PercentileCuts> percentile_cuts(const MemBuffer& mem, double psi) {
  if (psi <= 0.0 || psi >= 50.0)
    throw std::invalid_argument("percentile_cuts: psi must be in (0, 50)");
  if (mem.empty()) return std::nullopt;

  static thread_local std::vector<double> scratch;
  mem.copy_targets(scratch);
  const size_t n = scratch.size();
  const size_t low_idx = nearest_rank(psi / 100.0, n) - 1;
  const size_t high_idx = nearest_rank(1.0 - psi / 100.0, n) - 1;

  PercentileCuts cuts;
  std::nth_element(scratch.begin(), scratch.begin() + low_idx, scratch.end());
  cuts.low = scratch[low_idx];
  std::nth_element(scratch.begin(), scratch.begin() + high_idx, scratch.end());
  cuts.high = scratch[high_idx];
  return cuts;
}

bool percentile_gate(double target, const MemBuffer& mem, double psi) {
  const auto cuts = percentile_cuts(mem, psi);
  if (!cuts) return false;
  return percentile_gate(target, *cuts);
}

int admit_episode(std::span<const Transition> episode, std::span<const StateVec> next_states,
                  double delta_threshold, double psi, const MemBuffer& mem, CerBuffer& cer,
                  bool with_contrastive, double state_tol) {
  if (episode.empty()) return 0;
  if (episode.size() != next_states.size())
    throw std::invalid_argument("admit_episode: episode/successor length mismatch");

  const auto cuts = percentile_cuts(mem, psi);
  if (!cuts) return 0;

  static thread_local std::vector<StateVec> states;
  states.clear();
  for (const Transition& t : episode) states.push_back(t.state);

  int admitted = 0;
  for (int t : significant_transitions(states, next_states, delta_threshold)) {
    const Transition& anchor = episode[t];
    if (!percentile_gate(anchor.target, *cuts)) continue;
    cer.push(anchor);
    ++admitted;
    if (!with_contrastive) continue;
    if (auto partner = mem.find_contrastive(anchor.state, anchor.action, state_tol)) {
      cer.push(*partner);
      ++admitted;
    }
  }
  return admitted;
}

size_t cer_quota(size_t kappa, double epsilon) {
  const double share = (0.25 - 0.15 * epsilon) * static_cast<double>(kappa);
  return static_cast<size_t>(std::floor(std::max(0.0, share)));
}

AssembledBatch assemble_batch(const MemBuffer& mem, const CerBuffer& cer, size_t kappa,
                              double epsilon, Rng& rng) {
  if (mem.empty()) throw std::invalid_argument("assemble_batch: empty memory buffer");
  if (kappa == 0) throw std::invalid_argument("assemble_batch: zero batch size");

  AssembledBatch batch;
  batch.items.reserve(kappa);
  batch.from_cer = cer.empty() ? 0 : cer_quota(kappa, epsilon);
  for (size_t i = 0; i < batch.from_cer; ++i) batch.items.push_back(&cer.sample(rng));
  while (batch.items.size() < kappa) batch.items.push_back(&mem.sample(rng));
  return batch;
}

SumTree::SumTree(size_t capacity) {
  if (capacity == 0) throw std::invalid_argument("SumTree: zero capacity");
  cap_ = 1;
  while (cap_ < capacity) cap_ <<= 1;
  tree_.assign(2 * cap_, 0.0);
}

void SumTree::set(size_t leaf, double value) {
  if (leaf >= cap_) throw std::invalid_argument("SumTree: leaf out of range");
  if (!(value >= 0.0)) throw std::invalid_argument("SumTree: negative priority");
  size_t node = cap_ + leaf;
  tree_[node] = value;
  // Recompute sums along the path; parents always equal the sum of their
  // children rather than accumulating incremental deltas.
  for (node >>= 1; node >= 1; node >>= 1) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

size_t SumTree::find_prefix(double u) const {
  size_t node = 1;
  while (node < cap_) {
    const size_t left = 2 * node;
    if (u < tree_[left]) {
      node = left;
    } else {
      u -= tree_[left];
      node = left + 1;
    }
  }
  return node - cap_;
}

PerBuffer::PerBuffer(size_t capacity, double alpha, double priority_floor)
    : capacity_(capacity), alpha_(alpha), priority_floor_(priority_floor), tree_(capacity) {
  if (capacity == 0) throw std::invalid_argument("PerBuffer: zero capacity");
  if (priority_floor <= 0.0) throw std::invalid_argument("PerBuffer: floor must be positive");
  data_.reserve(std::min(capacity, size_t{1} << 20));
}

void PerBuffer::push(Transition t) {
  size_t slot;
  if (data_.size() < capacity_) {
    slot = data_.size();
    data_.push_back(std::move(t));
  } else {
    slot = cursor_;
    data_[slot] = std::move(t);
  }
  cursor_ = (slot + 1) % capacity_;
  tree_.set(slot, max_priority_);
}

PerBuffer::Drawn PerBuffer::sample(size_t count, double beta, Rng& rng) const {
  if (data_.empty()) throw std::invalid_argument("PerBuffer: sample from empty buffer");

  Drawn out;
  out.indices.reserve(count);
  out.weights.reserve(count);
  const double total = tree_.total();
  const double n = static_cast<double>(data_.size());
  double max_w = 0.0;
  for (size_t i = 0; i < count; ++i) {
    const size_t slot = tree_.find_prefix(rng.uniform() * total);
    const double prob = tree_.get(slot) / total;
    const double w = std::pow(n * prob, -beta);
    out.indices.push_back(slot);
    out.weights.push_back(w);
    max_w = std::max(max_w, w);
  }
  for (double& w : out.weights) w /= max_w;
  return out;
}

void PerBuffer::update(std::span<const size_t> indices, std::span<const double> abs_errors) {
  if (indices.size() != abs_errors.size())
    throw std::invalid_argument("PerBuffer::update: length mismatch");
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= data_.size()) throw std::invalid_argument("PerBuffer::update: bad index");
    const double v = std::pow(std::abs(abs_errors[i]) + priority_floor_, alpha_);
    tree_.set(indices[i], v);
    max_priority_ = std::max(max_priority_, v);
  }
}

}  // namespace cer
