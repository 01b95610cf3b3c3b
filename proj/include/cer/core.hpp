#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace cer {

inline constexpr int kNumActions = 4;

enum class Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

inline int dx(Action a) {
  switch (a) {
    case Action::kLeft: return -1;
    case Action::kRight: return 1;
    default: return 0;
  }
}

inline int dy(Action a) {
  switch (a) {
    case Action::kUp: return 1;
    case Action::kDown: return -1;
    default: return 0;
  }
}

std::string to_string(Action a);
Action parse_action(const std::string& name);

// Encoded observation vector. At most 4 components on these tasks
// (normalized x, normalized y, and up to two visit flags). Unused tail
// entries stay zero so defaulted equality works on the whole array.
class StateVec {
 public:
  static constexpr int kMaxDim = 4;

  StateVec() = default;
  StateVec(std::initializer_list<double> xs) {
    if (xs.size() > kMaxDim) throw std::invalid_argument("StateVec: too many components");
    for (double x : xs) data_[n_++] = x;
  }

  void push_back(double x) {
    if (n_ >= kMaxDim) throw std::invalid_argument("StateVec: full");
    data_[n_++] = x;
  }

  int size() const { return n_; }
  double operator[](int i) const { return data_[i]; }
  double& operator[](int i) { return data_[i]; }
  std::span<const double> view() const { return {data_.data(), static_cast<size_t>(n_)}; }

  bool operator==(const StateVec&) const = default;

 private:
  std::array<double, kMaxDim> data_{};
  int n_ = 0;
};

// 2-norm between encoded states; the deviation measure used for
// significant-transition detection.
inline double l2_distance(const StateVec& a, const StateVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("l2_distance: dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Seeded generator with explicit uniform mappings so that a run's random
// choices depend only on the seed and the draw sequence, not on library
// distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
  }

  size_t uniform_index(size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_index: empty range");
    return static_cast<size_t>(next_u64() % static_cast<uint64_t>(n));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cer
