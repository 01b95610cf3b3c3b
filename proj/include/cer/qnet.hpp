#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "cer/core.hpp"

namespace cer {

// Fully connected d_in -> 32 -> 8 -> 4 network, rectified hidden units,
// linear outputs. Weights are row-major [out][in].
struct MlpParams {
  static constexpr int kHidden1 = 32;
  static constexpr int kHidden2 = 8;
  static constexpr int kOutputs = 4;

  int d_in = 3;
  std::vector<double> w1, b1, w2, b2, w3, b3;

  static MlpParams zeros(int d_in);
  // Fan-in scaled uniform init, weights in +-sqrt(6/fan_in), biases zero.
  static MlpParams init(int d_in, Rng& rng);

  std::array<std::span<double>, 6> tensors();
  std::array<std::span<const double>, 6> tensors() const;
};

std::array<double, MlpParams::kOutputs> forward(const MlpParams& params,
                                                std::span<const double> state);

struct Sample {
  std::span<const double> state;
  int action = 0;
  double target = 0.0;
  double weight = 1.0;  // importance weight; 1 outside PER
};

struct LossGrads {
  double loss = 0.0;
  MlpParams grads;
};

// Weighted MSE on the taken action's output only:
//   loss = (1/B) * sum_i w_i * (Q(s_i)[a_i] - target_i)^2
// Gradients are exact and accumulated in batch order.
LossGrads loss_and_grads(const MlpParams& params, std::span<const Sample> batch);

struct FitSample {
  std::span<const double> state;
  std::array<double, 4> target{};
  double weight = 1.0;
};

// Weighted MSE over all four outputs, averaged over batch and outputs:
//   loss = (1/(4B)) * sum_i w_i * sum_a (Q(s_i)[a] - target_i[a])^2
// Used for fitting toward frozen per-sample target vectors.
LossGrads fit_loss_and_grads(const MlpParams& params, std::span<const FitSample> batch);

struct AdamState {
  MlpParams m, v;
  long t = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(int d_in, double lr);
};

// Bias-corrected Adam update; throws std::domain_error on non-finite
// gradient components.
void adam_step(MlpParams& params, AdamState& adam, const MlpParams& grads);

// Versioned plain-text snapshot, full double precision.
void save_params(const MlpParams& params, std::ostream& out);
MlpParams load_params(std::istream& in);

}  // namespace cer
