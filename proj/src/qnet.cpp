#include "cer/qnet.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace cer {

namespace {
constexpr int kH1 = MlpParams::kHidden1;
constexpr int kH2 = MlpParams::kHidden2;
constexpr int kOut = MlpParams::kOutputs;
}  // namespace

MlpParams MlpParams::zeros(int d_in) {
  if (d_in < 1 || d_in > StateVec::kMaxDim)
    throw std::invalid_argument("MlpParams: bad input dimension");
  MlpParams p;
  p.d_in = d_in;
  p.w1.assign(static_cast<size_t>(kH1) * d_in, 0.0);
  p.b1.assign(kH1, 0.0);
  p.w2.assign(static_cast<size_t>(kH2) * kH1, 0.0);
  p.b2.assign(kH2, 0.0);
  p.w3.assign(static_cast<size_t>(kOut) * kH2, 0.0);
  p.b3.assign(kOut, 0.0);
  return p;
}

MlpParams MlpParams::init(int d_in, Rng& rng) {
  MlpParams p = zeros(d_in);
  auto fill = [&rng](std::vector<double>& w, int fan_in) {
    const double limit = std::sqrt(6.0 / fan_in);
    for (double& x : w) x = rng.uniform(-limit, limit);
  };
  fill(p.w1, d_in);
  fill(p.w2, kH1);
  fill(p.w3, kH2);
  return p;
}

std::array<std::span<double>, 6> MlpParams::tensors() {
  return {std::span<double>(w1), std::span<double>(b1), std::span<double>(w2),
          std::span<double>(b2), std::span<double>(w3), std::span<double>(b3)};
}

std::array<std::span<const double>, 6> MlpParams::tensors() const {
  return {std::span<const double>(w1), std::span<const double>(b1), std::span<const double>(w2),
          std::span<const double>(b2), std::span<const double>(w3), std::span<const double>(b3)};
}

namespace {

struct Activations {
  std::array<double, kH1> z1, h1;
  std::array<double, kH2> z2, h2;
  std::array<double, kOut> q;
};

void run_forward(const MlpParams& p, std::span<const double> s, Activations& act) {
  for (int i = 0; i < kH1; ++i) {
    double z = p.b1[i];
    const double* row = &p.w1[static_cast<size_t>(i) * p.d_in];
    for (int j = 0; j < p.d_in; ++j) z += row[j] * s[j];
    act.z1[i] = z;
    act.h1[i] = z > 0.0 ? z : 0.0;
  }
  for (int i = 0; i < kH2; ++i) {
    double z = p.b2[i];
    const double* row = &p.w2[static_cast<size_t>(i) * kH1];
    for (int j = 0; j < kH1; ++j) z += row[j] * act.h1[j];
    act.z2[i] = z;
    act.h2[i] = z > 0.0 ? z : 0.0;
  }
  for (int i = 0; i < kOut; ++i) {
    double z = p.b3[i];
    const double* row = &p.w3[static_cast<size_t>(i) * kH2];
    for (int j = 0; j < kH2; ++j) z += row[j] * act.h2[j];
    act.q[i] = z;
  }
}

}  // namespace

std::array<double, kOut> forward(const MlpParams& params, std::span<const double> state) {
  if (static_cast<int>(state.size()) != params.d_in)
    throw std::invalid_argument("forward: state dimension mismatch");
  Activations act;
  run_forward(params, state, act);
  return act.q;
}

LossGrads loss_and_grads(const MlpParams& params, std::span<const Sample> batch) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");

  LossGrads out;
  out.grads = MlpParams::zeros(params.d_in);
  MlpParams& g = out.grads;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  Activations act;
  for (const Sample& sample : batch) {
    if (static_cast<int>(sample.state.size()) != params.d_in)
      throw std::invalid_argument("loss_and_grads: state dimension mismatch");
    if (sample.action < 0 || sample.action >= kOut)
      throw std::invalid_argument("loss_and_grads: action out of range");
    if (sample.weight <= 0.0) throw std::invalid_argument("loss_and_grads: non-positive weight");

    run_forward(params, sample.state, act);
    const double err = act.q[sample.action] - sample.target;
    out.loss += inv_b * sample.weight * err * err;

    // Only the taken action's output carries gradient.
    const double gq = 2.0 * inv_b * sample.weight * err;

    g.b3[sample.action] += gq;
    {
      double* row = &g.w3[static_cast<size_t>(sample.action) * kH2];
      for (int j = 0; j < kH2; ++j) row[j] += gq * act.h2[j];
    }

    std::array<double, kH2> d2;
    {
      const double* row = &params.w3[static_cast<size_t>(sample.action) * kH2];
      for (int j = 0; j < kH2; ++j) d2[j] = act.z2[j] > 0.0 ? gq * row[j] : 0.0;
    }
    for (int i = 0; i < kH2; ++i) {
      if (d2[i] == 0.0) continue;
      g.b2[i] += d2[i];
      double* row = &g.w2[static_cast<size_t>(i) * kH1];
      for (int j = 0; j < kH1; ++j) row[j] += d2[i] * act.h1[j];
    }

    std::array<double, kH1> d1{};
    for (int i = 0; i < kH2; ++i) {
      if (d2[i] == 0.0) continue;
      const double* row = &params.w2[static_cast<size_t>(i) * kH1];
      for (int j = 0; j < kH1; ++j) d1[j] += d2[i] * row[j];
    }
    for (int i = 0; i < kH1; ++i) {
      if (act.z1[i] <= 0.0 || d1[i] == 0.0) continue;
      g.b1[i] += d1[i];
      double* row = &g.w1[static_cast<size_t>(i) * params.d_in];
      for (int j = 0; j < params.d_in; ++j) row[j] += d1[i] * sample.state[j];
    }
  }
  return out;
}

LossGrads fit_loss_and_grads(const MlpParams& params, std::span<const FitSample> batch) {
  if (batch.empty()) throw std::invalid_argument("fit_loss_and_grads: empty batch");

  LossGrads out;
  out.grads = MlpParams::zeros(params.d_in);
  MlpParams& g = out.grads;
  const double inv = 1.0 / (static_cast<double>(batch.size()) * kOut);

  Activations act;
  for (const FitSample& sample : batch) {
    if (static_cast<int>(sample.state.size()) != params.d_in)
      throw std::invalid_argument("fit_loss_and_grads: state dimension mismatch");
    if (sample.weight <= 0.0)
      throw std::invalid_argument("fit_loss_and_grads: non-positive weight");

    run_forward(params, sample.state, act);

    std::array<double, kOut> gq;
    for (int k = 0; k < kOut; ++k) {
      const double err = act.q[k] - sample.target[k];
      out.loss += inv * sample.weight * err * err;
      gq[k] = 2.0 * inv * sample.weight * err;
    }

    std::array<double, kH2> d2{};
    for (int k = 0; k < kOut; ++k) {
      g.b3[k] += gq[k];
      double* row = &g.w3[static_cast<size_t>(k) * kH2];
      const double* w_row = &params.w3[static_cast<size_t>(k) * kH2];
      for (int j = 0; j < kH2; ++j) {
        row[j] += gq[k] * act.h2[j];
        d2[j] += gq[k] * w_row[j];
      }
    }
    for (int i = 0; i < kH2; ++i)
      if (act.z2[i] <= 0.0) d2[i] = 0.0;

    std::array<double, kH1> d1{};
    for (int i = 0; i < kH2; ++i) {
      if (d2[i] == 0.0) continue;
      g.b2[i] += d2[i];
      double* row = &g.w2[static_cast<size_t>(i) * kH1];
      const double* w_row = &params.w2[static_cast<size_t>(i) * kH1];
      for (int j = 0; j < kH1; ++j) {
        row[j] += d2[i] * act.h1[j];
        d1[j] += d2[i] * w_row[j];
      }
    }
    for (int i = 0; i < kH1; ++i) {
      if (act.z1[i] <= 0.0 || d1[i] == 0.0) continue;
      g.b1[i] += d1[i];
      double* row = &g.w1[static_cast<size_t>(i) * params.d_in];
      for (int j = 0; j < params.d_in; ++j) row[j] += d1[i] * sample.state[j];
    }
  }
  return out;
}

AdamState AdamState::init(int d_in, double lr) {
  AdamState a;
  a.m = MlpParams::zeros(d_in);
  a.v = MlpParams::zeros(d_in);
  a.lr = lr;
  return a;
}

void adam_step(MlpParams& params, AdamState& adam, const MlpParams& grads) {
  if (params.d_in != grads.d_in || params.d_in != adam.m.d_in)
    throw std::invalid_argument("adam_step: shape mismatch");

  adam.t += 1;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));

  auto p = params.tensors();
  auto gs = grads.tensors();
  auto ms = adam.m.tensors();
  auto vs = adam.v.tensors();
  for (int k = 0; k < 6; ++k) {
    std::span<double> pt = p[k];
    std::span<const double> gt = gs[k];
    std::span<double> mt = ms[k];
    std::span<double> vt = vs[k];
    if (gt.size() != pt.size()) throw std::invalid_argument("adam_step: shape mismatch");
    for (size_t i = 0; i < pt.size(); ++i) {
      const double g = gt[i];
      if (!std::isfinite(g)) throw std::domain_error("adam_step: non-finite gradient");
      mt[i] = adam.beta1 * mt[i] + (1.0 - adam.beta1) * g;
      vt[i] = adam.beta2 * vt[i] + (1.0 - adam.beta2) * g * g;
      const double m_hat = mt[i] / bc1;
      const double v_hat = vt[i] / bc2;
      pt[i] -= adam.lr * m_hat / (std::sqrt(v_hat) + adam.eps);
    }
  }
}

namespace {
constexpr const char* kSnapshotMagic = "cer-mlp";
constexpr int kSnapshotVersion = 1;
}  // namespace

void save_params(const MlpParams& params, std::ostream& out) {
  out << kSnapshotMagic << " " << kSnapshotVersion << "\n";
  out << params.d_in << "\n";
  out.precision(17);
  for (auto t : params.tensors()) {
    out << t.size();
    for (double x : t) out << " " << x;
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_params: write failed");
}

MlpParams load_params(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (!in || magic != kSnapshotMagic || version != kSnapshotVersion)
    throw std::runtime_error("load_params: unrecognized snapshot header");
  int d_in = 0;
  in >> d_in;
  if (!in || d_in < 1 || d_in > StateVec::kMaxDim)
    throw std::runtime_error("load_params: bad input dimension");
  MlpParams p = MlpParams::zeros(d_in);
  for (auto t : p.tensors()) {
    size_t n = 0;
    in >> n;
    if (!in || n != t.size()) throw std::runtime_error("load_params: tensor size mismatch");
    for (size_t i = 0; i < n; ++i) in >> t[i];
  }
  if (!in) throw std::runtime_error("load_params: truncated snapshot");
  return p;
}

}  // namespace cer
