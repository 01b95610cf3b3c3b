#include "cer/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace cer {

std::vector<double> smooth(std::span<const double> series, int window) {
  if (window < 0) throw std::invalid_argument("smooth: negative window");
  const int n = static_cast<int>(series.size());
  std::vector<double> out(series.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - window);
    const int hi = std::min(n - 1, i + window);
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) sum += series[j];
    out[i] = sum / (hi - lo + 1);
  }
  return out;
}

Band band_across_seeds(const std::vector<std::vector<double>>& per_seed, double scale) {
  if (per_seed.empty()) throw std::invalid_argument("band_across_seeds: no series");
  const size_t n = per_seed[0].size();
  for (const auto& s : per_seed)
    if (s.size() != n) throw std::invalid_argument("band_across_seeds: length mismatch");

  Band out;
  out.mean.resize(n);
  out.band.resize(n);
  const double k = static_cast<double>(per_seed.size());
  for (size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (const auto& s : per_seed) mean += s[i];
    mean /= k;
    double var = 0.0;
    for (const auto& s : per_seed) var += (s[i] - mean) * (s[i] - mean);
    var /= k;  // population variance
    out.mean[i] = mean;
    out.band[i] = scale * std::sqrt(var);
  }
  return out;
}

}  // namespace cer
