#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace eqcorr {

/// h = c1 * sqrt(noise_var * (max(1, log(l_delta p / (p - 2s)^2)) + loglog_term)).
struct BandwidthRule {
  double c1 = 1.0;
  double l_delta = std::numbers::e;
  double loglog_term = 0.0;
};

struct ModeEstimate {
  double mu_hat = 0.0;
  double lo = 0.0;  // window [lo, hi] = [mu_hat - h, mu_hat + h]
  double hi = 0.0;
  std::size_t count = 0;
  double h_used = 0.0;
};

inline double bandwidth(std::size_t p, std::size_t s, double noise_var, const BandwidthRule& rule = {}) {
  if (s < 1 || 2 * s >= p) throw std::invalid_argument("bandwidth: requires 1 <= s < p/2");
  if (!(rule.c1 > 0.0) || !(rule.l_delta >= 1.0) || !(rule.loglog_term >= 0.0))
    throw std::invalid_argument("bandwidth: invalid rule constants");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("bandwidth: noise_var must be >= 0");
  const auto pd = static_cast<double>(p);
  const double gap = pd - 2.0 * static_cast<double>(s);
  const double log_term = std::max(1.0, std::log(rule.l_delta * pd / (gap * gap)));
  return rule.c1 * std::sqrt(noise_var * (log_term + rule.loglog_term));
}

namespace detail {

inline ModeEstimate mode_of_sorted(std::span<const double> y, double h) {
  const std::size_t n = y.size();
  ModeEstimate est;
  est.h_used = h;
  if (h == 0.0) {
    // Majority value; the first longest run is the smallest value on ties.
    std::size_t best_start = 0, best_len = 0;
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && y[j] == y[i]) ++j;
      if (j - i > best_len) {
        best_len = j - i;
        best_start = i;
      }
      i = j;
    }
    est.mu_hat = y[best_start];
    est.lo = est.hi = est.mu_hat;
    est.count = best_len;
    return est;
  }
  // For each left end i, j is the last index with y[j] <= y[i] + 2h.
  std::size_t best_i = 0, best_j = 0, best_count = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (j < i) j = i;
    while (j + 1 < n && y[j + 1] <= y[i] + 2.0 * h) ++j;
    const std::size_t count = j - i + 1;
    if (count > best_count) {
      best_count = count;
      best_i = i;
      best_j = j;
    }
  }
  est.mu_hat = 0.5 * (y[best_i] + y[best_j]);
  est.lo = est.mu_hat - h;
  est.hi = est.mu_hat + h;
  est.count = best_count;
  return est;
}

}  // namespace detail

/// Maximizer of the box-kernel density estimate with half-width h.
///
/// Returns the midpoint of the points covered by the leftmost maximum-count
/// window of width 2h. For h = 0 returns the most frequent exact value.
inline ModeEstimate kernel_mode(std::span<const double> y, double h) {
  if (y.empty()) throw std::invalid_argument("kernel_mode: empty input");
  if (!(h >= 0.0) || !std::isfinite(h)) throw std::invalid_argument("kernel_mode: h must be finite and >= 0");
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  return detail::mode_of_sorted(sorted, h);
}

/// Kernel mode of (mean(x) - x_i), i.e. without the decorrelation noise.
inline ModeEstimate kernel_mode_correlated(std::span<const double> x, double h) {
  if (x.empty()) throw std::invalid_argument("kernel_mode_correlated: empty input");
  double sum = 0.0;
  for (double v : x) sum += v;
  const double x_bar = sum / static_cast<double>(x.size());
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x_bar - x[i];
  return kernel_mode(z, h);
}

/// Lower median: order statistic ceil(n/2), 1-indexed.
inline double sample_median(std::span<const double> y) {
  if (y.empty()) throw std::invalid_argument("sample_median: empty input");
  std::vector<double> tmp(y.begin(), y.end());
  const std::size_t k = (tmp.size() - 1) / 2;
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(k), tmp.end());
  return tmp[k];
}

}  // namespace eqcorr
