#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "eqcorr/core_model.hpp"
#include "eqcorr/rng.hpp"
#include "eqcorr/stats.hpp"

namespace eqcorr {

/// Decorrelated data plus the two views built from it.
///
/// x_tilde = x - x_bar + sqrt(noise_var / p) * xi, where noise_var is 1 - gamma
/// for the equicorrelated model and sigma^2 for the two-groups model. Its
/// coordinates are independent with variance noise_var and mean theta - mean(theta).
struct DecorrelatedViews {
  std::vector<double> x_tilde;
  double x_bar = 0.0;
  double xi = 0.0;
  std::vector<double> y_regression;     // sqrt(p) * x_tilde
  std::vector<double> y_contamination;  // -x_tilde
  double gamma_used = 0.0;
  double noise_var = 0.0;
};

inline DecorrelatedViews decorrelate_with_variance(std::span<const double> x, double noise_var, Rng& rng) {
  if (x.empty()) throw std::invalid_argument("decorrelate: empty input");
  if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) throw std::invalid_argument("noise variance must be finite and >= 0");
  const std::size_t p = x.size();
  const auto pd = static_cast<double>(p);

  DecorrelatedViews v;
  v.noise_var = noise_var;
  v.gamma_used = 1.0 - noise_var;
  v.x_bar = mean(x);
  v.xi = rng.normal();
  const double shift = std::sqrt(noise_var / pd) * v.xi;
  const double root_p = std::sqrt(pd);

  v.x_tilde.resize(p);
  v.y_regression.resize(p);
  v.y_contamination.resize(p);
  for (std::size_t i = 0; i < p; ++i) {
    v.x_tilde[i] = x[i] - v.x_bar + shift;
    v.y_regression[i] = root_p * v.x_tilde[i];
    v.y_contamination[i] = -v.x_tilde[i];
  }
  return v;
}

inline DecorrelatedViews decorrelate(std::span<const double> x, double gamma, Rng& rng) {
  check_gamma(gamma);
  auto v = decorrelate_with_variance(x, 1.0 - gamma, rng);
  v.gamma_used = gamma;
  return v;
}

/// Action of M = sqrt(p) (I - 11^T / p) on v.
inline std::vector<double> design_apply(std::size_t p, std::span<const double> v) {
  if (v.size() != p) throw std::invalid_argument("design_apply: length mismatch");
  if (p == 0) return {};
  const double m = mean(v);
  const double root_p = std::sqrt(static_cast<double>(p));
  std::vector<double> out(p);
  for (std::size_t i = 0; i < p; ++i) out[i] = root_p * (v[i] - m);
  return out;
}

}  // namespace eqcorr
