#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqcorr/rng.hpp"

namespace eqcorr {

/// Ground truth of one experiment: dimension, sparsity budget, correlation
/// level and the signal itself.
struct ProblemInstance {
  std::size_t p = 1;
  std::size_t s = 1;
  double gamma = 0.0;
  std::vector<double> theta;

  void validate() const;
};

enum class SignalKind { constant_amplitude, signed_constant, uniform_range, user_supplied };
enum class SupportRule { random_uniform, prefix };

/// How make_signal fills the support.
///
/// constant_amplitude puts `amplitude` on every support coordinate,
/// signed_constant alternates +amplitude / -amplitude along the support,
/// uniform_range draws each value uniformly from [-amplitude, amplitude] and
/// user_supplied copies `values` after checking the sparsity budget.
struct SignalScheme {
  SignalKind kind = SignalKind::constant_amplitude;
  double amplitude = 1.0;
  SupportRule support = SupportRule::random_uniform;
  std::vector<double> values;
};

struct Observation {
  std::vector<double> x;
  std::uint64_t seed_record = 0;
  double w = 0.0;  // shared factor, diagnostics only
};

struct RateQuery {
  std::size_t p = 1;
  std::size_t s = 1;
  double gamma = 0.0;
};

inline std::size_t count_nonzero(std::span<const double> v) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; }));
}

inline void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
}

inline void check_dims(std::size_t p, std::size_t s) {
  if (p < 1) throw std::invalid_argument("p must be at least 1");
  if (s < 1 || s > p) throw std::invalid_argument("s must lie in [1, p]");
}

inline void ProblemInstance::validate() const {
  check_dims(p, s);
  check_gamma(gamma);
  if (theta.size() != p) throw std::invalid_argument("theta length differs from p");
  if (count_nonzero(theta) > s) throw std::invalid_argument("theta has more than s nonzeros");
}

inline std::vector<double> make_signal(std::size_t p, std::size_t s, const SignalScheme& scheme, Rng& rng) {
  check_dims(p, s);
  if (!std::isfinite(scheme.amplitude)) throw std::invalid_argument("signal amplitude must be finite");

  if (scheme.kind == SignalKind::user_supplied) {
    if (scheme.values.size() != p) throw std::invalid_argument("user signal length differs from p");
    if (count_nonzero(scheme.values) > s) throw std::invalid_argument("user signal has more than s nonzeros");
    for (double v : scheme.values)
      if (!std::isfinite(v)) throw std::invalid_argument("user signal must be finite");
    return scheme.values;
  }

  std::vector<std::size_t> support(s);
  if (scheme.support == SupportRule::prefix) {
    for (std::size_t i = 0; i < s; ++i) support[i] = i;
  } else {
    // Partial Fisher-Yates, then sort so value assignment follows coordinate order.
    std::vector<std::size_t> idx(p);
    for (std::size_t i = 0; i < p; ++i) idx[i] = i;
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t j = i + rng.below(p - i);
      std::swap(idx[i], idx[j]);
    }
    std::copy_n(idx.begin(), s, support.begin());
    std::sort(support.begin(), support.end());
  }

  std::vector<double> theta(p, 0.0);
  for (std::size_t k = 0; k < s; ++k) {
    double value = scheme.amplitude;
    switch (scheme.kind) {
      case SignalKind::constant_amplitude: break;
      case SignalKind::signed_constant: value = (k % 2 == 0) ? scheme.amplitude : -scheme.amplitude; break;
      case SignalKind::uniform_range: value = scheme.amplitude * (2.0 * rng.uniform() - 1.0); break;
      case SignalKind::user_supplied: break;
    }
    theta[support[k]] = value;
  }
  return theta;
}

/// X_i = theta_i + sqrt(gamma) W + sqrt(1 - gamma) Z_i.
inline Observation sample_observation(std::span<const double> theta, double gamma, Rng& rng) {
  check_gamma(gamma);
  if (theta.empty()) throw std::invalid_argument("theta must be nonempty");
  Observation obs;
  obs.seed_record = rng.seed();
  obs.w = rng.normal();
  const double shared = std::sqrt(gamma) * obs.w;
  const double own = std::sqrt(1.0 - gamma);
  obs.x.resize(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) obs.x[i] = theta[i] + shared + own * rng.normal();
  return obs;
}

namespace detail {

inline bool sparse_branch(double p, double s) { return s <= p / 2.0 - std::sqrt(p); }

// log(e p / (p - 2s)^2) floored at 1; only called with 2s < p.
inline double boundary_log(double p, double s) {
  const double gap = p - 2.0 * s;
  return std::max(1.0, std::log(std::numbers::e * p / (gap * gap)));
}

}  // namespace detail

/// Squared minimax rate for the equicorrelated model, three-branch form.
inline double minimax_rate_sq(const RateQuery& q) {
  check_dims(q.p, q.s);
  check_gamma(q.gamma);
  const auto p = static_cast<double>(q.p);
  const auto s = static_cast<double>(q.s);
  if (2.0 * s >= p) return p;
  const double scale = 1.0 - q.gamma;
  if (detail::sparse_branch(p, s)) return scale * s * std::log(std::numbers::e * p / s);
  return std::min(scale * p * detail::boundary_log(p, s), p);
}

inline double perfect_corr_rate_sq(std::size_t p, std::size_t s) {
  check_dims(p, s);
  return 2 * s < p ? 0.0 : static_cast<double>(p);
}

/// Rate for the two-groups model with null variance sigma^2; infinite once
/// s >= p/2.
inline double two_groups_rate_sq(std::size_t p, std::size_t s, double sigma) {
  check_dims(p, s);
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const auto pd = static_cast<double>(p);
  const auto sd = static_cast<double>(s);
  if (2.0 * sd >= pd) return std::numeric_limits<double>::infinity();
  const double var = sigma * sigma;
  if (detail::sparse_branch(pd, sd)) return var * sd * std::log(std::numbers::e * pd / sd);
  return var * pd * detail::boundary_log(pd, sd);
}

}  // namespace eqcorr
