#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqcorr/lasso.hpp"
#include "eqcorr/mode.hpp"
#include "eqcorr/rng.hpp"
#include "eqcorr/stats.hpp"

namespace eqcorr {

struct CorrelationEstimate {
  double one_minus_gamma_hat = 0.0;
  std::size_t m = 0;
  std::size_t ell = 0;
  std::uint64_t seed = 0;         // seed of the generator that drew the subsets
  std::size_t best_subset = 0;    // index of the minimizing subset in draw order
};

struct SubsetParams {
  std::size_t m = 0;
  std::size_t ell = 0;
};

/// Union-bound parameters: ell = max(6, ceil(log_3 p) + 2), m = ceil(50 * 3^ell)
/// capped at 10^6, so that exp(-m 3^-ell) <= e^-50 before the cap.
inline SubsetParams default_subset_params(std::size_t p) {
  if (p < 8) throw std::invalid_argument("default_subset_params: requires p >= 8");
  std::size_t log3 = 0;
  for (std::size_t pow3 = 1; pow3 < p; pow3 *= 3) ++log3;
  const std::size_t ell = std::max<std::size_t>(6, log3 + 2);
  const double m = std::ceil(50.0 * std::pow(3.0, static_cast<double>(ell)));
  return {static_cast<std::size_t>(std::min(m, 1e6)), ell};
}

/// Parameters used by the adaptive estimators: ell = ceil(8 ln p) clipped to
/// [3, p], m = ceil(10 (8/7)^ell) capped at 10^6. Larger subsets keep the
/// lower chi-square tail of the minimum in check, and m still grows fast
/// enough for some subset to avoid a support of size up to about p/8.
inline SubsetParams balanced_subset_params(std::size_t p) {
  if (p < 3) throw std::invalid_argument("balanced_subset_params: requires p >= 3");
  const double raw_ell = std::ceil(8.0 * std::log(static_cast<double>(p)));
  const auto ell = std::clamp<std::size_t>(static_cast<std::size_t>(raw_ell), 3, p);
  const double m = std::ceil(10.0 * std::pow(8.0 / 7.0, static_cast<double>(ell)));
  return {static_cast<std::size_t>(std::min(m, 1e6)), ell};
}

enum class SubsetPolicy { balanced, union_bound };

/// Minimum sample variance over m uniformly drawn subsets of size ell.
///
/// The data are sorted first, so the result does not depend on the order of x.
inline CorrelationEstimate estimate_correlation(std::span<const double> x, std::size_t m, std::size_t ell, Rng& rng) {
  const std::size_t p = x.size();
  if (ell < 3) throw std::invalid_argument("estimate_correlation: ell must be >= 3");
  if (ell > p) throw std::invalid_argument("estimate_correlation: ell exceeds p");
  if (m < 1) throw std::invalid_argument("estimate_correlation: m must be >= 1");

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::uint32_t> idx(p);
  for (std::size_t i = 0; i < p; ++i) idx[i] = static_cast<std::uint32_t>(i);
  std::vector<double> buf(ell);

  CorrelationEstimate est;
  est.m = m;
  est.ell = ell;
  est.seed = rng.seed();
  double best = std::numeric_limits<double>::infinity();
  const double inv_ell = 1.0 / static_cast<double>(ell);
  const double inv_dof = 1.0 / static_cast<double>(ell - 1);

  for (std::size_t r = 0; r < m; ++r) {
    // Partial Fisher-Yates on a persistent permutation: the first ell entries
    // form a uniform subset whatever the current arrangement.
    for (std::size_t j = 0; j < ell; ++j) {
      const std::size_t k = j + static_cast<std::size_t>(rng.below(p - j));
      std::swap(idx[j], idx[k]);
      buf[j] = sorted[idx[j]];
    }
    // Two-pass variance about the first draw so equal values give exactly 0.
    const double anchor = buf[0];
    double sum = 0.0;
    for (std::size_t j = 0; j < ell; ++j) sum += buf[j] - anchor;
    const double centre = sum * inv_ell;
    double ss = 0.0;
    for (std::size_t j = 0; j < ell; ++j) {
      const double d = (buf[j] - anchor) - centre;
      ss += d * d;
    }
    const double var = ss * inv_dof;
    if (var < best) {
      best = var;
      est.best_subset = r;
    }
  }
  est.one_minus_gamma_hat = std::max(0.0, best);
  return est;
}

struct LepskiConfig {
  double eta = 0.1;
  double l_eta = 2.0;
  double k_const = 4.0;
  double r_const = 8.0;
  double c_eta = 16.0;
  double c1 = 1.0;
  double regime_divisor = 784.0;
  SubsetPolicy subset_policy = SubsetPolicy::balanced;
  std::size_t subset_m = 0;    // 0 keeps the policy value
  std::size_t subset_ell = 0;  // 0 keeps the policy value
  LassoConfig lasso;

  void validate() const {
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("lepski: eta must lie in (0, 1)");
    if (!(l_eta >= 1.0)) throw std::invalid_argument("lepski: l_eta must be >= 1");
    if (!(k_const > 0.0 && r_const > 0.0 && c_eta > 0.0 && c1 > 0.0 && regime_divisor > 0.0))
      throw std::invalid_argument("lepski: constants must be positive");
  }

  SubsetParams subset_params(std::size_t p) const {
    SubsetParams sp = subset_policy == SubsetPolicy::union_bound ? default_subset_params(p) : balanced_subset_params(p);
    if (subset_m != 0) sp.m = subset_m;
    if (subset_ell != 0) sp.ell = subset_ell;
    return sp;
  }
};

struct LepskiCandidate {
  std::size_t s = 0;
  std::string branch;       // "lasso", "mode", "sample-mean" or "centered-data"
  double tuning = 0.0;      // penalty for lasso candidates, bandwidth for mode candidates
  double radius = 0.0;
  double estimate = 0.0;    // scalar estimate (linear selector) or squared norm of v(s)
};

struct BallCheck {
  std::size_t witness_s = 0;
  std::size_t center_s = 0;
  double distance = 0.0;
  double radius = 0.0;
  bool inside = false;
};

struct LepskiTrace {
  std::vector<std::size_t> grid;
  std::vector<LepskiCandidate> candidates;
  std::size_t selected_s = 0;
  std::optional<std::size_t> witness_index;  // index into candidates; empty on fallback
  std::vector<BallCheck> checks;
  double one_minus_gamma_hat = 0.0;
};

/// {2^k : 2^k * divisor <= p} together with p.
inline std::vector<std::size_t> lasso_grid(std::size_t p, double regime_divisor = 784.0) {
  std::vector<std::size_t> grid;
  for (std::size_t s = 1; static_cast<double>(s) * regime_divisor <= static_cast<double>(p); s *= 2) grid.push_back(s);
  grid.push_back(p);
  return grid;
}

namespace detail {

// Smallest k with 16^k >= p, i.e. 2^k >= p^(1/4).
inline unsigned boundary_k_min(std::size_t p) {
  unsigned k = 0;
  for (double v = 1.0; v < static_cast<double>(p); v *= 16.0) ++k;
  return k;
}

// Largest k with 4^k <= p, i.e. 2^k <= sqrt(p).
inline unsigned boundary_k_max(std::size_t p) {
  unsigned k = 0;
  while (std::pow(4.0, static_cast<double>(k + 1)) <= static_cast<double>(p)) ++k;
  return k;
}

}  // namespace detail

/// Lasso grid plus {floor(p/2) - 2^k} for 2^k between p^(1/4) and sqrt(p),
/// plus floor(p/2) - 1 and p.
inline std::vector<std::size_t> linear_grid(std::size_t p, double regime_divisor = 784.0) {
  std::vector<std::size_t> grid = lasso_grid(p, regime_divisor);
  const std::size_t half = p / 2;
  for (unsigned k = detail::boundary_k_min(p); k <= detail::boundary_k_max(p); ++k) {
    const std::size_t step = std::size_t{1} << k;
    if (step < half) grid.push_back(half - step);
  }
  if (half >= 2) grid.push_back(half - 1);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

/// log(1/delta_s) for the linear selector's confidence levels.
inline double log_inverse_confidence(std::size_t p, std::size_t s, double k_const) {
  const std::size_t half = p / 2;
  const std::size_t step = std::size_t{1} << detail::boundary_k_min(p);
  if (step <= half && s <= half - step) {
    const auto pd = static_cast<double>(p);
    const double gap = pd - 2.0 * static_cast<double>(s);
    return k_const * std::min(pd / (gap * gap), std::pow(pd, 1.0 / 32.0));
  }
  return k_const;
}

/// Bandwidth of the adaptive mode candidate at sparsity s.
inline double adaptive_bandwidth(std::size_t p, std::size_t s, double one_minus_gamma_hat, const LepskiConfig& cfg) {
  const auto pd = static_cast<double>(p);
  const double gap = pd - 2.0 * static_cast<double>(s);
  const double inner = std::log(std::numbers::e * pd / (gap * gap)) + std::log(log_inverse_confidence(p, s, cfg.k_const));
  return cfg.c1 * std::sqrt(cfg.l_eta) * std::sqrt(one_minus_gamma_hat * std::max(1.0, inner));
}

/// Whether the mode candidate is used at s: p/divisor < s < p/2 and
/// (1 - gamma_hat) log(e p / (p - 2s)^2) <= c_eta. A nonpositive log makes the
/// threshold infinite, so the condition holds.
inline bool mode_branch_active(std::size_t p, std::size_t s, double one_minus_gamma_hat, const LepskiConfig& cfg) {
  const auto pd = static_cast<double>(p);
  const auto sd = static_cast<double>(s);
  if (!(sd > pd / cfg.regime_divisor && 2.0 * sd < pd)) return false;
  const double gap = pd - 2.0 * sd;
  const double log_term = std::log(std::numbers::e * pd / (gap * gap));
  if (log_term <= 0.0) return true;
  return one_minus_gamma_hat * log_term <= cfg.c_eta;
}

namespace detail {

inline bool within(double distance, double radius, double scale) {
  return distance <= radius * (1.0 + 1e-12) + 1e-12 * std::max(1.0, scale);
}

// Smallest i such that candidate i lies in every ball j >= i. Records every
// comparison made in the trace.
template <class Dist, class Scale>
std::optional<std::size_t> select_witness(LepskiTrace& trace, std::size_t n, const Dist& dist, const Scale& scale) {
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = true;
    for (std::size_t j = i; j < n; ++j) {
      BallCheck check;
      check.witness_s = trace.candidates[i].s;
      check.center_s = trace.candidates[j].s;
      check.distance = dist(i, j);
      check.radius = trace.candidates[j].radius;
      check.inside = within(check.distance, check.radius, scale(j));
      trace.checks.push_back(check);
      if (!check.inside) {
        ok = false;
        break;
      }
    }
    if (ok) return i;
  }
  return std::nullopt;
}

// Lasso fits on the correlated regression view for every s <= p/divisor.
struct LassoFamily {
  std::vector<std::size_t> s_values;
  std::vector<double> lambdas;
  std::vector<LassoSolution> fits;
};

inline std::vector<double> correlated_regression_view(std::span<const double> x) {
  const double x_bar = mean(x);
  const double root_p = std::sqrt(static_cast<double>(x.size()));
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = root_p * (x[i] - x_bar);
  return y;
}

inline LassoFamily fit_lasso_family(std::span<const double> x, double one_minus_gamma_hat, const LepskiConfig& cfg) {
  const std::size_t p = x.size();
  LassoFamily fam;
  const std::vector<double> y = correlated_regression_view(x);
  for (std::size_t s : lasso_grid(p, cfg.regime_divisor)) {
    if (s == p) continue;
    const double lam = lambda_rule(p, s, cfg.l_eta * one_minus_gamma_hat);
    const std::span<const double> warm = fam.fits.empty() ? std::span<const double>{} : std::span<const double>(fam.fits.back().beta_hat);
    fam.fits.push_back(solve_lasso(y, lam, cfg.lasso, warm));
    fam.s_values.push_back(s);
    fam.lambdas.push_back(lam);
  }
  return fam;
}

inline CorrelationEstimate correlation_for(std::span<const double> x, const LepskiConfig& cfg, Rng& rng) {
  const SubsetParams sp = cfg.subset_params(x.size());
  Rng sub = rng.substream("correlation");
  return estimate_correlation(x, sp.m, sp.ell, sub);
}

}  // namespace detail

struct ProjectionSelection {
  std::vector<double> v_hat;
  LepskiTrace trace;
};

struct LinearSelection {
  double t_hat = 0.0;
  LepskiTrace trace;
};

namespace detail {

inline ProjectionSelection lepski_projection_from(std::span<const double> x, const LepskiConfig& cfg,
                                                  const CorrelationEstimate& corr, const LassoFamily& fam) {
  const std::size_t p = x.size();
  ProjectionSelection out;
  LepskiTrace& trace = out.trace;
  trace.grid = lasso_grid(p, cfg.regime_divisor);
  trace.one_minus_gamma_hat = corr.one_minus_gamma_hat;

  const std::size_t n = fam.fits.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    LepskiCandidate c;
    c.s = fam.s_values[i];
    c.branch = "lasso";
    c.tuning = fam.lambdas[i];
    c.radius = std::sqrt(13.0 * static_cast<double>(c.s) * c.tuning * c.tuning);
    c.estimate = squared_norm(fam.fits[i].v_hat);
    norms[i] = std::sqrt(c.estimate);
    trace.candidates.push_back(c);
  }

  const auto choice = select_witness(
      trace, n, [&](std::size_t i, std::size_t j) { return std::sqrt(squared_distance(fam.fits[i].v_hat, fam.fits[j].v_hat)); },
      [&](std::size_t j) { return norms[j]; });

  if (choice) {
    trace.witness_index = *choice;
    trace.selected_s = trace.candidates[*choice].s;
    out.v_hat = fam.fits[*choice].v_hat;
  } else {
    trace.selected_s = p;
    const double x_bar = mean(x);
    out.v_hat.resize(p);
    for (std::size_t i = 0; i < p; ++i) out.v_hat[i] = x[i] - x_bar;
    LepskiCandidate c;
    c.s = p;
    c.branch = "centered-data";
    c.estimate = squared_norm(out.v_hat);
    trace.candidates.push_back(c);
  }
  return out;
}

inline LinearSelection lepski_linear_from(std::span<const double> x, const LepskiConfig& cfg, const CorrelationEstimate& corr,
                                          const LassoFamily& fam) {
  const std::size_t p = x.size();
  const double g = corr.one_minus_gamma_hat;
  LinearSelection out;
  LepskiTrace& trace = out.trace;
  trace.grid = linear_grid(p, cfg.regime_divisor);
  trace.one_minus_gamma_hat = g;
  const double x_bar = mean(x);
  const auto pd = static_cast<double>(p);

  for (std::size_t s : trace.grid) {
    LepskiCandidate c;
    c.s = s;
    const auto it = std::find(fam.s_values.begin(), fam.s_values.end(), s);
    if (lasso_regime(p, s, cfg.regime_divisor) && it != fam.s_values.end()) {
      const auto k = static_cast<std::size_t>(it - fam.s_values.begin());
      c.branch = "lasso";
      c.tuning = fam.lambdas[k];
      c.estimate = fam.fits[k].beta_mean;
      c.radius = cfg.r_const * std::sqrt(static_cast<double>(s) / pd * c.tuning * c.tuning);
    } else if (mode_branch_active(p, s, g, cfg)) {
      c.branch = "mode";
      c.tuning = adaptive_bandwidth(p, s, g, cfg);
      c.estimate = kernel_mode_correlated(x, c.tuning).mu_hat;
      c.radius = cfg.r_const * c.tuning;
    } else {
      c.branch = "sample-mean";
      c.estimate = x_bar;
      c.radius = cfg.r_const;
    }
    trace.candidates.push_back(c);
  }

  const std::size_t n = trace.candidates.size();
  const auto choice = select_witness(
      trace, n, [&](std::size_t i, std::size_t j) { return std::abs(trace.candidates[i].estimate - trace.candidates[j].estimate); },
      [&](std::size_t j) { return std::abs(trace.candidates[j].estimate); });

  if (choice) {
    trace.witness_index = *choice;
    trace.selected_s = trace.candidates[*choice].s;
    out.t_hat = trace.candidates[*choice].estimate;
  } else {
    trace.selected_s = p;
    out.t_hat = x_bar;
  }
  return out;
}

}  // namespace detail

/// Sparsity- and correlation-adaptive estimate of theta - mean(theta) 1.
inline ProjectionSelection lepski_projection(std::span<const double> x, const LepskiConfig& cfg,
                                             const CorrelationEstimate& corr) {
  cfg.validate();
  if (x.size() < 4) throw std::invalid_argument("lepski_projection: requires p >= 4");
  const auto fam = detail::fit_lasso_family(x, corr.one_minus_gamma_hat, cfg);
  return detail::lepski_projection_from(x, cfg, corr, fam);
}

inline ProjectionSelection lepski_projection(std::span<const double> x, const LepskiConfig& cfg, Rng& rng) {
  cfg.validate();
  if (x.size() < 4) throw std::invalid_argument("lepski_projection: requires p >= 4");
  return lepski_projection(x, cfg, detail::correlation_for(x, cfg, rng));
}

/// Sparsity- and correlation-adaptive estimate of mean(theta).
inline LinearSelection lepski_linear(std::span<const double> x, const LepskiConfig& cfg, const CorrelationEstimate& corr) {
  cfg.validate();
  if (x.size() < 16) throw std::invalid_argument("lepski_linear: requires p >= 16");
  const auto fam = detail::fit_lasso_family(x, corr.one_minus_gamma_hat, cfg);
  return detail::lepski_linear_from(x, cfg, corr, fam);
}

inline LinearSelection lepski_linear(std::span<const double> x, const LepskiConfig& cfg, Rng& rng) {
  cfg.validate();
  if (x.size() < 16) throw std::invalid_argument("lepski_linear: requires p >= 16");
  return lepski_linear(x, cfg, detail::correlation_for(x, cfg, rng));
}

struct AdaptiveEstimate {
  std::vector<double> theta_hat;
  ProjectionSelection projection;
  LinearSelection linear;
  CorrelationEstimate correlation;
};

/// v + T 1 from the two selectors, sharing one correlation estimate and one
/// set of Lasso fits.
inline AdaptiveEstimate adaptive_estimate_detailed(std::span<const double> x, const LepskiConfig& cfg, Rng& rng) {
  cfg.validate();
  if (x.size() < 16) throw std::invalid_argument("adaptive_estimate: requires p >= 16");
  AdaptiveEstimate out;
  out.correlation = detail::correlation_for(x, cfg, rng);
  const auto fam = detail::fit_lasso_family(x, out.correlation.one_minus_gamma_hat, cfg);
  out.projection = detail::lepski_projection_from(x, cfg, out.correlation, fam);
  out.linear = detail::lepski_linear_from(x, cfg, out.correlation, fam);
  out.theta_hat = out.projection.v_hat;
  for (double& v : out.theta_hat) v += out.linear.t_hat;
  return out;
}

inline std::vector<double> adaptive_estimate(std::span<const double> x, const LepskiConfig& cfg, Rng& rng) {
  return adaptive_estimate_detailed(x, cfg, rng).theta_hat;
}

}  // namespace eqcorr
