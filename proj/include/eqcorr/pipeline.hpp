#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqcorr/core_model.hpp"
#include "eqcorr/decorrelation.hpp"
#include "eqcorr/lasso.hpp"
#include "eqcorr/mode.hpp"
#include "eqcorr/rng.hpp"

namespace eqcorr {

enum class LinearBranch { lasso_mean, kernel_mode, sample_mean, raw_data };

inline const char* to_string(LinearBranch b) {
  switch (b) {
    case LinearBranch::lasso_mean: return "lasso-mean";
    case LinearBranch::kernel_mode: return "kernel-mode";
    case LinearBranch::sample_mean: return "sample-mean";
    case LinearBranch::raw_data: return "raw-data";
  }
  return "unknown";
}

struct EstimatorChoice {
  LinearBranch branch = LinearBranch::sample_mean;
  std::string rationale;
};

struct PipelineConfig {
  double regime_divisor = 784.0;
  BandwidthRule bandwidth;
  LassoConfig lasso;
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

/// Branch for the mean estimate with known (s, gamma). Equalities go to the
/// Lasso-mean or kernel-mode branch.
inline EstimatorChoice choose_linear_branch(std::size_t p, std::size_t s, double gamma, double regime_divisor = 784.0) {
  check_dims(p, s);
  check_gamma(gamma);
  if (2 * s >= p) return {LinearBranch::raw_data, "s >= p/2"};
  const auto pd = static_cast<double>(p);
  const auto sd = static_cast<double>(s);
  const double scale = 1.0 - gamma;
  const double budget = 1.0 - gamma + gamma * pd;

  if (lasso_regime(p, s, regime_divisor)) {
    const double lhs = scale * sd * std::log(std::numbers::e * pd / sd);
    if (lhs <= budget)
      return {LinearBranch::lasso_mean, "(1-g) s log(ep/s) = " + detail::fmt_num(lhs) + " <= 1-g+gp = " + detail::fmt_num(budget)};
    return {LinearBranch::sample_mean, "(1-g) s log(ep/s) = " + detail::fmt_num(lhs) + " > 1-g+gp = " + detail::fmt_num(budget)};
  }
  const double gap = pd - 2.0 * sd;
  const double lhs = scale * pd * std::max(1.0, std::log(std::numbers::e * pd / (gap * gap)));
  if (lhs <= budget)
    return {LinearBranch::kernel_mode,
            "(1-g) p (1 v log(ep/(p-2s)^2)) = " + detail::fmt_num(lhs) + " <= 1-g+gp = " + detail::fmt_num(budget)};
  return {LinearBranch::sample_mean,
          "(1-g) p (1 v log(ep/(p-2s)^2)) = " + detail::fmt_num(lhs) + " > 1-g+gp = " + detail::fmt_num(budget)};
}

struct LinearEstimate {
  double t_hat = 0.0;
  EstimatorChoice choice;
  double bandwidth = 0.0;  // kernel-mode branch only
};

struct ThetaEstimate {
  std::vector<double> theta_hat;
  std::vector<double> v_hat;
  LinearEstimate linear;
};

namespace detail {

inline LinearEstimate linear_from_views(const DecorrelatedViews& views, std::span<const double> x, std::size_t s,
                                        double gamma, const PipelineConfig& cfg, const ProjectionFit* fit) {
  const std::size_t p = x.size();
  LinearEstimate est;
  est.choice = choose_linear_branch(p, s, gamma, cfg.regime_divisor);
  switch (est.choice.branch) {
    case LinearBranch::lasso_mean:
      if (fit != nullptr && fit->lasso) {
        est.t_hat = lasso_mean(*fit->lasso);
      } else {
        est.t_hat = lasso_mean(solve_lasso(views.y_regression, lambda_rule(p, s, 1.0 - gamma), cfg.lasso));
      }
      break;
    case LinearBranch::kernel_mode:
      est.bandwidth = bandwidth(p, s, 1.0 - gamma, cfg.bandwidth);
      est.t_hat = kernel_mode(views.y_contamination, est.bandwidth).mu_hat;
      break;
    case LinearBranch::sample_mean:
    case LinearBranch::raw_data:
      est.t_hat = views.x_bar;
      break;
  }
  return est;
}

}  // namespace detail

/// Estimate of mean(theta) for known s < p/2 and gamma.
inline LinearEstimate estimate_linear_functional(std::span<const double> x, std::size_t s, double gamma,
                                                 const PipelineConfig& cfg, Rng& rng) {
  check_dims(x.size(), s);
  check_gamma(gamma);
  if (2 * s >= x.size()) throw std::invalid_argument("estimate_linear_functional: requires s < p/2");
  const DecorrelatedViews views = decorrelate(x, gamma, rng);
  return detail::linear_from_views(views, x, s, gamma, cfg, nullptr);
}

/// v + T 1 for s < p/2 and the raw data otherwise. The projection and the mean
/// share one decorrelation draw and, in the Lasso regime, one Lasso fit.
inline ThetaEstimate estimate_theta_detailed(std::span<const double> x, std::size_t s, double gamma, const PipelineConfig& cfg,
                                             Rng& rng) {
  check_dims(x.size(), s);
  check_gamma(gamma);
  ThetaEstimate out;
  if (2 * s >= x.size()) {
    out.theta_hat.assign(x.begin(), x.end());
    out.linear.choice = {LinearBranch::raw_data, "s >= p/2"};
    out.linear.t_hat = mean(x);
    out.v_hat = out.theta_hat;
    for (double& v : out.v_hat) v -= out.linear.t_hat;
    return out;
  }
  const DecorrelatedViews views = decorrelate(x, gamma, rng);
  const ProjectionFit fit = fit_projection(views, s, gamma, cfg.regime_divisor, cfg.lasso);
  out.linear = detail::linear_from_views(views, x, s, gamma, cfg, &fit);
  out.v_hat = fit.v_hat;
  out.theta_hat = fit.v_hat;
  for (double& v : out.theta_hat) v += out.linear.t_hat;
  return out;
}

inline std::vector<double> estimate_theta(std::span<const double> x, std::size_t s, double gamma, const PipelineConfig& cfg,
                                          Rng& rng) {
  return estimate_theta_detailed(x, s, gamma, cfg, rng).theta_hat;
}

/// Two-groups model x = mu 1 + theta + sigma Z with mu unknown: the same
/// construction with noise variance sigma^2 and no sample-mean branch.
inline ThetaEstimate estimate_theta_two_groups_detailed(std::span<const double> x, std::size_t s, double sigma,
                                                        const PipelineConfig& cfg, Rng& rng) {
  const std::size_t p = x.size();
  check_dims(p, s);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("two-groups: sigma must be positive");
  if (2 * s >= p) throw std::invalid_argument("two-groups: requires s < p/2 (the rate is infinite otherwise)");
  const double var = sigma * sigma;
  const DecorrelatedViews views = decorrelate_with_variance(x, var, rng);

  ThetaEstimate out;
  if (lasso_regime(p, s, cfg.regime_divisor)) {
    const double lam = lambda_rule(p, s, var);
    const LassoSolution sol = solve_lasso(views.y_regression, lam, cfg.lasso);
    out.v_hat = sol.v_hat;
    out.linear.t_hat = sol.beta_mean;
    out.linear.choice = {LinearBranch::lasso_mean, "s <= p/divisor"};
  } else {
    out.v_hat = views.x_tilde;
    out.linear.bandwidth = bandwidth(p, s, var, cfg.bandwidth);
    out.linear.t_hat = kernel_mode(views.y_contamination, out.linear.bandwidth).mu_hat;
    out.linear.choice = {LinearBranch::kernel_mode, "s > p/divisor"};
  }
  out.theta_hat = out.v_hat;
  for (double& v : out.theta_hat) v += out.linear.t_hat;
  return out;
}

inline std::vector<double> estimate_theta_two_groups(std::span<const double> x, std::size_t s, double sigma,
                                                     const PipelineConfig& cfg, Rng& rng) {
  return estimate_theta_two_groups_detailed(x, s, sigma, cfg, rng).theta_hat;
}

}  // namespace eqcorr
