#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqcorr/core_model.hpp"
#include "eqcorr/decorrelation.hpp"
#include "eqcorr/stats.hpp"

namespace eqcorr {

/// Solver settings. The step is fixed at 1/2 (the smooth part has Lipschitz
/// gradient with constant 2), so it is not configurable.
struct LassoConfig {
  double tol_kkt = 1e-8;
  std::size_t max_iter = 200000;
  bool record_history = false;
};

struct LassoSolution {
  std::vector<double> beta_hat;
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  std::vector<double> v_hat;  // beta_hat - mean(beta_hat)
  double beta_mean = 0.0;
  double lambda = 0.0;
  std::vector<double> objective_history;
};

class LassoNotConverged : public std::runtime_error {
 public:
  explicit LassoNotConverged(LassoSolution best_iterate)
      : std::runtime_error("lasso did not converge: kkt residual " + std::to_string(best_iterate.kkt_residual) +
                           " after " + std::to_string(best_iterate.iterations) + " iterations"),
        best(std::move(best_iterate)) {}
  LassoSolution best;
};

inline constexpr double kPenaltyConstant = 2.0 * (4.0 + std::numbers::sqrt2);

/// 2(4 + sqrt 2) * sqrt(noise_var * log(2 e p / s)).
inline double lambda_rule(std::size_t p, std::size_t s, double noise_var) {
  check_dims(p, s);
  if (!(noise_var >= 0.0)) throw std::invalid_argument("noise_var must be >= 0");
  const double ratio = 2.0 * std::numbers::e * static_cast<double>(p) / static_cast<double>(s);
  return kPenaltyConstant * std::sqrt(noise_var * std::log(ratio));
}

namespace detail {

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// (1/p)||Y - M beta||^2 + 2 lambda ||beta||_1 written as
// ||a_c - P beta||^2 + offset + 2 lambda ||beta||_1 with a = Y / sqrt(p),
// a_c its centered version, P the centering projection and
// offset = p * mean(a)^2 (the part of Y that M cannot reach).
struct LassoProblem {
  std::vector<double> a_c;
  double offset = 0.0;
  double lambda = 0.0;

  LassoProblem(std::span<const double> y, double lam) : lambda(lam) {
    const auto pd = static_cast<double>(y.size());
    const double root_p = std::sqrt(pd);
    a_c.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) a_c[i] = y[i] / root_p;
    const double m = mean(a_c);
    for (double& v : a_c) v -= m;
    offset = pd * m * m;
  }

  double objective(std::span<const double> beta) const {
    const double m = mean(beta);
    double fit = 0.0;
    double l1 = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
      const double r = a_c[i] - (beta[i] - m);
      fit += r * r;
      l1 += std::abs(beta[i]);
    }
    return fit + offset + 2.0 * lambda * l1;
  }

  double kkt_residual(std::span<const double> beta) const {
    const double m = mean(beta);
    double worst = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
      const double g = 2.0 * ((beta[i] - m) - a_c[i]);
      double r;
      if (beta[i] > 0.0) {
        r = std::abs(g + 2.0 * lambda);
      } else if (beta[i] < 0.0) {
        r = std::abs(g - 2.0 * lambda);
      } else {
        r = std::max(0.0, std::abs(g) - 2.0 * lambda);
      }
      worst = std::max(worst, r);
    }
    return worst;
  }

  // Proximal gradient step from z with step 1/2: soft(a_c + mean(z), lambda).
  void prox_step(std::span<const double> z, std::vector<double>& out) const {
    const double m = mean(z);
    out.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = soft_threshold(a_c[i] + m, lambda);
  }
};

// Midpoint of the two middle order statistics: the shift c = -midpoint
// minimizes ||beta + c 1||_1 and is unique even when the minimizer is an
// interval.
inline double l1_center(std::span<const double> beta) {
  std::vector<double> tmp(beta.begin(), beta.end());
  const std::size_t n = tmp.size();
  const std::size_t hi_idx = n / 2;
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(hi_idx), tmp.end());
  const double hi = tmp[hi_idx];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(hi_idx));
  return 0.5 * (lo + hi);
}

inline void finish_solution(const LassoProblem& prob, LassoSolution& sol) {
  sol.beta_mean = mean(sol.beta_hat);
  sol.v_hat.resize(sol.beta_hat.size());
  for (std::size_t i = 0; i < sol.beta_hat.size(); ++i) sol.v_hat[i] = sol.beta_hat[i] - sol.beta_mean;
  sol.objective = prob.objective(sol.beta_hat);
  sol.kkt_residual = prob.kkt_residual(sol.beta_hat);
}

}  // namespace detail

/// Minimizes (1/p)||y - M beta||^2 + 2 lambda ||beta||_1 by accelerated
/// proximal gradient with a monotone restart. Convergence means the KKT
/// residual is at most cfg.tol_kkt; the returned beta is then shifted along
/// the all-ones direction to its l1-minimal representative.
inline LassoSolution solve_lasso(std::span<const double> y, double lambda, const LassoConfig& cfg = {},
                                 std::span<const double> warm_start = {}) {
  const std::size_t p = y.size();
  if (p < 2) throw std::invalid_argument("solve_lasso: need p >= 2");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("solve_lasso: lambda must be finite and >= 0");
  if (!(cfg.tol_kkt > 0.0)) throw std::invalid_argument("solve_lasso: tol_kkt must be positive");
  if (!warm_start.empty() && warm_start.size() != p) throw std::invalid_argument("solve_lasso: warm start length mismatch");

  const detail::LassoProblem prob(y, lambda);

  std::vector<double> beta(p, 0.0);
  if (!warm_start.empty()) beta.assign(warm_start.begin(), warm_start.end());
  std::vector<double> z = beta;
  std::vector<double> cand(p);
  double t = 1.0;
  double f = prob.objective(beta);

  LassoSolution sol;
  sol.lambda = lambda;
  if (cfg.record_history) sol.objective_history.push_back(f);

  std::size_t iter = 0;
  while (prob.kkt_residual(beta) > cfg.tol_kkt) {
    if (iter == cfg.max_iter) {
      sol.beta_hat = beta;
      sol.iterations = iter;
      detail::finish_solution(prob, sol);
      throw LassoNotConverged(std::move(sol));
    }
    ++iter;
    prob.prox_step(z, cand);
    double fc = prob.objective(cand);
    if (fc <= f) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double momentum = (t - 1.0) / t_next;
      for (std::size_t i = 0; i < p; ++i) z[i] = cand[i] + momentum * (cand[i] - beta[i]);
      beta.swap(cand);
      t = t_next;
    } else {
      // Momentum overshot: fall back to a plain step from the current iterate.
      prob.prox_step(beta, cand);
      fc = prob.objective(cand);
      beta.swap(cand);
      z = beta;
      t = 1.0;
    }
    f = fc;
    if (cfg.record_history) sol.objective_history.push_back(f);
  }

  const double center = detail::l1_center(beta);
  if (center != 0.0) {
    std::vector<double> shifted(beta);
    for (double& b : shifted) b -= center;
    if (prob.kkt_residual(shifted) <= cfg.tol_kkt) beta.swap(shifted);
  }

  sol.beta_hat = std::move(beta);
  sol.iterations = iter;
  detail::finish_solution(prob, sol);
  return sol;
}

inline double lasso_mean(const LassoSolution& sol) { return sol.beta_mean; }

/// Projection estimate with the fit that produced it (when the Lasso branch ran).
struct ProjectionFit {
  std::vector<double> v_hat;
  std::optional<LassoSolution> lasso;
  double lambda = 0.0;
};

inline bool lasso_regime(std::size_t p, std::size_t s, double regime_divisor) {
  if (!(regime_divisor > 0.0)) throw std::invalid_argument("regime_divisor must be positive");
  return static_cast<double>(s) <= static_cast<double>(p) / regime_divisor;
}

inline ProjectionFit fit_projection(const DecorrelatedViews& views, std::size_t s, double gamma,
                                    double regime_divisor = 784.0, const LassoConfig& cfg = {}) {
  const std::size_t p = views.x_tilde.size();
  check_dims(p, s);
  check_gamma(gamma);
  ProjectionFit fit;
  if (!lasso_regime(p, s, regime_divisor)) {
    fit.v_hat = views.x_tilde;
    return fit;
  }
  fit.lambda = lambda_rule(p, s, 1.0 - gamma);
  fit.lasso = solve_lasso(views.y_regression, fit.lambda, cfg);
  fit.v_hat = fit.lasso->v_hat;
  return fit;
}

inline std::vector<double> estimate_projection(const DecorrelatedViews& views, std::size_t s, double gamma,
                                               double regime_divisor = 784.0, const LassoConfig& cfg = {}) {
  return fit_projection(views, s, gamma, regime_divisor, cfg).v_hat;
}

/// Baseline that whitens instead of decorrelating: minimizes
/// (x - beta)^T Sigma^{-1} (x - beta) + 2 lambda ||beta||_1 for
/// Sigma = (1 - gamma) I + gamma 11^T, gamma < 1.
///
/// With a = 1/(1-gamma), b = 1/(1-gamma+gamma p) the objective equals the
/// minimum over c of a||x - beta||^2 + (a-b) p (c^2 - 2 c mean(x - beta)) plus
/// the penalty, which is jointly convex. For fixed c the minimizer is
/// soft(x - rho c, lambda / a) with rho = 1 - b/a, and c solves the monotone
/// scalar equation (1 - rho) c = mean(clip(x - rho c, lambda / a)).
inline LassoSolution solve_whitened_lasso(std::span<const double> x, double gamma, double lambda) {
  const std::size_t p = x.size();
  if (p < 2) throw std::invalid_argument("solve_whitened_lasso: need p >= 2");
  check_gamma(gamma);
  if (gamma >= 1.0) throw std::invalid_argument("solve_whitened_lasso: covariance is singular at gamma = 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("solve_whitened_lasso: lambda must be >= 0");

  const auto pd = static_cast<double>(p);
  const double a = 1.0 / (1.0 - gamma);
  const double b = 1.0 / (1.0 - gamma + gamma * pd);
  const double keep = b / a;  // 1 - rho, kept separate to avoid cancellation
  const double rho = 1.0 - keep;
  const double tau = lambda / a;

  auto excess = [&](double c) {
    double acc = 0.0;
    for (double xi : x) acc += std::clamp(xi - rho * c, -tau, tau);
    return keep * c - acc / pd;
  };
  double lo = -tau / keep - 1.0;
  double hi = tau / keep + 1.0;
  for (int k = 0; k < 400 && lo < hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);

  LassoSolution sol;
  sol.lambda = lambda;
  sol.beta_hat.resize(p);
  for (std::size_t i = 0; i < p; ++i) sol.beta_hat[i] = detail::soft_threshold(x[i] - rho * c, tau);
  sol.beta_mean = mean(sol.beta_hat);
  sol.v_hat.resize(p);
  for (std::size_t i = 0; i < p; ++i) sol.v_hat[i] = sol.beta_hat[i] - sol.beta_mean;

  // Objective and KKT certificate of the whitened problem.
  std::vector<double> r(p);
  for (std::size_t i = 0; i < p; ++i) r[i] = x[i] - sol.beta_hat[i];
  const double rm = mean(r);
  double quad = 0.0;
  double l1 = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double centered = r[i] - rm;
    quad += a * centered * centered;
    l1 += std::abs(sol.beta_hat[i]);
    const double g = -2.0 * (a * centered + b * rm);
    const double bi = sol.beta_hat[i];
    const double res = bi > 0.0 ? std::abs(g + 2.0 * lambda)
                                : (bi < 0.0 ? std::abs(g - 2.0 * lambda) : std::max(0.0, std::abs(g) - 2.0 * lambda));
    worst = std::max(worst, res);
  }
  quad += b * pd * rm * rm;
  sol.objective = quad + 2.0 * lambda * l1;
  sol.kkt_residual = worst;
  return sol;
}

}  // namespace eqcorr
