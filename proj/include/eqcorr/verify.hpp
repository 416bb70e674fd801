#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "eqcorr/adaptation.hpp"
#include "eqcorr/core_model.hpp"
#include "eqcorr/decorrelation.hpp"
#include "eqcorr/figures.hpp"
#include "eqcorr/harness.hpp"
#include "eqcorr/lasso.hpp"
#include "eqcorr/mixture.hpp"
#include "eqcorr/mode.hpp"
#include "eqcorr/parallel.hpp"
#include "eqcorr/pipeline.hpp"
#include "eqcorr/rng.hpp"
#include "eqcorr/stats.hpp"

namespace eqcorr::verify {

struct Options {
  std::uint64_t seed = 20240607;
  unsigned threads = 0;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

namespace detail {

inline std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline Rng trial_rng(const Options& opt, int criterion, std::size_t cell, std::size_t trial) {
  return Rng(trial_seed(derive_seed(opt.seed, static_cast<std::uint64_t>(criterion)), cell, trial));
}

inline std::vector<double> centered(std::span<const double> v) {
  const double m = mean(v);
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x -= m;
  return out;
}

}  // namespace detail

/// Plain proximal gradient on (1/p)||y - M beta||^2 + 2 lambda ||beta||_1 with
/// step 1/2, written directly from the matrix form. Slow but independent of
/// the production solver.
namespace reference {

inline double lasso_objective(std::span<const double> y, std::span<const double> beta, double lambda) {
  const std::size_t p = y.size();
  const double root_p = std::sqrt(static_cast<double>(p));
  double beta_bar = 0.0;
  for (double b : beta) beta_bar += b;
  beta_bar /= static_cast<double>(p);
  double fit = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double r = y[i] - root_p * (beta[i] - beta_bar);
    fit += r * r;
    l1 += std::abs(beta[i]);
  }
  return fit / static_cast<double>(p) + 2.0 * lambda * l1;
}

inline std::vector<double> lasso_ista(std::span<const double> y, double lambda, std::size_t iterations) {
  const std::size_t p = y.size();
  const auto pd = static_cast<double>(p);
  const double root_p = std::sqrt(pd);
  std::vector<double> beta(p, 0.0), r(p);
  for (std::size_t it = 0; it < iterations; ++it) {
    double beta_bar = 0.0;
    for (double b : beta) beta_bar += b;
    beta_bar /= pd;
    double r_bar = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      r[i] = y[i] - root_p * (beta[i] - beta_bar);
      r_bar += r[i];
    }
    r_bar /= pd;
    for (std::size_t i = 0; i < p; ++i) {
      const double grad = -(2.0 / pd) * root_p * (r[i] - r_bar);
      const double z = beta[i] - 0.5 * grad;
      beta[i] = z > lambda ? z - lambda : (z < -lambda ? z + lambda : 0.0);
    }
  }
  return beta;
}

}  // namespace reference

template <class Body>
CriterionResult timed(int id, std::string title, double budget, Body&& body) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  r.budget_seconds = budget;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.passed = body(r.detail);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail += std::string(" exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.seconds >= budget) {
    r.passed = false;
    r.detail += " (over time budget)";
  }
  return r;
}

inline CriterionResult population_gaussian_mode(const Options&) {
  return timed(1, "gaussian population mode near -1.999", 1.0, [](std::string& detail) {
    const ModeSearchResult m = find_mode(population_figure_spec(MixtureKind::gaussian));
    detail = "location " + detail::num(m.location, 8);
    return m.location >= -2.01 && m.location <= -1.99;
  });
}

inline CriterionResult population_huber_mode(const Options&) {
  return timed(2, "huber population mode near 1.750", 1.0, [](std::string& detail) {
    const MixtureSpec spec = population_figure_spec(MixtureKind::huber);
    const ModeSearchResult m = find_mode(spec);
    const double at_inlier = population_G(-2.0, spec);
    detail = "location " + detail::num(m.location, 8) + ", value " + detail::num(m.value, 6) + " vs G(-2) " +
             detail::num(at_inlier, 6);
    return m.location >= 1.74 && m.location <= 1.76 && m.value > at_inlier;
  });
}

inline CriterionResult perfect_correlation(const Options& opt) {
  return timed(3, "exact recovery at gamma = 1", 5.0, [&](std::string& detail) {
    constexpr std::size_t p = 1000, s = 400, trials = 100;
    SignalScheme scheme;
    scheme.amplitude = 5.0;
    std::vector<double> err(trials);
    parallel_for(trials, resolve_threads(opt.threads), [&](std::size_t t) {
      const Rng base = detail::trial_rng(opt, 3, 0, t);
      Rng sr = base.substream("signal"), nr = base.substream("noise"), er = base.substream("estimator");
      const auto theta = make_signal(p, s, scheme, sr);
      const auto obs = sample_observation(theta, 1.0, nr);
      err[t] = squared_distance(estimate_theta(obs.x, s, 1.0, PipelineConfig{}, er), theta);
    });
    const auto worst = *std::max_element(err.begin(), err.end());
    const auto exact = std::count_if(err.begin(), err.end(), [](double e) { return e < 1e-18; });
    detail = std::to_string(exact) + "/100 below 1e-18, worst " + detail::num(worst);
    return exact == static_cast<long>(trials);
  });
}

inline ExperimentConfig dense_config(const Options& opt) {
  ExperimentConfig cfg;
  cfg.p = 512;
  cfg.trials = 2000;
  cfg.seed = opt.seed;
  cfg.sparsity = {300};
  cfg.gammas = {0.5};
  cfg.estimators = {"raw-data"};
  return cfg;
}

inline CriterionResult dense_identity(const Options& opt) {
  return timed(4, "raw data risk equals p in the dense regime", 10.0, [&](std::string& detail) {
    const RiskReport rep = run_risk_experiment(dense_config(opt), resolve_threads(opt.threads));
    const double m = rep.cells.at(0).mean;
    detail = "mean squared error " + detail::num(m, 6) + " vs 512";
    return std::abs(m - 512.0) <= 0.05 * 512.0;
  });
}

inline CriterionResult lasso_certification(const Options& opt) {
  return timed(5, "lasso KKT certificate and reference objective", 60.0, [&](std::string& detail) {
    constexpr std::size_t n = 200;
    const std::size_t dims[3] = {16, 64, 512};
    std::vector<double> kkt(n), gap(n, 0.0);
    std::vector<char> compared(n, 0);
    parallel_for(n, resolve_threads(opt.threads), [&](std::size_t i) {
      Rng rng = detail::trial_rng(opt, 5, 0, i);
      const std::size_t p = dims[i % 3];
      const std::size_t s = 1 + rng.below(p / 4);
      const double gamma = 0.99 * rng.uniform();
      SignalScheme scheme;
      scheme.kind = SignalKind::uniform_range;
      scheme.amplitude = 1.0 + 9.0 * rng.uniform();
      const auto theta = make_signal(p, s, scheme, rng);
      const auto obs = sample_observation(theta, gamma, rng);
      const auto views = decorrelate(obs.x, gamma, rng);
      const double lam = lambda_rule(p, 1 + rng.below(p), 1.0 - gamma);
      const LassoSolution sol = solve_lasso(views.y_regression, lam);
      kkt[i] = sol.kkt_residual;
      if (p <= 32) {
        const auto ref = reference::lasso_ista(views.y_regression, lam, 1000000);
        gap[i] = std::abs(sol.objective - reference::lasso_objective(views.y_regression, ref, lam));
        compared[i] = 1;
      }
    });
    const double worst_kkt = *std::max_element(kkt.begin(), kkt.end());
    const double worst_gap = *std::max_element(gap.begin(), gap.end());
    const auto n_cmp = std::count(compared.begin(), compared.end(), 1);
    detail = "max KKT residual " + detail::num(worst_kkt) + ", max objective gap " + detail::num(worst_gap) + " over " +
             std::to_string(n_cmp) + " reference runs";
    return worst_kkt <= 1e-8 && worst_gap <= 1e-8;
  });
}

inline CriterionResult correlation_blessing(const Options& opt) {
  return timed(6, "projection error ratio between gamma 0.99 and 0", 300.0, [&](std::string& detail) {
    constexpr std::size_t p = 8192, s = 8, trials = 200;
    const double gammas[2] = {0.0, 0.99};
    SignalScheme scheme;
    scheme.amplitude = 10.0;
    std::vector<double> err(2 * trials);
    parallel_for(2 * trials, resolve_threads(opt.threads), [&](std::size_t u) {
      const std::size_t cell = u / trials, t = u % trials;
      const Rng base = detail::trial_rng(opt, 6, cell, t);
      Rng sr = base.substream("signal"), nr = base.substream("noise"), er = base.substream("estimator");
      const auto theta = make_signal(p, s, scheme, sr);
      const auto obs = sample_observation(theta, gammas[cell], nr);
      const auto views = decorrelate(obs.x, gammas[cell], er);
      const auto v = estimate_projection(views, s, gammas[cell]);
      err[u] = squared_distance(v, detail::centered(theta));
    });
    const double m0 = median(std::vector<double>(err.begin(), err.begin() + trials));
    const double m1 = median(std::vector<double>(err.begin() + trials, err.end()));
    const double ratio = m1 / m0;
    detail = "median error " + detail::num(m1) + " at 0.99 / " + detail::num(m0) + " at 0 = ratio " + detail::num(ratio);
    return ratio >= 0.0033 && ratio <= 0.03;
  });
}

inline CriterionResult kernel_mode_guarantee(const Options& opt) {
  return timed(7, "kernel mode within 8h and ahead of the median", 180.0, [&](std::string& detail) {
    constexpr std::size_t p = 16384, s = (p - 128) / 2, trials = 100;
    constexpr double gamma = 0.99;
    SignalScheme scheme;
    scheme.amplitude = 20.0 * std::sqrt(1.0 - gamma);
    const double h = bandwidth(p, s, 1.0 - gamma);
    std::vector<double> mode_err(trials), median_err(trials);
    parallel_for(trials, resolve_threads(opt.threads), [&](std::size_t t) {
      const Rng base = detail::trial_rng(opt, 7, 0, t);
      Rng sr = base.substream("signal"), nr = base.substream("noise"), er = base.substream("estimator");
      const auto theta = make_signal(p, s, scheme, sr);
      const double theta_bar = mean(theta);
      const auto obs = sample_observation(theta, gamma, nr);
      const auto views = decorrelate(obs.x, gamma, er);
      mode_err[t] = std::abs(kernel_mode(views.y_contamination, h).mu_hat - theta_bar);
      median_err[t] = std::abs(sample_median(views.y_contamination) - theta_bar);
    });
    std::size_t within = 0, median_worse = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      within += mode_err[t] <= 8.0 * h;
      median_worse += median_err[t] > mode_err[t];
    }
    detail = "h = " + detail::num(h) + ", within 8h in " + std::to_string(within) + "/100, median worse in " +
             std::to_string(median_worse) + "/100";
    return within >= 90 && median_worse >= 80;
  });
}

inline CriterionResult median_baseline(const Options& opt) {
  return timed(8, "sample median risk bound", 60.0, [&](std::string& detail) {
    constexpr std::size_t p = 4096, s = p / 4, trials = 200;
    SignalScheme scheme;
    scheme.kind = SignalKind::signed_constant;
    scheme.amplitude = 5.0;
    std::vector<double> risk(trials);
    parallel_for(trials, resolve_threads(opt.threads), [&](std::size_t t) {
      const Rng base = detail::trial_rng(opt, 8, 0, t);
      Rng sr = base.substream("signal"), nr = base.substream("noise"), er = base.substream("estimator");
      const auto theta = make_signal(p, s, scheme, sr);
      const auto obs = sample_observation(theta, 0.0, nr);
      const auto views = decorrelate(obs.x, 0.0, er);
      const double d = sample_median(views.y_contamination) - mean(theta);
      risk[t] = static_cast<double>(p) * d * d;
    });
    const auto pd = static_cast<double>(p), sd = static_cast<double>(s);
    const double bound = 10.0 * (1.0 + sd * sd / pd * std::log(std::numbers::e * pd / (pd - 2.0 * sd)));
    const double med = median(risk);
    detail = "median p (T - mean)^2 = " + detail::num(med) + " vs bound " + detail::num(bound);
    return med <= bound;
  });
}

inline CriterionResult correlation_estimator(const Options& opt) {
  return timed(9, "correlation estimator ratio within [1/3, 3]", 300.0, [&](std::string& detail) {
    constexpr std::size_t trials = 300;
    const std::size_t dims[2] = {512, 4096};
    const double gammas[3] = {0.0, 0.9, 0.999};
    struct Cell {
      std::size_t p, s;
      double gamma;
    };
    std::vector<Cell> cells;
    for (std::size_t p : dims)
      for (std::size_t s : {std::size_t{1}, p / 8, p / 2 - 1})
        for (double g : gammas) cells.push_back({p, s, g});
    std::vector<char> ok(cells.size() * trials);
    parallel_for(ok.size(), resolve_threads(opt.threads), [&](std::size_t u) {
      const std::size_t c = u / trials, t = u % trials;
      const Cell& cell = cells[c];
      const Rng base = detail::trial_rng(opt, 9, c, t);
      Rng sr = base.substream("signal"), nr = base.substream("noise"), er = base.substream("correlation");
      SignalScheme scheme;
      scheme.amplitude = 5.0 * std::sqrt(1.0 - cell.gamma);
      const auto theta = make_signal(cell.p, cell.s, scheme, sr);
      const auto obs = sample_observation(theta, cell.gamma, nr);
      const SubsetParams sp = balanced_subset_params(cell.p);
      const double ratio = estimate_correlation(obs.x, sp.m, sp.ell, er).one_minus_gamma_hat / (1.0 - cell.gamma);
      ok[u] = ratio >= 1.0 / 3.0 && ratio <= 3.0;
    });
    bool all = true;
    std::ostringstream d;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto hits = std::count(ok.begin() + static_cast<std::ptrdiff_t>(c * trials),
                                   ok.begin() + static_cast<std::ptrdiff_t>((c + 1) * trials), 1);
      const bool pass = static_cast<double>(hits) >= 0.95 * trials;
      all = all && pass;
      d << (c ? "; " : "") << "p=" << cells[c].p << " s=" << cells[c].s << " g=" << cells[c].gamma << ": " << hits << "/" << trials
        << (pass ? "" : " FAIL");
    }
    detail = d.str();
    return all;
  });
}

inline CriterionResult adaptive_vs_oracle(const Options& opt) {
  return timed(10, "adaptive risk within 25x of the oracle", 1200.0, [&](std::string& detail) {
    constexpr std::size_t p = 8192, trials = 100;
    const std::size_t sparsities[3] = {8, p / 8, p / 2 - 64};
    const double gammas[3] = {0.0, 0.9, 0.99};
    SignalScheme scheme;
    scheme.amplitude = 10.0;
    std::vector<double> oracle_err(9 * trials), adaptive_err(9 * trials);
    parallel_for(9 * trials, resolve_threads(opt.threads), [&](std::size_t u) {
      const std::size_t c = u / trials, t = u % trials;
      const std::size_t s = sparsities[c / 3];
      const double gamma = gammas[c % 3];
      const Rng base = detail::trial_rng(opt, 10, c, t);
      Rng sr = base.substream("signal"), nr = base.substream("noise");
      Rng orng = base.substream("estimator/oracle"), arng = base.substream("estimator/adaptive");
      const auto theta = make_signal(p, s, scheme, sr);
      const auto obs = sample_observation(theta, gamma, nr);
      oracle_err[u] = squared_distance(estimate_theta(obs.x, s, gamma, PipelineConfig{}, orng), theta);
      adaptive_err[u] = squared_distance(adaptive_estimate(obs.x, LepskiConfig{}, arng), theta);
    });
    bool all = true;
    std::ostringstream d;
    for (std::size_t c = 0; c < 9; ++c) {
      const auto lo = static_cast<std::ptrdiff_t>(c * trials), hi = static_cast<std::ptrdiff_t>((c + 1) * trials);
      const double mo = median(std::vector<double>(oracle_err.begin() + lo, oracle_err.begin() + hi));
      const double ma = median(std::vector<double>(adaptive_err.begin() + lo, adaptive_err.begin() + hi));
      const std::size_t s = sparsities[c / 3];
      const double gamma = gammas[c % 3];
      const double limit = mo > 0.0 ? 25.0 * mo : 25.0 * minimax_rate_sq({p, s, gamma});
      const bool pass = ma <= limit;
      all = all && pass;
      d << (c ? "; " : "") << "s=" << s << " g=" << gamma << ": " << detail::num(ma) << " vs 25x" << detail::num(mo)
        << (pass ? "" : " FAIL");
    }
    detail = d.str();
    return all;
  });
}

inline CriterionResult appendix_suite(const Options& opt) {
  return timed(11, "delta root and separated-mixture mode location", 30.0, [&](std::string& detail) {
    bool ok = true;
    double worst_res = 0.0;
    for (double h : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
      const double d = delta_h(h);
      const double res = std::abs(d * std::tanh(d * h) - h);
      worst_res = std::max(worst_res, res);
      ok = ok && res < 1e-12 && d >= h;
    }
    const double ratio10 = delta_h(10.0) / 10.0;
    ok = ok && ratio10 <= 1.0 + 1e-6;

    constexpr std::size_t n = 100;
    std::vector<char> holds(n);
    parallel_for(n, resolve_threads(opt.threads), [&](std::size_t i) {
      Rng rng = detail::trial_rng(opt, 11, 0, i);
      const double h = 0.5 + 2.5 * rng.uniform();
      const double mu = 20.0 * rng.uniform() - 10.0;
      const std::size_t k = 1 + rng.below(20);
      std::vector<double> etas(k);
      for (double& eta : etas) {
        const double sep = 30.0 * h * (1.0 + 1e-9 + 2.0 * rng.uniform());
        eta = mu + (rng.below(2) == 0 ? sep : -sep);
      }
      holds[i] = check_local_mode_dominance(mu, etas, h, 30.0).holds;
    });
    const auto n_hold = std::count(holds.begin(), holds.end(), 1);
    ok = ok && n_hold == static_cast<long>(n);
    detail = "max residual " + detail::num(worst_res) + ", delta(10)/10 - 1 = " + detail::num(ratio10 - 1.0) + ", " +
             std::to_string(n_hold) + "/100 mixtures hold";
    return ok;
  });
}

inline ExperimentConfig determinism_config(const Options& opt) {
  ExperimentConfig cfg = dense_config(opt);
  cfg.sparsity = {300, 8};
  cfg.estimators = {"raw-data", "oracle"};
  return cfg;
}

inline CriterionResult determinism(const Options& opt) {
  return timed(12, "simulate output identical for 1 and 8 threads", 20.0, [&](std::string& detail) {
    const ExperimentConfig cfg = determinism_config(opt);
    const std::string a = risk_csv(run_risk_experiment(cfg, 1));
    const std::string b = risk_csv(run_risk_experiment(cfg, 8));
    detail = std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different");
    return a == b;
  });
}

struct Criterion {
  int id;
  CriterionResult (*run)(const Options&);
};

inline const std::vector<Criterion>& all_criteria() {
  static const std::vector<Criterion> list = {
      {1, population_gaussian_mode}, {2, population_huber_mode}, {3, perfect_correlation}, {4, dense_identity},
      {5, lasso_certification},      {6, correlation_blessing},  {7, kernel_mode_guarantee}, {8, median_baseline},
      {9, correlation_estimator},    {10, adaptive_vs_oracle},   {11, appendix_suite},       {12, determinism},
  };
  return list;
}

inline std::string format_line(const CriterionResult& r) {
  char head[160];
  std::snprintf(head, sizeof head, "%s [%2d] %s (%.2fs / %.0fs budget): ", r.passed ? "PASS" : "FAIL", r.id, r.title.c_str(),
                r.seconds, r.budget_seconds);
  return head + r.detail;
}

}  // namespace eqcorr::verify
