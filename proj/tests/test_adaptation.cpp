#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "eqcorr/adaptation.hpp"
#include "eqcorr/core_model.hpp"
#include "eqcorr/stats.hpp"

using namespace eqcorr;

namespace {

double sample_variance(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

std::vector<double> gaussian_vector(std::size_t p, Rng& r) {
  std::vector<double> x(p);
  for (double& v : x) v = r.normal();
  return x;
}

CorrelationEstimate fixed_correlation(double one_minus_gamma) {
  CorrelationEstimate c;
  c.one_minus_gamma_hat = one_minus_gamma;
  return c;
}

}  // namespace

TEST(SubsetParams, UnionBoundValues) {
  const auto a = default_subset_params(729);
  EXPECT_EQ(a.ell, 8u);
  EXPECT_EQ(a.m, 328050u);
  const auto b = default_subset_params(8);
  EXPECT_EQ(b.ell, 6u);
  EXPECT_EQ(b.m, 36450u);
  EXPECT_THROW(default_subset_params(7), std::invalid_argument);
}

TEST(SubsetParams, UnionBoundFailureProbability) {
  for (std::size_t p = 8; p < 2000000; p = p * 3 / 2 + 1) {
    const auto sp = default_subset_params(p);
    const double uncapped = std::ceil(50.0 * std::pow(3.0, double(sp.ell)));
    EXPECT_GE(uncapped * std::pow(3.0, -double(sp.ell)), 50.0 - 1e-9) << p;
    EXPECT_EQ(sp.m, static_cast<std::size_t>(std::min(uncapped, 1e6)));
    EXPECT_GE(sp.ell, 6u);
  }
}

TEST(SubsetParams, BalancedValues) {
  const auto sp = balanced_subset_params(512);
  EXPECT_EQ(sp.ell, 50u);  // ceil(8 ln 512) = ceil(49.9)
  EXPECT_EQ(sp.m, static_cast<std::size_t>(std::ceil(10.0 * std::pow(8.0 / 7.0, 50.0))));
  EXPECT_EQ(balanced_subset_params(3).ell, 3u);  // clipped to p
  EXPECT_THROW(balanced_subset_params(2), std::invalid_argument);
}

TEST(EstimateCorrelation, ConstantInputGivesZero) {
  Rng r(1);
  const std::vector<double> x(40, 7.3);
  EXPECT_EQ(estimate_correlation(x, 100, 5, r).one_minus_gamma_hat, 0.0);
}

TEST(EstimateCorrelation, PerfectCorrelationGivesZero) {
  const std::size_t p = 64;
  const auto sp = default_subset_params(p);
  for (int rep = 0; rep < 10; ++rep) {
    Rng r(10 + rep);
    SignalScheme sc;
    sc.kind = SignalKind::uniform_range;
    sc.amplitude = 4.0;
    const auto theta = make_signal(p, 16, sc, r);
    const auto obs = sample_observation(theta, 1.0, r);
    const auto est = estimate_correlation(obs.x, sp.m, sp.ell, r);
    EXPECT_EQ(est.one_minus_gamma_hat, 0.0);
  }
}

TEST(EstimateCorrelation, RatioWithinFactorThreeAtGammaZero) {
  const std::size_t p = 512;
  const auto sp = balanced_subset_params(p);
  int ok = 0;
  for (int t = 0; t < 500; ++t) {
    Rng r(1000 + t);
    const auto x = gaussian_vector(p, r);
    const double ratio = estimate_correlation(x, sp.m, sp.ell, r).one_minus_gamma_hat;
    ok += ratio >= 1.0 / 3.0 && ratio <= 3.0;
  }
  EXPECT_GE(ok, 475);
}

TEST(EstimateCorrelation, ShiftInvariant) {
  Rng data(2);
  const auto x = gaussian_vector(200, data);
  std::vector<double> shifted(x);
  for (double& v : shifted) v += 12.5;
  Rng a(3), b(3);
  const auto ea = estimate_correlation(x, 500, 10, a);
  const auto eb = estimate_correlation(shifted, 500, 10, b);
  EXPECT_NEAR(ea.one_minus_gamma_hat, eb.one_minus_gamma_hat, 1e-12);
  EXPECT_EQ(ea.best_subset, eb.best_subset);
}

TEST(EstimateCorrelation, OrderInvariant) {
  Rng data(4);
  auto x = gaussian_vector(100, data);
  Rng a(5);
  const double base = estimate_correlation(x, 300, 8, a).one_minus_gamma_hat;
  std::reverse(x.begin(), x.end());
  Rng b(5);
  EXPECT_EQ(estimate_correlation(x, 300, 8, b).one_minus_gamma_hat, base);
}

TEST(EstimateCorrelation, MinimumOverDrawnSubsets) {
  Rng data(6);
  const auto x = gaussian_vector(50, data);
  // A single subset holding every coordinate is the full sample.
  Rng r(7);
  EXPECT_NEAR(estimate_correlation(x, 1, 50, r).one_minus_gamma_hat, sample_variance(x), 1e-12);
  // Later subsets extend the same draw sequence, so the minimum can only drop.
  double prev = INFINITY;
  for (std::size_t m : {1u, 2u, 10u, 100u, 1000u}) {
    Rng rr(8);
    const auto est = estimate_correlation(x, m, 6, rr);
    EXPECT_LE(est.one_minus_gamma_hat, prev);
    EXPECT_LT(est.best_subset, m);
    EXPECT_EQ(est.m, m);
    EXPECT_EQ(est.ell, 6u);
    prev = est.one_minus_gamma_hat;
  }
}

TEST(EstimateCorrelation, RejectsBadArguments) {
  Rng r(9);
  const std::vector<double> x(10, 1.0);
  EXPECT_THROW(estimate_correlation(x, 10, 2, r), std::invalid_argument);
  EXPECT_THROW(estimate_correlation(x, 10, 11, r), std::invalid_argument);
  EXPECT_THROW(estimate_correlation(x, 0, 5, r), std::invalid_argument);
}

TEST(Grids, HandComputedAt1024) {
  EXPECT_EQ(lasso_grid(1024), (std::vector<std::size_t>{1, 1024}));
  EXPECT_EQ(lasso_grid(8192), (std::vector<std::size_t>{1, 2, 4, 8, 8192}));
  EXPECT_EQ(lasso_grid(100), (std::vector<std::size_t>{100}));
  EXPECT_EQ(lasso_grid(100, 10.0), (std::vector<std::size_t>{1, 2, 4, 8, 100}));
  // 2^k between 1024^(1/4) ~ 5.66 and 32: k = 3, 4, 5.
  EXPECT_EQ(linear_grid(1024), (std::vector<std::size_t>{1, 480, 496, 504, 511, 1024}));
}

TEST(Grids, ConfidenceLevels) {
  const double k = 4.0;
  EXPECT_DOUBLE_EQ(log_inverse_confidence(1024, 511, k), k);
  EXPECT_NEAR(log_inverse_confidence(1024, 480, k), k * 0.25, 1e-15);
  EXPECT_NEAR(log_inverse_confidence(1024, 1, k), k * 1024.0 / (1022.0 * 1022.0), 1e-15);
  // p^(1/32) caps the ratio when p - 2s is small.
  EXPECT_NEAR(log_inverse_confidence(1 << 20, (1 << 19) - 32, k), k * std::pow(double(1 << 20), 1.0 / 32.0), 1e-12);
}

TEST(ModeBranch, ActivationArithmetic) {
  LepskiConfig cfg;
  // s = 511 at p = 1024: log(e p / 4) = 6.56.
  const double log_term = std::log(std::numbers::e * 1024.0 / 4.0);
  EXPECT_TRUE(mode_branch_active(1024, 511, 16.0 / log_term - 1e-9, cfg));
  EXPECT_FALSE(mode_branch_active(1024, 511, 16.0 / log_term + 1e-9, cfg));
  // s = 480: log(e p / 64^2) < 0, active for any correlation estimate.
  EXPECT_TRUE(mode_branch_active(1024, 480, 1e6, cfg));
  EXPECT_FALSE(mode_branch_active(1024, 1, 0.0, cfg));    // Lasso regime
  EXPECT_FALSE(mode_branch_active(1024, 512, 0.0, cfg));  // not below p/2
}

TEST(ModeBranch, CandidatesUseBandwidthRadius) {
  Rng r(11);
  const auto x = gaussian_vector(1024, r);
  LepskiConfig cfg;
  const auto strong = lepski_linear(x, cfg, fixed_correlation(0.01));
  for (const auto& c : strong.trace.candidates) {
    if (c.s == 1) {
      EXPECT_EQ(c.branch, "lasso");
    }
    if (c.s >= 480 && c.s < 512) {
      EXPECT_EQ(c.branch, "mode") << c.s;
      EXPECT_NEAR(c.tuning, adaptive_bandwidth(1024, c.s, 0.01, cfg), 1e-15);
      EXPECT_DOUBLE_EQ(c.radius, cfg.r_const * c.tuning);
    }
  }
  const auto weak = lepski_linear(x, cfg, fixed_correlation(100.0));
  for (const auto& c : weak.trace.candidates) {
    if (c.s != 511) continue;
    EXPECT_EQ(c.branch, "sample-mean");
    EXPECT_DOUBLE_EQ(c.radius, cfg.r_const);
    EXPECT_DOUBLE_EQ(c.estimate, mean(x));
  }
}

TEST(AdaptiveBandwidth, FloorAtOne) {
  LepskiConfig cfg;
  // s = 480: both logs are negative, so the bracket is floored at 1.
  EXPECT_NEAR(adaptive_bandwidth(1024, 480, 0.04, cfg), std::sqrt(2.0) * std::sqrt(0.04), 1e-15);
  const double inner = std::log(std::numbers::e * 1024.0 / 4.0) + std::log(4.0);
  EXPECT_NEAR(adaptive_bandwidth(1024, 511, 0.04, cfg), std::sqrt(2.0) * std::sqrt(0.04 * inner), 1e-15);
}

TEST(LepskiProjection, IdenticalCandidatesSelectSmallest) {
  const std::vector<double> x(8192, 2.0);
  const auto sel = lepski_projection(x, LepskiConfig{}, fixed_correlation(1.0));
  EXPECT_EQ(sel.trace.selected_s, 1u);
  ASSERT_TRUE(sel.trace.witness_index.has_value());
  EXPECT_EQ(*sel.trace.witness_index, 0u);
  for (double v : sel.v_hat) EXPECT_EQ(v, 0.0);
}

TEST(LepskiProjection, NoLassoCandidatesFallsBackToCenteredData) {
  Rng r(12);
  const auto x = gaussian_vector(64, r);
  const auto sel = lepski_projection(x, LepskiConfig{}, fixed_correlation(1.0));
  EXPECT_EQ(sel.trace.selected_s, 64u);
  EXPECT_FALSE(sel.trace.witness_index.has_value());
  const double m = mean(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(sel.v_hat[i], x[i] - m);
}

TEST(LepskiProjection, PerfectCorrelationIsExact) {
  const std::size_t p = 1568;
  Rng r(13);
  SignalScheme sc;
  sc.amplitude = 50.0;
  const auto theta = make_signal(p, 1, sc, r);
  const auto obs = sample_observation(theta, 1.0, r);
  const auto sel = lepski_projection(obs.x, LepskiConfig{}, r);
  EXPECT_EQ(sel.trace.one_minus_gamma_hat, 0.0);
  const double tm = mean(theta);
  double err = 0.0;
  for (std::size_t i = 0; i < p; ++i) err += (sel.v_hat[i] - (theta[i] - tm)) * (sel.v_hat[i] - (theta[i] - tm));
  EXPECT_LT(err, 1e-20 * squared_norm(theta));
}

TEST(LepskiProjection, WitnessInsideEveryLaterBall) {
  for (int rep = 0; rep < 5; ++rep) {
    Rng r(20 + rep);
    SignalScheme sc;
    sc.amplitude = 8.0;
    const auto theta = make_signal(8192, 4, sc, r);
    const auto obs = sample_observation(theta, 0.5, r);
    const auto sel = lepski_projection(obs.x, LepskiConfig{}, r);
    const auto& tr = sel.trace;
    EXPECT_NE(std::find(tr.grid.begin(), tr.grid.end(), tr.selected_s), tr.grid.end());
    if (!tr.witness_index) continue;
    const std::size_t w = *tr.witness_index;
    std::size_t covered = 0;
    for (const auto& chk : tr.checks) {
      if (chk.witness_s != tr.selected_s) continue;
      EXPECT_TRUE(chk.inside);
      EXPECT_LE(chk.distance, chk.radius * (1 + 1e-12) + 1e-9);
      EXPECT_GE(chk.center_s, chk.witness_s);
      ++covered;
    }
    EXPECT_EQ(covered, tr.candidates.size() - w);
    for (std::size_t j = 0; j < tr.candidates.size(); ++j)
      EXPECT_NEAR(tr.candidates[j].radius, std::sqrt(13.0 * double(tr.candidates[j].s)) * tr.candidates[j].tuning, 1e-9);
  }
}

TEST(LepskiLinear, NullSignalStaysNearZero) {
  const std::size_t p = 1024;
  LepskiConfig cfg;
  const double bound = 3.0 * std::sqrt(1.0 / double(p)) * cfg.r_const;
  int ok = 0;
  for (int t = 0; t < 100; ++t) {
    Rng r(400 + t);
    const auto x = gaussian_vector(p, r);
    ok += std::abs(lepski_linear(x, cfg, r).t_hat) <= bound;
  }
  EXPECT_GE(ok, 95);
}

TEST(LepskiLinear, NearHalfSparsityUsesTheMode) {
  // Union-bound subsets: with half the coordinates in the support only
  // subsets of size O(log p) avoid it with useful probability.
  const std::size_t p = 16384, s = (p - 128) / 2;
  const double gamma = 0.99;
  LepskiConfig cfg;
  cfg.subset_policy = SubsetPolicy::union_bound;
  SignalScheme sc;
  sc.amplitude = 20.0;
  const double gap = double(p) - 2.0 * double(s);
  const double bound = 16.0 * std::sqrt((1 - gamma) * std::log(std::numbers::e * double(p) / (gap * gap)));
  int ok = 0;
  for (int t = 0; t < 100; ++t) {
    Rng r(500 + t);
    const auto theta = make_signal(p, s, sc, r);
    const auto obs = sample_observation(theta, gamma, r);
    ok += std::abs(lepski_linear(obs.x, cfg, r).t_hat - mean(theta)) <= bound;
  }
  EXPECT_GE(ok, 90);
}

TEST(LepskiLinear, RejectsSmallP) {
  const std::vector<double> x(15, 0.0);
  Rng r(14);
  EXPECT_THROW(lepski_linear(x, LepskiConfig{}, r), std::invalid_argument);
  LepskiConfig bad;
  bad.eta = 1.0;
  const std::vector<double> y(64, 0.0);
  EXPECT_THROW(lepski_linear(y, bad, r), std::invalid_argument);
}

namespace {

double perfect_correlation_error(std::size_t p, std::size_t s, const LepskiConfig& cfg, std::uint64_t seed) {
  Rng r(seed);
  SignalScheme sc;
  sc.kind = SignalKind::uniform_range;
  sc.amplitude = 6.0;
  const auto theta = make_signal(p, s, sc, r);
  const auto obs = sample_observation(theta, 1.0, r);
  const auto est = adaptive_estimate(obs.x, cfg, r);
  return squared_distance(est, theta) / (double(p) * (1.0 + obs.w * obs.w));
}

}  // namespace

TEST(AdaptiveEstimate, PerfectCorrelationIsExact) {
  // Balanced subsets (size ~8 log p) avoid a support of up to about p/8.
  for (std::size_t s : {1u, 100u}) EXPECT_LT(perfect_correlation_error(2048, s, LepskiConfig{}, 600 + s), 1e-18) << s;
}

TEST(AdaptiveEstimate, PerfectCorrelationIsExactUpToHalfWithUnionBoundSubsets) {
  LepskiConfig cfg;
  cfg.subset_policy = SubsetPolicy::union_bound;
  for (std::size_t s : {1u, 100u, 900u, 1023u}) EXPECT_LT(perfect_correlation_error(2048, s, cfg, 650 + s), 1e-18) << s;
}

TEST(AdaptiveEstimate, NullSignalCost) {
  const std::size_t p = 2048;
  std::vector<double> errs;
  for (int t = 0; t < 31; ++t) {
    Rng r(700 + t);
    const auto x = gaussian_vector(p, r);
    errs.push_back(squared_norm(adaptive_estimate(x, LepskiConfig{}, r)));
  }
  EXPECT_LE(median(errs), 25.0 * std::log(std::numbers::e * double(p)));
}

TEST(AdaptiveEstimate, DecompositionMatchesSelectors) {
  Rng r(15);
  const auto x = gaussian_vector(256, r);
  const auto est = adaptive_estimate_detailed(x, LepskiConfig{}, r);
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_DOUBLE_EQ(est.theta_hat[i], est.projection.v_hat[i] + est.linear.t_hat);
  EXPECT_EQ(est.projection.trace.one_minus_gamma_hat, est.correlation.one_minus_gamma_hat);
}

TEST(AdaptiveEstimate, PermutationEquivariant) {
  Rng data(16);
  const std::size_t p = 1600;
  SignalScheme sc;
  sc.amplitude = 5.0;
  const auto theta = make_signal(p, 2, sc, data);
  const auto x = sample_observation(theta, 0.7, data).x;
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), data);
  std::vector<double> xp(p);
  for (std::size_t i = 0; i < p; ++i) xp[i] = x[perm[i]];

  Rng a(17), b(17);
  const auto ea = adaptive_estimate(x, LepskiConfig{}, a);
  const auto eb = adaptive_estimate(xp, LepskiConfig{}, b);
  for (std::size_t i = 0; i < p; ++i) EXPECT_NEAR(eb[i], ea[perm[i]], 1e-7);
}
