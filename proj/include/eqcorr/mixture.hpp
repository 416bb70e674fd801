#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace eqcorr {

/// Upper tail of the standard normal.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }
inline double normal_cdf(double x) { return normal_sf(-x); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Phi(b) - Phi(a) for a <= b, evaluated on whichever side keeps both tails small.
inline double normal_mass(double a, double b) {
  if (a >= 0.0) return normal_sf(a) - normal_sf(b);
  if (b <= 0.0) return normal_sf(-b) - normal_sf(-a);
  return 1.0 - normal_sf(b) - normal_sf(-a);
}

// Gaussian mass within distance h of t for a unit normal centred at c.
inline double window_mass(double t, double c, double h) { return normal_mass(t - c - h, t - c + h); }

enum class MixtureKind { gaussian, huber };

/// Location mixture smoothed by the box kernel: an inlier component at mu
/// with weight weight_mu, and outlier components at each eta sharing the rest
/// of the mass equally. Huber kind replaces each outlier's Gaussian window by
/// the closed indicator 1{|t - eta| <= h}.
struct MixtureSpec {
  double mu = 0.0;
  std::vector<double> etas;
  double weight_mu = 0.5;
  double h = 1.0;
  MixtureKind kind = MixtureKind::gaussian;

  void validate() const {
    if (etas.empty()) throw std::invalid_argument("mixture spec needs at least one outlier location");
    if (!(weight_mu >= 0.0 && weight_mu <= 1.0)) throw std::invalid_argument("weight_mu must lie in [0, 1]");
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("h must be positive");
  }

  // Two-point spec from a sparsity level, as in the population analysis.
  static MixtureSpec two_point(double mu, double eta, std::size_t p, std::size_t s, double h,
                               MixtureKind kind = MixtureKind::gaussian) {
    MixtureSpec spec;
    spec.mu = mu;
    spec.etas = {eta};
    spec.weight_mu = static_cast<double>(p - s) / static_cast<double>(p);
    spec.h = h;
    spec.kind = kind;
    return spec;
  }
};

namespace detail {

inline double outlier_window(double t, double eta, double h, MixtureKind kind) {
  if (kind == MixtureKind::huber) return std::abs(t - eta) <= h ? 1.0 : 0.0;
  return window_mass(t, eta, h);
}

inline double outlier_sum(double t, const MixtureSpec& spec) {
  double acc = 0.0;
  for (double eta : spec.etas) acc += outlier_window(t, eta, spec.h, spec.kind);
  return acc;
}

}  // namespace detail

inline double population_G(double t, const MixtureSpec& spec) {
  spec.validate();
  const double k = static_cast<double>(spec.etas.size());
  const double inlier = spec.weight_mu * window_mass(t, spec.mu, spec.h);
  const double outliers = (1.0 - spec.weight_mu) / k * detail::outlier_sum(t, spec);
  return (inlier + outliers) / (2.0 * spec.h);
}

/// The part of G made of matched inlier/outlier pairs; G - J is the surplus
/// inlier term (2 weight_mu - 1) * window / 2h.
inline double population_J(double t, const MixtureSpec& spec) {
  spec.validate();
  const double k = static_cast<double>(spec.etas.size());
  const double q = (1.0 - spec.weight_mu) / k;
  const double paired = q * (k * window_mass(t, spec.mu, spec.h) + detail::outlier_sum(t, spec));
  return paired / (2.0 * spec.h);
}

/// f(x) = sum_i [window at mu + window at eta_i], unnormalized.
inline double mixture_f(double x, double mu, std::span<const double> etas, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("mixture_f: h must be positive");
  const double inlier = window_mass(x, mu, h);
  double acc = 0.0;
  for (double eta : etas) acc += inlier + window_mass(x, eta, h);
  return acc;
}

/// phi(x + h) - phi(x - h).
inline double gamma_h(double x, double h) { return normal_pdf(x + h) - normal_pdf(x - h); }

struct ModeSearch {
  double lo = 0.0;
  double hi = 0.0;
  double coarse_step = 0.0;  // 0 selects h / 20 for spec-based searches
  double refine_tol = 1e-10;
  double near_tie = 1e-6;
};

struct ModeSearchResult {
  double location = 0.0;
  double value = 0.0;
  double certified_radius = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
};

namespace detail {

struct Probe {
  double x;
  double v;
  bool better_than(const Probe& o) const { return v > o.v || (v == o.v && x < o.x); }
};

// Golden-section maximization on [a, b]; returns the best point probed and
// leaves the final bracket width in `width`.
template <class F>
Probe golden_max(const F& f, double a, double b, double tol, double& width) {
  constexpr double inv_phi = 0.6180339887498949;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  Probe best{a, f(a)};
  auto consider = [&](double x, double v) {
    const Probe pr{x, v};
    if (pr.better_than(best)) best = pr;
  };
  consider(b, f(b));
  double fc = f(c);
  double fd = f(d);
  consider(c, fc);
  consider(d, fd);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
      consider(d, fd);
    }
    if (!(c > a && d < b)) break;
  }
  width = b - a;
  return best;
}

}  // namespace detail

/// Global maximizer of a bounded function on [search.lo, search.hi]: coarse
/// grid scan, then golden-section refinement around every grid cell whose
/// value is within search.near_tie of the best grid value.
template <class F>
ModeSearchResult find_mode(const F& f, const ModeSearch& search) {
  if (!(search.hi > search.lo)) throw std::invalid_argument("find_mode: empty bracket");
  if (!(search.coarse_step > 0.0)) throw std::invalid_argument("find_mode: coarse_step must be positive");
  const double span = search.hi - search.lo;
  const auto cells = static_cast<std::size_t>(std::ceil(span / search.coarse_step));
  const double step = span / static_cast<double>(cells);

  std::vector<double> xs(cells + 1);
  std::vector<double> vs(cells + 1);
  detail::Probe best{search.lo, -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i <= cells; ++i) {
    xs[i] = i == cells ? search.hi : search.lo + step * static_cast<double>(i);
    vs[i] = f(xs[i]);
    const detail::Probe pr{xs[i], vs[i]};
    if (pr.better_than(best)) best = pr;
  }
  const double grid_best = best.v;

  double radius = step;
  for (std::size_t i = 0; i <= cells; ++i) {
    if (vs[i] < grid_best - search.near_tie) continue;
    const double a = xs[i == 0 ? 0 : i - 1];
    const double b = xs[i == cells ? cells : i + 1];
    double width = 0.0;
    const detail::Probe local = detail::golden_max(f, a, b, search.refine_tol, width);
    if (local.better_than(best)) {
      best = local;
      radius = width;
    } else if (best.x == xs[i]) {
      radius = std::min(radius, width);
    }
  }

  return {best.x, best.v, radius, search.lo, search.hi};
}

inline ModeSearch default_search(double mu, std::span<const double> etas, double h) {
  double lo = mu, hi = mu;
  for (double eta : etas) {
    lo = std::min(lo, eta);
    hi = std::max(hi, eta);
  }
  const double pad = 5.0 * (h + 1.0);
  ModeSearch s;
  s.lo = lo - pad;
  s.hi = hi + pad;
  s.coarse_step = h / 20.0;
  return s;
}

namespace detail {

inline void check_covers(const ModeSearch& search, double mu, std::span<const double> etas) {
  auto inside = [&](double v) { return v >= search.lo && v <= search.hi; };
  if (!inside(mu)) throw std::invalid_argument("find_mode: bracket does not cover the inlier location");
  for (double eta : etas)
    if (!inside(eta)) throw std::invalid_argument("find_mode: bracket does not cover every outlier location");
}

}  // namespace detail

inline ModeSearchResult find_mode(const MixtureSpec& spec, ModeSearch search) {
  spec.validate();
  detail::check_covers(search, spec.mu, spec.etas);
  if (search.coarse_step <= 0.0) search.coarse_step = spec.h / 20.0;
  return find_mode([&](double t) { return population_G(t, spec); }, search);
}

inline ModeSearchResult find_mode(const MixtureSpec& spec) {
  return find_mode(spec, default_search(spec.mu, spec.etas, spec.h));
}

inline ModeSearchResult find_mode_f(double mu, std::span<const double> etas, double h, ModeSearch search) {
  if (etas.empty()) throw std::invalid_argument("find_mode_f: need at least one outlier location");
  detail::check_covers(search, mu, etas);
  if (search.coarse_step <= 0.0) search.coarse_step = h / 20.0;
  return find_mode([&](double x) { return mixture_f(x, mu, etas, h); }, search);
}

inline ModeSearchResult find_mode_f(double mu, std::span<const double> etas, double h) {
  return find_mode_f(mu, etas, h, default_search(mu, etas, h));
}

/// Positive root of x tanh(x h) = h.
inline double delta_h(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("delta_h: h must be positive");
  auto g = [h](double x) { return x * std::tanh(x * h) - h; };
  double lo = 0.0;
  double hi = std::max(h, 1.0);
  while (g(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  for (int k = 0; k < 2000; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return std::abs(g(lo)) <= std::abs(g(hi)) ? lo : hi;
}

struct LocalModeCheck {
  bool holds = false;
  double witness = 0.0;        // maximizer of f within h/4 of mu
  double local_value = 0.0;    // f at the witness
  double global_location = 0.0;
  double global_value = 0.0;
};

/// Numerically checks that the maximum of f over |x - mu| <= h/4 equals its
/// global maximum, for outlier locations separated from mu by more than c_b h.
inline LocalModeCheck check_local_mode_dominance(double mu, std::span<const double> etas, double h, double c_b = 30.0) {
  if (!(h > 0.0)) throw std::invalid_argument("check_local_mode_dominance: h must be positive");
  if (etas.empty()) throw std::invalid_argument("check_local_mode_dominance: need at least one outlier location");
  for (double eta : etas)
    if (!(std::abs(mu - eta) > c_b * h)) throw std::invalid_argument("check_local_mode_dominance: separation precondition violated");

  auto f = [&](double x) { return mixture_f(x, mu, etas, h); };
  const ModeSearchResult global = find_mode_f(mu, etas, h);

  ModeSearch near;
  near.lo = mu - h / 4.0;
  near.hi = mu + h / 4.0;
  near.coarse_step = h / 200.0;
  const ModeSearchResult local = find_mode(f, near);

  LocalModeCheck out;
  out.global_location = global.location;
  out.global_value = global.value;
  out.witness = local.location;
  out.local_value = local.value;
  const double slack = 1e-12 * std::max(1.0, std::abs(global.value));
  const bool located_near = std::abs(global.location - mu) <= h / 4.0 + global.certified_radius;
  out.holds = located_near || local.value >= global.value - slack;
  return out;
}

}  // namespace eqcorr
