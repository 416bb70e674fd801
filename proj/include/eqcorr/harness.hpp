#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eqcorr/adaptation.hpp"
#include "eqcorr/core_model.hpp"
#include "eqcorr/decorrelation.hpp"
#include "eqcorr/lasso.hpp"
#include "eqcorr/mode.hpp"
#include "eqcorr/parallel.hpp"
#include "eqcorr/pipeline.hpp"
#include "eqcorr/rng.hpp"
#include "eqcorr/stats.hpp"

namespace eqcorr {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what) : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

inline const std::vector<std::string>& known_estimators() {
  static const std::vector<std::string> names = {"oracle",     "adaptive",      "raw-data",
                                                 "two-groups", "median-plugin", "decorrelate-regress"};
  return names;
}

struct ExperimentConfig {
  std::size_t p = 256;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  std::vector<std::size_t> sparsity = {1};
  std::vector<double> gammas;  // used when kappas is empty
  std::vector<double> kappas;  // gamma = 1 - p^-kappa
  SignalScheme signal;
  std::vector<std::string> estimators = {"oracle"};
  PipelineConfig pipeline;
  LepskiConfig lepski;
  std::string out_dir = ".";
  unsigned threads = 0;

  void validate() const {
    if (p < 2) throw ConfigError("p", "must be at least 2");
    if (trials < 1) throw ConfigError("trials", "must be at least 1");
    if (sparsity.empty()) throw ConfigError("sparsity", "must be a nonempty list");
    for (std::size_t s : sparsity)
      if (s < 1 || s > p) throw ConfigError("sparsity", "entries must lie in [1, p]");
    if (gammas.empty() && kappas.empty()) throw ConfigError("gamma", "give a nonempty gamma or kappa list");
    if (!gammas.empty() && !kappas.empty()) throw ConfigError("kappa", "give either gamma or kappa, not both");
    for (double g : gammas)
      if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("gamma", "entries must lie in [0, 1]");
    for (double k : kappas)
      if (!(k >= 0.0) || !std::isfinite(k)) throw ConfigError("kappa", "entries must be finite and >= 0");
    if (estimators.empty()) throw ConfigError("estimators", "must be a nonempty list");
    for (const auto& e : estimators)
      if (std::find(known_estimators().begin(), known_estimators().end(), e) == known_estimators().end())
        throw ConfigError("estimators", "unknown estimator '" + e + "'");
    if (!std::isfinite(signal.amplitude)) throw ConfigError("signal.amplitude", "must be finite");
    if (!(pipeline.regime_divisor > 0.0)) throw ConfigError("pipeline.regime_divisor", "must be positive");
    if (!(pipeline.bandwidth.c1 > 0.0)) throw ConfigError("bandwidth.c1", "must be positive");
    if (!(pipeline.bandwidth.l_delta >= 1.0)) throw ConfigError("bandwidth.l_delta", "must be >= 1");
    if (!(pipeline.lasso.tol_kkt > 0.0)) throw ConfigError("lasso.tol_kkt", "must be positive");
    if (pipeline.lasso.max_iter < 1) throw ConfigError("lasso.max_iter", "must be positive");
    try {
      lepski.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("lepski", e.what());
    }
  }

  // (gamma, kappa) pairs in cell order; kappa is NaN when gammas were given.
  std::vector<std::pair<double, double>> correlation_levels() const {
    std::vector<std::pair<double, double>> out;
    if (!kappas.empty()) {
      for (double k : kappas) out.emplace_back(1.0 - std::pow(static_cast<double>(p), -k), k);
    } else {
      for (double g : gammas) out.emplace_back(g, std::numeric_limits<double>::quiet_NaN());
    }
    return out;
  }
};

namespace detail {

inline void flatten(const nlohmann::json& j, const std::string& prefix, std::map<std::string, nlohmann::json>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out[prefix] = j;
  }
}

template <class T>
T get_as(const std::string& key, const nlohmann::json& v) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key, "has the wrong type");
  }
}

inline std::size_t get_count(const std::string& key, const nlohmann::json& v) {
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(key, "must be a nonnegative integer");
  return v.get<std::size_t>();
}

inline SignalKind parse_signal_kind(const std::string& key, const std::string& v) {
  if (v == "constant-amplitude") return SignalKind::constant_amplitude;
  if (v == "signed-constant") return SignalKind::signed_constant;
  if (v == "uniform-range") return SignalKind::uniform_range;
  if (v == "user-supplied") return SignalKind::user_supplied;
  throw ConfigError(key, "unknown signal kind '" + v + "'");
}

inline SupportRule parse_support(const std::string& key, const std::string& v) {
  if (v == "random-uniform") return SupportRule::random_uniform;
  if (v == "prefix") return SupportRule::prefix;
  throw ConfigError(key, "unknown support rule '" + v + "'");
}

}  // namespace detail

/// Reads a config from JSON. Keys are flat and dotted ("lasso.tol_kkt");
/// nested objects are accepted and flattened the same way. Unknown keys are
/// rejected with the offending key.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  std::map<std::string, nlohmann::json> flat;
  detail::flatten(j, "", flat);
  ExperimentConfig cfg;
  for (const auto& [key, v] : flat) {
    using detail::get_as;
    using detail::get_count;
    if (key == "p") cfg.p = get_count(key, v);
    else if (key == "trials") cfg.trials = get_count(key, v);
    else if (key == "seed") cfg.seed = get_as<std::uint64_t>(key, v);
    else if (key == "sparsity") cfg.sparsity = get_as<std::vector<std::size_t>>(key, v);
    else if (key == "gamma") cfg.gammas = get_as<std::vector<double>>(key, v);
    else if (key == "kappa") cfg.kappas = get_as<std::vector<double>>(key, v);
    else if (key == "signal.kind") cfg.signal.kind = detail::parse_signal_kind(key, get_as<std::string>(key, v));
    else if (key == "signal.amplitude") cfg.signal.amplitude = get_as<double>(key, v);
    else if (key == "signal.support") cfg.signal.support = detail::parse_support(key, get_as<std::string>(key, v));
    else if (key == "signal.values") cfg.signal.values = get_as<std::vector<double>>(key, v);
    else if (key == "estimators") cfg.estimators = get_as<std::vector<std::string>>(key, v);
    else if (key == "pipeline.regime_divisor") cfg.pipeline.regime_divisor = get_as<double>(key, v);
    else if (key == "bandwidth.c1") cfg.pipeline.bandwidth.c1 = get_as<double>(key, v);
    else if (key == "bandwidth.l_delta") cfg.pipeline.bandwidth.l_delta = get_as<double>(key, v);
    else if (key == "lasso.tol_kkt") cfg.pipeline.lasso.tol_kkt = cfg.lepski.lasso.tol_kkt = get_as<double>(key, v);
    else if (key == "lasso.max_iter") cfg.pipeline.lasso.max_iter = cfg.lepski.lasso.max_iter = get_count(key, v);
    else if (key == "lepski.eta") cfg.lepski.eta = get_as<double>(key, v);
    else if (key == "lepski.l_eta") cfg.lepski.l_eta = get_as<double>(key, v);
    else if (key == "lepski.k_const") cfg.lepski.k_const = get_as<double>(key, v);
    else if (key == "lepski.r_const") cfg.lepski.r_const = get_as<double>(key, v);
    else if (key == "lepski.c_eta") cfg.lepski.c_eta = get_as<double>(key, v);
    else if (key == "lepski.c1") cfg.lepski.c1 = get_as<double>(key, v);
    else if (key == "lepski.regime_divisor") cfg.lepski.regime_divisor = get_as<double>(key, v);
    else if (key == "lepski.subset_policy") {
      const auto name = get_as<std::string>(key, v);
      if (name == "balanced") cfg.lepski.subset_policy = SubsetPolicy::balanced;
      else if (name == "union-bound") cfg.lepski.subset_policy = SubsetPolicy::union_bound;
      else throw ConfigError(key, "unknown subset policy '" + name + "'");
    } else if (key == "lepski.subset_m") cfg.lepski.subset_m = get_count(key, v);
    else if (key == "lepski.subset_ell") cfg.lepski.subset_ell = get_count(key, v);
    else if (key == "out_dir") cfg.out_dir = get_as<std::string>(key, v);
    else if (key == "threads") cfg.threads = static_cast<unsigned>(get_count(key, v));
    else throw ConfigError(key, "unknown config key");
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("--config", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct RiskCell {
  std::string estimator;
  std::size_t p = 0;
  std::size_t s = 0;
  double gamma = 0.0;
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  double median = 0.0;
  double q90 = 0.0;
  std::size_t trials = 0;    // successful trials
  std::size_t failures = 0;
  bool degraded = false;     // more than 1% of trials failed
  double wall_seconds = 0.0;
  double minimax_rate_sq = 0.0;
  std::vector<double> errors;  // per-trial squared errors in trial order, NaN on failure
};

struct RiskReport {
  std::uint64_t seed = 0;
  std::size_t requested_trials = 0;
  std::vector<RiskCell> cells;
};

/// Whether an estimator is defined at (s, gamma); undefined pairs are skipped.
inline bool estimator_applicable(const std::string& name, std::size_t p, std::size_t s, double gamma) {
  if (name == "two-groups" || name == "median-plugin") return 2 * s < p && (name != "two-groups" || gamma < 1.0);
  if (name == "decorrelate-regress") return gamma < 1.0;
  if (name == "adaptive") return p >= 16;
  return true;
}

/// Runs one named estimator on x.
inline std::vector<double> run_estimator(const std::string& name, std::span<const double> x, std::size_t s, double gamma,
                                         const ExperimentConfig& cfg, Rng& rng) {
  if (name == "oracle") return estimate_theta(x, s, gamma, cfg.pipeline, rng);
  if (name == "adaptive") return adaptive_estimate(x, cfg.lepski, rng);
  if (name == "raw-data") return {x.begin(), x.end()};
  if (name == "two-groups") return estimate_theta_two_groups(x, s, std::sqrt(1.0 - gamma), cfg.pipeline, rng);
  if (name == "median-plugin") {
    const DecorrelatedViews views = decorrelate(x, gamma, rng);
    std::vector<double> out = estimate_projection(views, s, gamma, cfg.pipeline.regime_divisor, cfg.pipeline.lasso);
    const double t = sample_median(views.y_contamination);
    for (double& v : out) v += t;
    return out;
  }
  if (name == "decorrelate-regress") {
    const double lam = lambda_rule(x.size(), s, 1.0 / (1.0 - gamma));
    return solve_whitened_lasso(x, gamma, lam).beta_hat;
  }
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t cell, std::size_t trial) {
  return derive_seed(derive_seed(master, cell), trial);
}

/// Monte Carlo risk for every (s, gamma) cell and estimator. Each trial draws
/// its signal, noise and estimator randomness from streams keyed by
/// (seed, cell, trial, purpose), and results are stored by trial index, so the
/// report does not depend on the number of threads.
inline RiskReport run_risk_experiment(const ExperimentConfig& cfg, unsigned threads = 0) {
  cfg.validate();
  const auto levels = cfg.correlation_levels();
  struct CellDef {
    std::size_t s;
    double gamma;
    double kappa;
  };
  std::vector<CellDef> defs;
  for (std::size_t s : cfg.sparsity)
    for (const auto& [g, k] : levels) defs.push_back({s, g, k});

  const std::size_t n_est = cfg.estimators.size();
  const std::size_t n_cells = defs.size();
  const std::size_t units = n_cells * cfg.trials;
  std::vector<double> errors(units * n_est, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> seconds(units * n_est, 0.0);

  parallel_for(units, resolve_threads(threads == 0 ? cfg.threads : threads), [&](std::size_t u) {
    const std::size_t cell = u / cfg.trials;
    const std::size_t trial = u % cfg.trials;
    const CellDef& d = defs[cell];
    const Rng base(trial_seed(cfg.seed, cell, trial));
    Rng signal_rng = base.substream("signal");
    Rng noise_rng = base.substream("noise");
    const std::vector<double> theta = make_signal(cfg.p, d.s, cfg.signal, signal_rng);
    const Observation obs = sample_observation(theta, d.gamma, noise_rng);
    for (std::size_t e = 0; e < n_est; ++e) {
      const std::string& name = cfg.estimators[e];
      if (!estimator_applicable(name, cfg.p, d.s, d.gamma)) continue;
      Rng est_rng = base.substream("estimator/" + name);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const std::vector<double> est = run_estimator(name, obs.x, d.s, d.gamma, cfg, est_rng);
        errors[u * n_est + e] = squared_distance(est, theta);
      } catch (const std::exception&) {
        // Recorded as a failed trial (NaN).
      }
      seconds[u * n_est + e] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  });

  RiskReport report;
  report.seed = cfg.seed;
  report.requested_trials = cfg.trials;
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    const CellDef& d = defs[cell];
    for (std::size_t e = 0; e < n_est; ++e) {
      const std::string& name = cfg.estimators[e];
      if (!estimator_applicable(name, cfg.p, d.s, d.gamma)) continue;
      RiskCell rc;
      rc.estimator = name;
      rc.p = cfg.p;
      rc.s = d.s;
      rc.gamma = d.gamma;
      rc.kappa = d.kappa;
      rc.minimax_rate_sq = minimax_rate_sq({cfg.p, d.s, d.gamma});
      std::vector<double> ok;
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        const std::size_t idx = (cell * cfg.trials + t) * n_est + e;
        rc.errors.push_back(errors[idx]);
        rc.wall_seconds += seconds[idx];
        if (std::isnan(errors[idx])) ++rc.failures;
        else ok.push_back(errors[idx]);
      }
      rc.trials = ok.size();
      rc.degraded = static_cast<double>(rc.failures) > 0.01 * static_cast<double>(cfg.trials);
      if (!ok.empty()) {
        double sum = 0.0;
        for (double v : ok) sum += v;
        rc.mean = sum / static_cast<double>(ok.size());
        rc.median = quantile(ok, 0.5);
        rc.q90 = quantile(ok, 0.9);
      } else {
        rc.mean = rc.median = rc.q90 = std::numeric_limits<double>::quiet_NaN();
      }
      report.cells.push_back(std::move(rc));
    }
  }
  return report;
}

inline const char* kRiskCsvHeader = "estimator,p,s,gamma,kappa,metric,value,trials,seed";

/// Long-format CSV; wall time is left out so the file is reproducible.
inline std::string risk_csv(const RiskReport& report) {
  std::ostringstream out;
  out << kRiskCsvHeader << '\n';
  for (const RiskCell& c : report.cells) {
    const std::string prefix = c.estimator + "," + std::to_string(c.p) + "," + std::to_string(c.s) + "," +
                               format_double(c.gamma) + "," + (std::isnan(c.kappa) ? std::string() : format_double(c.kappa)) + ",";
    const std::string suffix = "," + std::to_string(c.trials) + "," + std::to_string(report.seed) + "\n";
    out << prefix << "mse_mean," << format_double(c.mean) << suffix;
    out << prefix << "mse_median," << format_double(c.median) << suffix;
    out << prefix << "mse_q90," << format_double(c.q90) << suffix;
    out << prefix << "failures," << c.failures << suffix;
    out << prefix << "degraded," << (c.degraded ? 1 : 0) << suffix;
    out << prefix << "minimax_rate_sq," << format_double(c.minimax_rate_sq) << suffix;
  }
  return out.str();
}

inline std::string timing_csv(const RiskReport& report) {
  std::ostringstream out;
  out << "estimator,p,s,gamma,wall_seconds\n";
  for (const RiskCell& c : report.cells)
    out << c.estimator << ',' << c.p << ',' << c.s << ',' << format_double(c.gamma) << ',' << format_double(c.wall_seconds) << '\n';
  return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline nlohmann::json to_json(const LepskiTrace& t) {
  nlohmann::json j;
  j["grid"] = t.grid;
  j["selected_s"] = t.selected_s;
  j["witness_index"] = t.witness_index ? nlohmann::json(*t.witness_index) : nlohmann::json(nullptr);
  j["one_minus_gamma_hat"] = t.one_minus_gamma_hat;
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : t.candidates)
    j["candidates"].push_back({{"s", c.s}, {"branch", c.branch}, {"tuning", c.tuning}, {"radius", c.radius}, {"estimate", c.estimate}});
  j["checks"] = nlohmann::json::array();
  for (const auto& c : t.checks)
    j["checks"].push_back({{"witness_s", c.witness_s}, {"center_s", c.center_s}, {"distance", c.distance}, {"radius", c.radius}, {"inside", c.inside}});
  return j;
}

}  // namespace eqcorr
