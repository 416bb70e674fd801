#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eqcorr/eqcorr.hpp"
#include "eqcorr/figures.hpp"
#include "eqcorr/harness.hpp"
#include "eqcorr/verify.hpp"

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out;
  std::string config;
};

std::vector<double> read_column(std::istream& in, const std::string& name) {
  std::vector<double> v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto comma = line.find(',', first);
    const std::string cell = line.substr(first, comma == std::string::npos ? std::string::npos : comma - first);
    char* end = nullptr;
    const double x = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str()) {
      if (v.empty() && line_no == 1) continue;  // header
      throw UsageError(name + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
    }
    v.push_back(x);
  }
  if (v.empty()) throw UsageError(name + ": no values");
  return v;
}

std::vector<double> read_vector(const std::string& path) {
  if (path == "-") return read_column(std::cin, "<stdin>");
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open input '" + path + "'");
  return read_column(in, path);
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    eqcorr::write_text(out_path, text);
  }
}

double gamma_from(std::optional<double> gamma, std::optional<double> kappa, std::size_t p) {
  if (gamma && kappa) throw UsageError("give --gamma or --kappa, not both");
  if (kappa) return 1.0 - std::pow(static_cast<double>(p), -*kappa);
  if (gamma) return *gamma;
  throw UsageError("one of --gamma or --kappa is required");
}

int run_rates(const Globals& g, std::size_t p, std::optional<std::size_t> s, std::optional<double> gamma,
              std::optional<double> kappa) {
  const double gm = gamma_from(gamma, kappa, p);
  if (s) {
    std::cout << eqcorr::format_double(eqcorr::minimax_rate_sq({p, *s, gm})) << '\n';
    return 0;
  }
  std::ostringstream csv;
  csv << "s,rate_sq\n";
  for (std::size_t k = 1; k <= p; ++k) csv << k << ',' << eqcorr::format_double(eqcorr::minimax_rate_sq({p, k, gm})) << '\n';
  emit(g.out, csv.str());
  return 0;
}

struct EstimateArgs {
  std::string input = "-";
  std::string estimator = "oracle";
  std::optional<std::size_t> s;
  std::optional<double> gamma;
  std::string trace;
};

int run_estimate(const Globals& g, const EstimateArgs& a) {
  const std::vector<double> x = read_vector(a.input);
  eqcorr::ExperimentConfig cfg;
  if (!g.config.empty()) cfg = eqcorr::load_config(g.config);
  eqcorr::Rng rng(g.seed.value_or(cfg.seed));
  std::vector<double> est;
  if (a.estimator == "adaptive") {
    const auto detailed = eqcorr::adaptive_estimate_detailed(x, cfg.lepski, rng);
    est = detailed.theta_hat;
    if (!a.trace.empty()) {
      nlohmann::json j;
      j["projection"] = eqcorr::to_json(detailed.projection.trace);
      j["linear"] = eqcorr::to_json(detailed.linear.trace);
      eqcorr::write_text(a.trace, j.dump(2) + "\n");
    }
  } else {
    if (std::find(eqcorr::known_estimators().begin(), eqcorr::known_estimators().end(), a.estimator) ==
        eqcorr::known_estimators().end())
      throw UsageError("unknown estimator '" + a.estimator + "'");
    if (!a.s || !a.gamma) throw UsageError("--s and --gamma are required for estimator '" + a.estimator + "'");
    if (!eqcorr::estimator_applicable(a.estimator, x.size(), *a.s, *a.gamma))
      throw UsageError("estimator '" + a.estimator + "' is not defined at this (s, gamma)");
    est = eqcorr::run_estimator(a.estimator, x, *a.s, *a.gamma, cfg, rng);
  }
  std::ostringstream out;
  for (double v : est) out << eqcorr::format_double(v) << '\n';
  emit(g.out, out.str());
  return 0;
}

int run_simulate(const Globals& g) {
  if (g.config.empty()) throw UsageError("simulate requires --config");
  eqcorr::ExperimentConfig cfg = eqcorr::load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.out_dir = g.out;
  const eqcorr::RiskReport report = eqcorr::run_risk_experiment(cfg, g.threads);
  std::filesystem::create_directories(cfg.out_dir);
  const auto dir = std::filesystem::path(cfg.out_dir);
  eqcorr::write_text((dir / "risk.csv").string(), eqcorr::risk_csv(report));
  eqcorr::write_text((dir / "timing.csv").string(), eqcorr::timing_csv(report));
  std::cout << (dir / "risk.csv").string() << '\n';
  for (const auto& c : report.cells)
    if (c.degraded) std::cerr << "warning: cell " << c.estimator << " s=" << c.s << " gamma=" << c.gamma << " degraded\n";
  return 0;
}

int run_figures(const Globals& g, const std::string& id) {
  const std::string dir = g.out.empty() ? "." : g.out;
  std::vector<eqcorr::FigureId> ids;
  if (id == "all") ids = {eqcorr::FigureId::fig1, eqcorr::FigureId::fig2, eqcorr::FigureId::fig3};
  else ids = {eqcorr::parse_figure_id(id)};
  for (auto f : ids) {
    const auto out = eqcorr::reproduce_figure(f, dir);
    std::cout << out.csv_path << '\n' << out.svg_path << '\n';
    if (out.mode) std::cout << "mode " << eqcorr::format_double(*out.mode) << '\n';
  }
  return 0;
}

struct MixtureArgs {
  double mu = 0.0;
  std::vector<double> etas;
  double h = 1.0;
  double weight_mu = 0.5;
  std::string kind = "gaussian";
  bool locate = false;
  std::vector<double> at;
};

int run_mixture(const MixtureArgs& a) {
  eqcorr::MixtureSpec spec;
  spec.mu = a.mu;
  spec.etas = a.etas;
  spec.h = a.h;
  spec.weight_mu = a.weight_mu;
  spec.kind = a.kind == "huber" ? eqcorr::MixtureKind::huber : eqcorr::MixtureKind::gaussian;
  spec.validate();
  if (!a.locate && a.at.empty()) throw UsageError("mixture needs --locate or --at");
  for (double t : a.at)
    std::cout << eqcorr::format_double(t) << ',' << eqcorr::format_double(eqcorr::population_G(t, spec)) << ','
              << eqcorr::format_double(eqcorr::population_J(t, spec)) << '\n';
  if (a.locate) std::cout << eqcorr::format_double(eqcorr::find_mode(spec).location) << '\n';
  return 0;
}

int run_verify(const Globals& g, const std::vector<int>& which) {
  eqcorr::verify::Options opt;
  if (g.seed) opt.seed = *g.seed;
  opt.threads = g.threads;
  bool all = true;
  for (const auto& c : eqcorr::verify::all_criteria()) {
    if (!which.empty() && std::find(which.begin(), which.end(), c.id) == which.end()) continue;
    const auto r = c.run(opt);
    std::cout << eqcorr::verify::format_line(r) << std::endl;
    all = all && r.passed;
  }
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse signal estimation under equicorrelated Gaussian noise"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--threads", g.threads, "Worker threads (0: EQCORR_THREADS or hardware)");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_option("--config", g.config, "JSON experiment config");

  std::size_t rp = 0;
  std::optional<std::size_t> rs;
  std::optional<double> rgamma, rkappa;
  auto* rates = app.add_subcommand("rates", "Print the squared minimax rate, or a table over s");
  rates->add_option("--p", rp, "Dimension")->required()->check(CLI::Range(2.0, 1e12));
  rates->add_option("--s", rs, "Sparsity (omit for a table over 1..p)");
  rates->add_option("--gamma", rgamma, "Correlation")->check(CLI::Range(0.0, 1.0));
  rates->add_option("--kappa", rkappa, "Correlation as gamma = 1 - p^-kappa")->check(CLI::NonNegativeNumber);

  EstimateArgs ea;
  auto* estimate = app.add_subcommand("estimate", "Run one estimator on a single-column CSV vector");
  estimate->add_option("--input", ea.input, "CSV path, '-' for stdin");
  estimate->add_option("--estimator", ea.estimator, "oracle, adaptive, raw-data, two-groups, median-plugin, decorrelate-regress");
  estimate->add_option("--s", ea.s, "Sparsity");
  estimate->add_option("--gamma", ea.gamma, "Correlation")->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--trace", ea.trace, "Write the adaptive selection trace as JSON");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo risk experiment from --config");

  std::string fig_id = "all";
  auto* figures = app.add_subcommand("figures", "Write figure CSV and SVG files");
  figures->add_option("--id", fig_id, "fig1, fig2, fig3 or all");

  MixtureArgs ma;
  auto* mixture = app.add_subcommand("mixture", "Evaluate or locate the population mode");
  mixture->set_help_flag("--help", "Print this help message and exit");
  mixture->add_option("--mu", ma.mu, "Inlier location")->required();
  mixture->add_option("--eta", ma.etas, "Outlier locations")->required();
  mixture->add_option("--h", ma.h, "Window half-width")->check(CLI::PositiveNumber);
  mixture->add_option("--weight-mu", ma.weight_mu, "Inlier mass")->check(CLI::Range(0.0, 1.0));
  mixture->add_option("--kind", ma.kind, "gaussian or huber")->check(CLI::IsMember({"gaussian", "huber"}));
  mixture->add_flag("--locate", ma.locate, "Print the maximizer of G");
  mixture->add_option("--at", ma.at, "Print t,G,J at these points");

  std::vector<int> criteria;
  auto* verify = app.add_subcommand("verify", "Run the acceptance suites");
  verify->add_option("--criteria", criteria, "Criterion ids (default: all)")->delimiter(',');

  for (auto* sub : {rates, estimate, simulate, figures, mixture, verify}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*rates) return run_rates(g, rp, rs, rgamma, rkappa);
    if (*estimate) return run_estimate(g, ea);
    if (*simulate) return run_simulate(g);
    if (*figures) return run_figures(g, fig_id);
    if (*mixture) return run_mixture(ma);
    if (*verify) return run_verify(g, criteria);
  } catch (const eqcorr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
