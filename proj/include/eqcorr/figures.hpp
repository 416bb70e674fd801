#pragma once

#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqcorr/core_model.hpp"
#include "eqcorr/harness.hpp"
#include "eqcorr/mixture.hpp"
#include "eqcorr/svg.hpp"

namespace eqcorr {

enum class FigureId { fig1, fig2, fig3 };

inline FigureId parse_figure_id(const std::string& name) {
  if (name == "fig1") return FigureId::fig1;
  if (name == "fig2") return FigureId::fig2;
  if (name == "fig3") return FigureId::fig3;
  throw std::invalid_argument("unknown figure '" + name + "' (expected fig1, fig2 or fig3)");
}

struct FigureOutput {
  std::string csv_path;
  std::string svg_path;
  std::optional<double> mode;  // located maximizer for fig2 / fig3
};

inline const std::vector<double>& rate_figure_kappas() {
  static const std::vector<double> k = {0.0, 0.5, 1.0, 1.5, 2.0};
  return k;
}

/// Mixture behind the population figures: inliers at -2 with mass 0.6,
/// outliers at 2 with mass 0.4 (p = 10000, s = 4000), h = 0.25.
inline MixtureSpec population_figure_spec(MixtureKind kind) {
  return MixtureSpec::two_point(-2.0, 2.0, 10000, 4000, 0.25, kind);
}

namespace detail {

inline FigureOutput rate_figure(const std::filesystem::path& dir) {
  constexpr std::size_t p = 100;
  const auto& kappas = rate_figure_kappas();
  std::ostringstream csv;
  csv << "s";
  for (double k : kappas) csv << ",kappa_" << format_double(k);
  csv << '\n';
  std::vector<double> xs;
  std::vector<std::vector<double>> ys(kappas.size());
  for (std::size_t s = 1; s <= p; ++s) {
    xs.push_back(static_cast<double>(s));
    csv << s;
    for (std::size_t k = 0; k < kappas.size(); ++k) {
      const double gamma = 1.0 - std::pow(static_cast<double>(p), -kappas[k]);
      const double r = minimax_rate_sq({p, s, gamma});
      ys[k].push_back(r);
      csv << ',' << format_double(r);
    }
    csv << '\n';
  }
  SvgPlot plot("Squared minimax rate against s, p = 100, gamma = 1 - p^-kappa", "s", "rate");
  for (std::size_t k = 0; k < kappas.size(); ++k) plot.add_series("kappa = " + format_double(kappas[k]), xs, ys[k]);

  FigureOutput out{(dir / "fig1.csv").string(), (dir / "fig1.svg").string(), std::nullopt};
  write_text(out.csv_path, csv.str());
  write_text(out.svg_path, plot.render());
  return out;
}

inline FigureOutput population_figure(const std::filesystem::path& dir, MixtureKind kind, const std::string& stem) {
  const MixtureSpec spec = population_figure_spec(kind);
  const ModeSearchResult mode = find_mode(spec);
  const bool huber = kind == MixtureKind::huber;

  std::ostringstream csv;
  csv << "t,G,J\n";
  std::vector<double> ts, gs, js;
  for (int i = 0; i <= 800; ++i) {
    const double t = -4.0 + 0.01 * i;
    ts.push_back(t);
    gs.push_back(population_G(t, spec));
    js.push_back(population_J(t, spec));
    csv << format_double(t) << ',' << format_double(gs.back()) << ',' << format_double(js.back()) << '\n';
  }
  SvgPlot plot(huber ? "Huber contamination: G and J, mu = -2, eta = 2, h = 0.25"
                     : "Gaussian contamination: G and J, mu = -2, eta = 2, h = 0.25",
               "t", "value");
  plot.add_series(huber ? "G (Huber)" : "G", ts, gs);
  plot.add_series(huber ? "J (Huber)" : "J", ts, js);
  char label[48];
  std::snprintf(label, sizeof label, "mode %.4f", mode.location);
  plot.add_marker(mode.location, label);

  FigureOutput out{(dir / (stem + ".csv")).string(), (dir / (stem + ".svg")).string(), mode.location};
  write_text(out.csv_path, csv.str());
  write_text(out.svg_path, plot.render());
  return out;
}

}  // namespace detail

inline FigureOutput reproduce_figure(FigureId id, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + out_dir + "': " + ec.message());
  switch (id) {
    case FigureId::fig1: return detail::rate_figure(dir);
    case FigureId::fig2: return detail::population_figure(dir, MixtureKind::gaussian, "fig2");
    case FigureId::fig3: return detail::population_figure(dir, MixtureKind::huber, "fig3");
  }
  throw std::invalid_argument("unknown figure");
}

}  // namespace eqcorr
