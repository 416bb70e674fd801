// Estimate theta without knowing s or gamma and print what the selectors chose.
#include <cstdio>
#include <cstdlib>

#include "eqcorr/eqcorr.hpp"

int main(int argc, char** argv) {
  using namespace eqcorr;
  const std::size_t p = 4096;
  const std::size_t s = argc > 1 ? static_cast<std::size_t>(std::atol(argv[1])) : 4;
  const double gamma = argc > 2 ? std::atof(argv[2]) : 0.99;

  Rng rng(11);
  Rng signal_rng = rng.substream("signal"), noise_rng = rng.substream("noise");
  SignalScheme scheme;
  scheme.amplitude = 10.0;
  const auto theta = make_signal(p, s, scheme, signal_rng);
  const Observation obs = sample_observation(theta, gamma, noise_rng);

  Rng est_rng = rng.substream("adaptive");
  const AdaptiveEstimate a = adaptive_estimate_detailed(obs.x, LepskiConfig{}, est_rng);
  std::printf("true 1 - gamma %.5f, estimated %.5f (subsets %zu of size %zu)\n", 1.0 - gamma,
              a.correlation.one_minus_gamma_hat, a.correlation.m, a.correlation.ell);
  std::printf("projection selector picked s = %zu, linear selector picked s = %zu\n", a.projection.trace.selected_s,
              a.linear.trace.selected_s);
  Rng oracle_rng = rng.substream("oracle");
  const auto oracle = estimate_theta(obs.x, s, gamma, PipelineConfig{}, oracle_rng);
  std::printf("squared error adaptive %.4f, oracle %.4f, rate %.4f\n", squared_distance(a.theta_hat, theta),
              squared_distance(oracle, theta), minimax_rate_sq({p, s, gamma}));
}
