// Draw one observation, estimate theta with known (s, gamma), and compare
// against the raw data and the minimax rate.
#include <cstdio>

#include "eqcorr/eqcorr.hpp"

int main() {
  using namespace eqcorr;
  constexpr std::size_t p = 8192, s = 8;
  constexpr double gamma = 0.9;

  Rng rng(7);
  Rng signal_rng = rng.substream("signal"), noise_rng = rng.substream("noise"), est_rng = rng.substream("estimator");

  SignalScheme scheme;
  scheme.amplitude = 20.0;
  const auto theta = make_signal(p, s, scheme, signal_rng);
  const Observation obs = sample_observation(theta, gamma, noise_rng);

  const ThetaEstimate est = estimate_theta_detailed(obs.x, s, gamma, PipelineConfig{}, est_rng);
  std::printf("branch for the mean: %s\n", to_string(est.linear.choice.branch));
  std::printf("  %s\n", est.linear.choice.rationale.c_str());
  std::printf("squared error, estimator: %.4f\n", squared_distance(est.theta_hat, theta));
  std::printf("squared error, raw data:  %.4f\n", squared_distance(obs.x, theta));
  std::printf("squared minimax rate:     %.4f\n", minimax_rate_sq({p, s, gamma}));
}
