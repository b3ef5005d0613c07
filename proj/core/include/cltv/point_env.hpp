#ifndef CLTV_POINT_ENV_HPP
#define CLTV_POINT_ENV_HPP

#include <cstdint>
#include <vector>

#include "cltv/mlp.hpp"
#include "cltv/rng.hpp"

namespace cltv {

/**
 * One-dimensional continuous control task: the agent moves on [s_min, s_max]
 * and is paid 1 - min(1, |s'|) for landing near the origin. Exists to
 * exercise the Gaussian-policy pieces (KL, actor-critic updates) that the
 * tabular chain cannot.
 */
struct PointEnv1D {
  double s_min = -1.0;
  double s_max = 1.0;
  double a_max = 0.5;
  double noise = 0.0;  // stddev of additive dynamics noise

  double initial_state(Rng& rng) const;
  double clamp_action(double a) const;
  double next_state(double s, double a, Rng& rng) const;
  double reward(double next_state) const;
};

/// Gaussian policy with an MLP mean and shared fixed stddev. The mean
/// network maps a 1-D state to a 1-D linear output.
struct GaussianPolicy {
  MlpParams mean_net;
  double sigma = 0.1;

  double mean(double state) const;
  double sample(double state, Rng& rng) const;
};

/// KL(N(mu1, sigma) || N(mu2, sigma)) = (mu1 - mu2)^2 / (2 sigma^2).
double gaussian_kl(double mu1, double mu2, double sigma);

struct ContinuousTransition {
  int traj_id = 0;
  int step = 0;
  double state = 0.0;
  double action = 0.0;
  double next_state = 0.0;
  double reward = 0.0;
};

struct ContinuousDataset {
  double gamma = 0.99;
  std::vector<ContinuousTransition> transitions;
};

ContinuousDataset generate_point_dataset(const PointEnv1D& env, const GaussianPolicy& policy,
                                         int n_trajectories, int horizon, uint64_t seed,
                                         double gamma);

struct PointEvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  int n_episodes = 0;
};

PointEvalResult evaluate_point_return(const PointEnv1D& env, const GaussianPolicy& policy,
                                      int n_episodes, int horizon, uint64_t seed);

}  // namespace cltv

#endif  // CLTV_POINT_ENV_HPP
