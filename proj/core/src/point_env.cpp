#include "cltv/point_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cltv {

double PointEnv1D::initial_state(Rng& rng) const {
  return rng.uniform(s_min, s_max);
}

double PointEnv1D::clamp_action(double a) const {
  return std::clamp(a, -a_max, a_max);
}

double PointEnv1D::next_state(double s, double a, Rng& rng) const {
  double drift = noise > 0.0 ? rng.normal(0.0, noise) : 0.0;
  return std::clamp(s + clamp_action(a) + drift, s_min, s_max);
}

double PointEnv1D::reward(double next_state) const {
  return 1.0 - std::min(1.0, std::abs(next_state));
}

double GaussianPolicy::mean(double state) const {
  return mlp_forward(mean_net, {state})[0];
}

double GaussianPolicy::sample(double state, Rng& rng) const {
  return rng.normal(mean(state), sigma);
}

double gaussian_kl(double mu1, double mu2, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_kl: sigma must be positive");
  double d = mu1 - mu2;
  return d * d / (2.0 * sigma * sigma);
}

ContinuousDataset generate_point_dataset(const PointEnv1D& env, const GaussianPolicy& policy,
                                         int n_trajectories, int horizon, uint64_t seed,
                                         double gamma) {
  if (n_trajectories < 1 || horizon < 1) {
    throw std::invalid_argument("generate_point_dataset: need positive sizes");
  }
  ContinuousDataset ds;
  ds.gamma = gamma;
  Rng rng(seed);
  for (int tid = 0; tid < n_trajectories; ++tid) {
    double s = env.initial_state(rng);
    for (int step = 1; step <= horizon; ++step) {
      double a = policy.sample(s, rng);
      double s2 = env.next_state(s, a, rng);
      ds.transitions.push_back({tid, step, s, a, s2, env.reward(s2)});
      s = s2;
    }
  }
  return ds;
}

PointEvalResult evaluate_point_return(const PointEnv1D& env, const GaussianPolicy& policy,
                                      int n_episodes, int horizon, uint64_t seed) {
  if (n_episodes < 1 || horizon < 1) {
    throw std::invalid_argument("evaluate_point_return: need positive sizes");
  }
  Rng rng(seed);
  double total = 0.0, total_sq = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    double s = env.initial_state(rng);
    double ret = 0.0;
    for (int step = 0; step < horizon; ++step) {
      double a = policy.sample(s, rng);
      double s2 = env.next_state(s, a, rng);
      ret += env.reward(s2);
      s = s2;
    }
    total += ret;
    total_sq += ret * ret;
  }
  PointEvalResult res;
  res.n_episodes = n_episodes;
  res.mean = total / n_episodes;
  if (n_episodes > 1) {
    double var = (total_sq - total * total / n_episodes) / (n_episodes - 1);
    res.stddev = std::sqrt(std::max(var, 0.0));
  }
  return res;
}

}  // namespace cltv
