#ifndef CLTV_OFFLINE_RL_HPP
#define CLTV_OFFLINE_RL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cltv/mdp.hpp"
#include "cltv/mlp.hpp"
#include "cltv/point_env.hpp"

namespace cltv {

struct CqlConfig {
  double lr = 0.1;          // critic step size (tabular gradient step)
  double alpha = 1.0;       // conservatism coefficient on the logsumexp penalty
  double tau = 5e-3;        // polyak rate for the target table
  int batch_size = 64;
  double temperature = 1.0; // actor = softmax(Q / temperature)
};

/**
 * Tabular conservative Q-learning state. The actor is not a separate
 * parameter block: it is the softmax of the critic at the configured
 * temperature, which keeps full support so KL terms downstream stay finite.
 */
struct AcPair {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> q;         // [x][u]
  std::vector<double> q_target;  // polyak-averaged copy

  Policy actor(double temperature) const;
};

AcPair init_ac(int n_states, int n_actions);

struct CqlStats {
  double td_loss = 0.0;
  double cql_penalty = 0.0;
};

/**
 * One conservative Q-learning step on a batch sampled uniformly (with
 * replacement) from the pool:
 *   target y = r + gamma * sum_u' pi(u'|x') * Q_target(x', u'), zero when x'
 *   is terminal, with pi the softmax of the online critic;
 *   loss = mean (Q(x,u) - y)^2
 *        + alpha * mean (logsumexp_u Q(x,.) - Q(x, u_data)).
 * Throws when the pool references states or actions outside the tables.
 */
CqlStats cql_update(AcPair& ac, const CqlConfig& cfg, const std::vector<Transition>& pool,
                    const std::vector<uint8_t>& terminal, double gamma, Rng& rng);

/// Actor-critic checkpoint with gamma, environment fingerprint and config
/// hash. Loading validates the format and table shapes.
void save_ac(const AcPair& ac, double gamma, uint64_t env_fingerprint,
             const std::string& config_hash, const std::string& path);

struct LoadedAc {
  AcPair ac;
  double gamma = 0.0;
  uint64_t env_fingerprint = 0;
  std::string config_hash;
};

LoadedAc load_ac(const std::string& path);

/**
 * Continuous counterpart used on the 1-D point environment: MLP critic over
 * [s, a], Gaussian actor with an MLP mean. The critic takes one TD
 * regression step toward r + gamma * Q_target(s', mu(s')); the actor ascends
 * Q(s, mu(s)) - beta * (mu(s) - a_data)^2.
 */
struct GaussianAcConfig {
  double critic_lr = 3e-4;
  double actor_lr = 1e-4;
  double tau = 5e-3;
  double beta = 1.0;  // behaviour-regularization weight
  int batch_size = 64;
  double sigma = 0.1;
  std::vector<int> hidden = {32, 32};
};

struct GaussianAcPair {
  MlpParams critic;         // input [s, a] -> scalar
  MlpParams critic_target;
  GaussianPolicy actor;     // mean net: [s] -> scalar
  OptimizerState critic_opt;
  OptimizerState actor_opt;
};

GaussianAcPair init_gaussian_ac(const GaussianAcConfig& cfg, uint64_t seed);

struct GaussianAcStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

GaussianAcStats gaussian_ac_update(GaussianAcPair& ac, const GaussianAcConfig& cfg,
                                   const ContinuousDataset& data, Rng& rng);

/// Direction of the actor update for one state/action pair, used to compare
/// against a pure behaviour-cloning step. Returned as a flat parameter-space
/// vector (weights then biases, layer by layer).
std::vector<double> gaussian_actor_update_direction(const GaussianAcPair& ac, double beta,
                                                    double state, double action_data);

struct ReferenceScores {
  double random_score = 0.0;
  double expert_score = 0.0;
};

/**
 * Deterministic per-environment reference returns: the exact expected
 * undiscounted return of the eps = 1.0 (random) and eps = 0.05 (expert)
 * greedy mixtures on the exact optimal Q, over the given horizon.
 */
ReferenceScores reference_scores(const TabularMDP& env, int horizon);

/// 100 * (score - random) / (expert - random). Throws when the references
/// are degenerate (expert does not beat random).
double normalized_score(double raw_score, const ReferenceScores& refs);

}  // namespace cltv

#endif  // CLTV_OFFLINE_RL_HPP
