#ifndef CLTV_MDP_HPP
#define CLTV_MDP_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cltv/rng.hpp"

namespace cltv {

/**
 * Specification of a built-in environment family.
 *
 * Families:
 *   chain      n states in a line, 2 actions. Walking right from the start
 *              pays 1 on entering the absorbing goal (step n - 1) and on
 *              every later step, so the undiscounted return of the greedy
 *              policy over a horizon is horizon - n + 2.
 *   gridworld  w x h grid, 4 actions, start top-left, terminal goal
 *              bottom-right paying 1 on entry.
 *   cliffwalk  w x h grid, 4 actions, start bottom-left, terminal goal
 *              bottom-right paying 1 on entry; the bottom row between them
 *              is a cliff of zero-reward terminal states.
 *
 * slip is the probability that an action's motion is replaced by a lateral
 * one (the opposite direction for chain, the two perpendicular directions
 * with equal mass for the grids).
 */
struct EnvSpec {
  std::string family;  // "chain" | "gridworld" | "cliffwalk"
  int n = 0;           // chain only
  int width = 0;       // grids only
  int height = 0;
  double slip = 0.0;

  std::string describe() const;
};

/**
 * Finite MDP with explicit tensors.
 *
 * Invariants enforced by validate():
 *   - transition rows sum to 1 within 1e-9 and are non-negative
 *   - rewards lie in [0, 1]
 *   - initial_dist is a distribution with no mass on terminal states
 *   - terminal states are absorbing self-loops with zero reward
 *   - 0 < gamma < 1, n_states >= 2, n_actions >= 2
 *
 * Entering a terminal state ends an episode; the self-loop convention makes
 * exact solves agree with sampled rollouts without special cases.
 */
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.99;
  std::vector<double> p;             // [x][u][x'] row-major
  std::vector<double> r;             // [x][u][x'] in [0, 1]
  std::vector<double> initial_dist;  // [x]
  std::vector<uint8_t> terminal;     // [x]

  size_t idx(int x, int u, int y) const {
    return (static_cast<size_t>(x) * n_actions + u) * n_states + y;
  }
  double prob(int x, int u, int y) const { return p[idx(x, u, y)]; }
  double reward(int x, int u, int y) const { return r[idx(x, u, y)]; }

  void validate() const;

  /// Hash of dimensions, gamma and all tensors. Embedded in datasets and
  /// policy checkpoints; eval refuses to run when fingerprints disagree.
  uint64_t fingerprint() const;
};

/**
 * Tabular stochastic policy stored as softmax logits, one row per state.
 * Greedy policies use a large negative logit for non-argmax actions, which
 * underflows to exact zero probability.
 */
struct Policy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> logits;  // [x][u]

  std::vector<double> probs(int state) const;
  int sample(int state, Rng& rng) const;

  static Policy uniform(int n_states, int n_actions);
  /// logits = log p; probabilities must be valid rows, zeros allowed.
  static Policy from_probabilities(int n_states, int n_actions, const std::vector<double>& probs);
};

Policy softmax_policy_from_q(const std::vector<double>& q, int n_states, int n_actions,
                             double temperature);

/// eps-greedy mixture on argmax_u q(x, u); ties resolved toward the lowest
/// action index. eps = 1 is the uniform policy, eps = 0 the greedy one.
Policy epsilon_greedy_policy(const std::vector<double>& q, int n_states, int n_actions, double eps);

struct QSolution {
  std::vector<double> q;  // [x][u]
  std::vector<double> v;  // [x]
  double bellman_residual = 0.0;
};

struct OptimalQSolution {
  std::vector<double> q;
  std::vector<double> v;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Environment construction. Throws std::invalid_argument for unknown
/// families, fewer than 2 states, or slip outside [0, 1).
TabularMDP make_env(const EnvSpec& spec, double gamma);

/**
 * Mixes every non-terminal transition row with a random row:
 * P'[x][u] = (1 - mismatch) * P[x][u] + mismatch * R[x][u], renormalized.
 * mismatch = 0 returns a bit-identical copy. Rewards, initial distribution
 * and terminal structure are untouched.
 */
TabularMDP perturb_dynamics(const TabularMDP& mdp, double mismatch, uint64_t seed);

/**
 * Exact policy evaluation: solves (I - gamma * P_pi) V = R_pi directly and
 * reports the max-norm Bellman residual of the recovered Q. Throws if the
 * residual exceeds 1e-10.
 */
QSolution solve_q_values(const TabularMDP& mdp, const Policy& policy);

/// Value iteration on Q* to max-residual <= tol. Non-convergence is reported
/// in the result, not thrown; callers decide.
OptimalQSolution solve_optimal_q(const TabularMDP& mdp, double tol = 1e-12, int max_iter = 100000);

/// Discounted state occupancy (1 - gamma) * sum_t gamma^t Pr[x_t = x],
/// computed by a linear solve. Sums to 1.
std::vector<double> occupancy(const TabularMDP& mdp, const Policy& policy);

/// KL(p1(.|x) || p2(.|x)) for one state; 0 log 0 = 0, and mass of p1 where
/// p2 is zero yields +infinity.
double policy_kl(const Policy& p1, const Policy& p2, int state);

/// Mean of policy_kl over the given states.
double policy_kl_mean(const Policy& p1, const Policy& p2, const std::vector<int>& states);

enum class Domain : int { source = 0, target = 1 };

struct Transition {
  int traj_id = 0;
  int step = 0;  // 1-based within the trajectory
  int state = 0;
  int action = 0;
  int next_state = 0;
  double reward = 0.0;
  Domain domain = Domain::source;
};

/**
 * Flat list of transitions grouped by trajectory, trajectory ids contiguous
 * from 0 and steps contiguous from 1. gamma and the environment fingerprint
 * travel with the data so downstream stages can refuse mismatched inputs.
 */
struct Dataset {
  std::string role;  // "source" | "target" | "mixed"
  uint64_t env_fingerprint = 0;
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.99;
  std::vector<Transition> transitions;

  int n_trajectories() const;
};

struct TrajectorySpan {
  int traj_id = 0;
  size_t begin = 0;  // [begin, end) into Dataset::transitions
  size_t end = 0;
};

std::vector<TrajectorySpan> trajectory_spans(const Dataset& ds);

/// Structural checks for the Dataset invariants listed above; throws
/// std::runtime_error naming the first offending transition.
void validate_dataset(const Dataset& ds);

/**
 * Rolls out n_trajectories episodes of at most horizon steps and tags every
 * transition with the given domain. Episodes stop early when a terminal
 * state is entered. Deterministic for a fixed seed.
 */
Dataset generate_dataset(const TabularMDP& mdp, const Policy& policy, int n_trajectories,
                         int horizon, uint64_t seed, Domain domain, const std::string& role);

/**
 * Whole-trajectory mixture: all target trajectories plus the shortest source
 * prefix whose transition share reaches source_frac (rounding therefore
 * favors the source side); if the source runs out first the whole source is
 * used. Trajectories are renumbered source-first, transitions and domain
 * tags are otherwise untouched. The result carries the target fingerprint
 * since that is the domain the mixture is consumed in.
 */
Dataset mix_datasets(const Dataset& source, const Dataset& target, double source_frac);

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  int n_episodes = 0;
};

/// Monte-Carlo mean and sample standard deviation of the undiscounted
/// horizon-capped return. Deterministic for a fixed seed.
EvalResult evaluate_return(const TabularMDP& mdp, const Policy& policy, int n_episodes,
                           int horizon, uint64_t seed);

/// Exact expected undiscounted return over `horizon` steps via backward
/// induction; the deterministic counterpart of evaluate_return.
double expected_return(const TabularMDP& mdp, const Policy& policy, int horizon);

/// Categorical draw from a probability row of length n.
int sample_categorical(const double* row, int n, Rng& rng);

}  // namespace cltv

#endif  // CLTV_MDP_HPP
