#ifndef CLTV_SCORING_HPP
#define CLTV_SCORING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cltv/classifiers.hpp"
#include "cltv/features.hpp"
#include "cltv/mdp.hpp"
#include "cltv/mlp.hpp"

namespace cltv {

/// How the scorer parameters are updated. score_function follows the
/// training loop as published (reward times the log-likelihood gradient of
/// the sampled selection mask); full adds the direct gradient of the
/// normalized batch reward through the scores.
enum class GradientMode { score_function, full };

std::string gradient_mode_to_string(GradientMode m);
GradientMode gradient_mode_from_string(const std::string& s);

struct ScorerConfig {
  std::vector<int> hidden = {32, 32};
  Activation activation = Activation::tanh_act;
  double lr = 1e-3;
  bool adam = true;
  int batch_size = 200;
  double delta = 0.7;  // mixing weight between dynamics-weighted and plain score sums
  GradientMode mode = GradientMode::score_function;
  int updates = 300;
};

/// Running extrema of the unnormalized batch reward, initialized from the
/// first batch and persisted in scorer checkpoints.
struct RunningBounds {
  bool initialized = false;
  double r_min = 0.0;
  double r_max = 0.0;

  void update(double value);
};

/**
 * Transition scorer: a sigmoid-head network over one-hot transitions whose
 * output w in (0, 1) is both a selection probability and a per-transition
 * weight for reward modification.
 */
struct ScorerState {
  FeatureCodec codec;
  MlpParams net;
  OptimizerState opt;
  RunningBounds bounds;
  double delta = 0.7;
  GradientMode mode = GradientMode::score_function;
  int batch_size = 200;
};

ScorerState init_scorer(int n_states, int n_actions, const ScorerConfig& cfg, uint64_t seed);

/// Score of one transition, in (0, 1).
double score_transition(const ScorerState& scorer, int state, int action, int next_state);

struct ScoredDataset {
  Dataset dataset;
  std::vector<double> scores;  // aligned with dataset.transitions
};

ScoredDataset score_dataset(const ScorerState& scorer, const Dataset& ds);

/**
 * Unnormalized batch reward
 *   r' = delta * sum_j w_j * dyn_j + (1 - delta) * sum_j w_j
 * over one batch of scores and their dynamics factors.
 */
double batch_reward_unnormalized(const std::vector<double>& scores,
                                 const std::vector<double>& dynamics, double delta);

/// Maps r' affinely into [-1, 1] using the given bounds; equal or
/// uninitialized bounds give 0. The result is clamped so values outside the
/// observed range cannot escape the interval.
double normalize_reward(const RunningBounds& bounds, double r_unnormalized);

struct ReinforceStats {
  double reward_unnormalized = 0.0;
  double reward_normalized = 0.0;
  double mean_score = 0.0;
  double log_pi = 0.0;
  int n_selected = 0;
};

/**
 * One policy-gradient update on a batch of transitions from the source
 * dataset (given by index):
 *   1. score the batch, 2. draw the Bernoulli selection mask,
 *   3. compute dynamics factors and the batch reward, 4. normalize against
 *   the pre-update bounds, 5. ascend r * grad log pi (plus the direct
 *   reward gradient in full mode), 6. fold r' into the running bounds.
 * Scores are clamped to (0, 1) before logs so the likelihood stays finite.
 */
ReinforceStats reinforce_update(ScorerState& scorer, const ClassifierPair& classifiers,
                                const Dataset& source, const std::vector<size_t>& batch,
                                Rng& rng);

struct TsTrainReport {
  int updates = 0;
  std::vector<double> batch_rewards;  // unnormalized, one per update
  std::vector<double> mean_scores;    // batch mean score, one per update
};

/// Runs n_updates reinforce updates with uniform batch resampling.
TsTrainReport train_ts(ScorerState& scorer, const ClassifierPair& classifiers,
                       const Dataset& source, int n_updates, uint64_t seed);

/// Checkpoint: network, delta, gradient mode, batch size and running bounds.
void save_scorer(const ScorerState& scorer, const std::string& path);
ScorerState load_scorer(const std::string& path);

}  // namespace cltv

#endif  // CLTV_SCORING_HPP
