#ifndef CLTV_CLASSIFIERS_HPP
#define CLTV_CLASSIFIERS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cltv/features.hpp"
#include "cltv/mdp.hpp"
#include "cltv/mlp.hpp"

namespace cltv {

struct ClassifierConfig {
  std::vector<int> hidden = {64};
  double lr = 3e-4;
  int epochs = 30;
  int batch_size = 128;
  Activation activation = Activation::tanh_act;
};

/**
 * Two sigmoid-head discriminators over one-hot inputs: q_xu estimates
 * P(target | x, u) and q_xux estimates P(target | x, u, x'). Trained jointly
 * on balanced batches so the class prior is 1/2 and their log-odds
 * difference isolates the dynamics ratio.
 */
struct ClassifierPair {
  FeatureCodec codec;
  MlpParams q_xu;
  MlpParams q_xux;

  double prob_xu(int state, int action) const;
  double prob_xux(int state, int action, int next_state) const;
};

ClassifierPair init_classifier_pair(int n_states, int n_actions, const ClassifierConfig& cfg,
                                    uint64_t seed);

struct ClassifierTrainReport {
  int epochs = 0;
  int steps = 0;
  // Mean joint cross-entropy (target half plus source half) over the last epoch.
  double final_loss_xu = 0.0;
  double final_loss_xux = 0.0;
};

/**
 * Balanced-batch training: every step draws batch_size/2 transitions from
 * each dataset with replacement and descends the summed cross-entropy of the
 * two halves. Both networks see the same draws. Deterministic given seed.
 */
ClassifierTrainReport train_classifiers(ClassifierPair& pair, const Dataset& source,
                                        const Dataset& target, const ClassifierConfig& cfg,
                                        uint64_t seed);

/**
 * Dynamics factor of a transition:
 *   [log q_xux(target) - log q_xux(source)] - [log q_xu(target) - log q_xu(source)]
 * computed with probabilities clamped to [1e-12, 1 - 1e-12]. The equivalent
 * single-sum association is evaluated as well and both must agree within
 * 1e-9, which guards the implementation against sign slips.
 */
double dynamics_factor(const ClassifierPair& pair, int state, int action, int next_state);

/// Checkpoint with explicit role tags ("xu", "xux") and input dimensions;
/// loading validates both and fails with a clear error on mismatch.
void save_classifier_pair(const ClassifierPair& pair, const std::string& path);
ClassifierPair load_classifier_pair(const std::string& path);

}  // namespace cltv

#endif  // CLTV_CLASSIFIERS_HPP
