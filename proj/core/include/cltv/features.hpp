#ifndef CLTV_FEATURES_HPP
#define CLTV_FEATURES_HPP

#include <vector>

namespace cltv {

/**
 * One-hot encoding of tabular states and actions for the network-based
 * stages. A state-action pair becomes [onehot(x) | onehot(u)], a full
 * transition [onehot(x) | onehot(u) | onehot(x')].
 */
struct FeatureCodec {
  int n_states = 0;
  int n_actions = 0;

  int state_action_dim() const { return n_states + n_actions; }
  int transition_dim() const { return 2 * n_states + n_actions; }

  std::vector<double> encode_state_action(int state, int action) const;
  std::vector<double> encode_transition(int state, int action, int next_state) const;
};

}  // namespace cltv

#endif  // CLTV_FEATURES_HPP
