#include "cltv/features.hpp"

#include <stdexcept>

namespace cltv {

namespace {
void check_range(int v, int n, const char* what) {
  if (v < 0 || v >= n) {
    throw std::invalid_argument(std::string("FeatureCodec: ") + what + " out of range");
  }
}
}  // namespace

std::vector<double> FeatureCodec::encode_state_action(int state, int action) const {
  check_range(state, n_states, "state");
  check_range(action, n_actions, "action");
  std::vector<double> x(state_action_dim(), 0.0);
  x[state] = 1.0;
  x[n_states + action] = 1.0;
  return x;
}

std::vector<double> FeatureCodec::encode_transition(int state, int action, int next_state) const {
  check_range(state, n_states, "state");
  check_range(action, n_actions, "action");
  check_range(next_state, n_states, "next_state");
  std::vector<double> x(transition_dim(), 0.0);
  x[state] = 1.0;
  x[n_states + action] = 1.0;
  x[n_states + n_actions + next_state] = 1.0;
  return x;
}

}  // namespace cltv
