#include "cltv/classifiers.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "cltv/rng.hpp"
#include "mlp_json.hpp"

namespace cltv {

namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) {
  return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

/// -log q for the labelled class and its gradient wrt the sigmoid output.
/// Through the sigmoid head this reproduces dL/dz = p - y.
double bce_output_grad(double p, bool is_target, double* loss) {
  double pc = clamp_prob(p);
  if (is_target) {
    *loss = -std::log(pc);
    return -1.0 / pc;
  }
  *loss = -std::log(1.0 - pc);
  return 1.0 / (1.0 - pc);
}

}  // namespace

double ClassifierPair::prob_xu(int state, int action) const {
  return mlp_forward(q_xu, codec.encode_state_action(state, action))[0];
}

double ClassifierPair::prob_xux(int state, int action, int next_state) const {
  return mlp_forward(q_xux, codec.encode_transition(state, action, next_state))[0];
}

ClassifierPair init_classifier_pair(int n_states, int n_actions, const ClassifierConfig& cfg,
                                    uint64_t seed) {
  if (n_states < 2 || n_actions < 2) {
    throw std::invalid_argument("init_classifier_pair: invalid dimensions");
  }
  ClassifierPair pair;
  pair.codec = {n_states, n_actions};

  std::vector<int> sizes_xu = {pair.codec.state_action_dim()};
  sizes_xu.insert(sizes_xu.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes_xu.push_back(1);
  std::vector<int> sizes_xux = {pair.codec.transition_dim()};
  sizes_xux.insert(sizes_xux.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes_xux.push_back(1);

  pair.q_xu = init_mlp(sizes_xu, cfg.activation, Head::sigmoid_scalar, derive_seed(seed, "q_xu"));
  pair.q_xux =
      init_mlp(sizes_xux, cfg.activation, Head::sigmoid_scalar, derive_seed(seed, "q_xux"));
  return pair;
}

ClassifierTrainReport train_classifiers(ClassifierPair& pair, const Dataset& source,
                                        const Dataset& target, const ClassifierConfig& cfg,
                                        uint64_t seed) {
  if (source.transitions.empty() || target.transitions.empty()) {
    throw std::invalid_argument("train_classifiers: both datasets must be non-empty");
  }
  if (source.n_states != pair.codec.n_states || source.n_actions != pair.codec.n_actions ||
      target.n_states != pair.codec.n_states || target.n_actions != pair.codec.n_actions) {
    throw std::invalid_argument("train_classifiers: dataset dimensions do not match classifier");
  }
  if (cfg.epochs < 1 || cfg.batch_size < 2) {
    throw std::invalid_argument("train_classifiers: need epochs >= 1 and batch_size >= 2");
  }

  Rng rng(seed);
  OptimizerState opt_xu = OptimizerState::adam(cfg.lr);
  OptimizerState opt_xux = OptimizerState::adam(cfg.lr);

  const int half = cfg.batch_size / 2;
  const size_t n_src = source.transitions.size();
  const size_t n_tgt = target.transitions.size();
  const int steps_per_epoch =
      static_cast<int>((n_src + n_tgt + cfg.batch_size - 1) / cfg.batch_size);

  ClassifierTrainReport report;
  report.epochs = cfg.epochs;

  double epoch_loss_xu = 0.0, epoch_loss_xux = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    epoch_loss_xu = 0.0;
    epoch_loss_xux = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      Gradients g_xu = Gradients::zeros_like(pair.q_xu);
      Gradients g_xux = Gradients::zeros_like(pair.q_xux);
      double loss_xu = 0.0, loss_xux = 0.0;
      for (int k = 0; k < 2 * half; ++k) {
        const bool is_target = k >= half;
        const Transition& t =
            is_target ? target.transitions[static_cast<size_t>(rng.uniform_int(static_cast<int>(n_tgt)))]
                      : source.transitions[static_cast<size_t>(rng.uniform_int(static_cast<int>(n_src)))];

        ForwardCache cache;
        double p = mlp_forward(pair.q_xu, pair.codec.encode_state_action(t.state, t.action),
                               &cache)[0];
        double item_loss = 0.0;
        double dp = bce_output_grad(p, is_target, &item_loss);
        loss_xu += item_loss;
        g_xu.accumulate(mlp_backward(pair.q_xu, cache, {dp}));

        double p2 = mlp_forward(
            pair.q_xux, pair.codec.encode_transition(t.state, t.action, t.next_state), &cache)[0];
        dp = bce_output_grad(p2, is_target, &item_loss);
        loss_xux += item_loss;
        g_xux.accumulate(mlp_backward(pair.q_xux, cache, {dp}));
      }
      // Sum of the per-class means: each half contributes its expectation.
      g_xu.scale(1.0 / half);
      g_xux.scale(1.0 / half);
      mlp_step(pair.q_xu, opt_xu, g_xu, UpdateDirection::descend);
      mlp_step(pair.q_xux, opt_xux, g_xux, UpdateDirection::descend);
      epoch_loss_xu += loss_xu / half;
      epoch_loss_xux += loss_xux / half;
      ++report.steps;
    }
  }
  report.final_loss_xu = epoch_loss_xu / steps_per_epoch;
  report.final_loss_xux = epoch_loss_xux / steps_per_epoch;
  return report;
}

double dynamics_factor(const ClassifierPair& pair, int state, int action, int next_state) {
  double p_xux = clamp_prob(pair.prob_xux(state, action, next_state));
  double p_xu = clamp_prob(pair.prob_xu(state, action));

  double log_t_xux = std::log(p_xux);
  double log_s_xux = std::log(1.0 - p_xux);
  double log_t_xu = std::log(p_xu);
  double log_s_xu = std::log(1.0 - p_xu);

  double two_ratio = (log_t_xux - log_s_xux) - (log_t_xu - log_s_xu);
  double single_sum = log_t_xux - log_t_xu - log_s_xux + log_s_xu;
  if (std::abs(two_ratio - single_sum) > 1e-9) {
    throw std::logic_error("dynamics_factor: log-ratio associations disagree");
  }
  return two_ratio;
}

void save_classifier_pair(const ClassifierPair& pair, const std::string& path) {
  nlohmann::json j;
  j["format"] = "cltv-classifier-pair-v1";
  j["n_states"] = pair.codec.n_states;
  j["n_actions"] = pair.codec.n_actions;
  nlohmann::json jxu = mlp_to_json(pair.q_xu);
  jxu["role"] = "xu";
  nlohmann::json jxux = mlp_to_json(pair.q_xux);
  jxux["role"] = "xux";
  j["q_xu"] = std::move(jxu);
  j["q_xux"] = std::move(jxux);
  write_json_file(j, path);
}

ClassifierPair load_classifier_pair(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  if (require_field(j, "format", path).get<std::string>() != "cltv-classifier-pair-v1") {
    throw std::runtime_error(path + ": unknown checkpoint format");
  }
  ClassifierPair pair;
  pair.codec.n_states = require_field(j, "n_states", path).get<int>();
  pair.codec.n_actions = require_field(j, "n_actions", path).get<int>();

  const nlohmann::json& jxu = require_field(j, "q_xu", path);
  const nlohmann::json& jxux = require_field(j, "q_xux", path);
  if (require_field(jxu, "role", path).get<std::string>() != "xu" ||
      require_field(jxux, "role", path).get<std::string>() != "xux") {
    throw std::runtime_error(path + ": classifier role tags are wrong or swapped");
  }
  pair.q_xu = mlp_from_json(jxu, path);
  pair.q_xux = mlp_from_json(jxux, path);
  if (pair.q_xu.input_dim() != pair.codec.state_action_dim()) {
    throw std::runtime_error(path + ": q_xu input dimension " +
                             std::to_string(pair.q_xu.input_dim()) + " does not match encoder " +
                             std::to_string(pair.codec.state_action_dim()));
  }
  if (pair.q_xux.input_dim() != pair.codec.transition_dim()) {
    throw std::runtime_error(path + ": q_xux input dimension " +
                             std::to_string(pair.q_xux.input_dim()) + " does not match encoder " +
                             std::to_string(pair.codec.transition_dim()));
  }
  return pair;
}

}  // namespace cltv
