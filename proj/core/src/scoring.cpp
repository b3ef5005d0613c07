#include "cltv/scoring.hpp"

#include <cmath>
#include <stdexcept>

#include "cltv/rng.hpp"
#include "mlp_json.hpp"

namespace cltv {

namespace {

constexpr double kScoreClamp = 1e-12;

double clamp_open_unit(double w) {
  return std::min(std::max(w, kScoreClamp), 1.0 - kScoreClamp);
}

}  // namespace

std::string gradient_mode_to_string(GradientMode m) {
  return m == GradientMode::score_function ? "score_function" : "full";
}

GradientMode gradient_mode_from_string(const std::string& s) {
  if (s == "score_function") return GradientMode::score_function;
  if (s == "full") return GradientMode::full;
  throw std::runtime_error("unknown gradient mode '" + s + "'");
}

void RunningBounds::update(double value) {
  if (!initialized) {
    initialized = true;
    r_min = r_max = value;
    return;
  }
  r_min = std::min(r_min, value);
  r_max = std::max(r_max, value);
}

ScorerState init_scorer(int n_states, int n_actions, const ScorerConfig& cfg, uint64_t seed) {
  if (n_states < 2 || n_actions < 2) {
    throw std::invalid_argument("init_scorer: invalid dimensions");
  }
  if (cfg.delta < 0.0 || cfg.delta > 1.0) {
    throw std::invalid_argument("init_scorer: delta must lie in [0, 1]");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("init_scorer: batch_size must be positive");
  ScorerState s;
  s.codec = {n_states, n_actions};
  std::vector<int> sizes = {s.codec.transition_dim()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  s.net = init_mlp(sizes, cfg.activation, Head::sigmoid_scalar, seed);
  s.opt = cfg.adam ? OptimizerState::adam(cfg.lr) : OptimizerState::sgd(cfg.lr);
  s.delta = cfg.delta;
  s.mode = cfg.mode;
  s.batch_size = cfg.batch_size;
  return s;
}

double score_transition(const ScorerState& scorer, int state, int action, int next_state) {
  return mlp_forward(scorer.net, scorer.codec.encode_transition(state, action, next_state))[0];
}

ScoredDataset score_dataset(const ScorerState& scorer, const Dataset& ds) {
  if (ds.n_states != scorer.codec.n_states || ds.n_actions != scorer.codec.n_actions) {
    throw std::invalid_argument("score_dataset: dataset dimensions do not match scorer");
  }
  ScoredDataset out;
  out.dataset = ds;
  out.scores.reserve(ds.transitions.size());
  for (const auto& t : ds.transitions) {
    out.scores.push_back(score_transition(scorer, t.state, t.action, t.next_state));
  }
  return out;
}

double batch_reward_unnormalized(const std::vector<double>& scores,
                                 const std::vector<double>& dynamics, double delta) {
  if (scores.size() != dynamics.size()) {
    throw std::invalid_argument("batch_reward_unnormalized: size mismatch");
  }
  if (scores.empty()) throw std::invalid_argument("batch_reward_unnormalized: empty batch");
  double weighted = 0.0, plain = 0.0;
  for (size_t j = 0; j < scores.size(); ++j) {
    weighted += scores[j] * dynamics[j];
    plain += scores[j];
  }
  return delta * weighted + (1.0 - delta) * plain;
}

double normalize_reward(const RunningBounds& bounds, double r_unnormalized) {
  if (!bounds.initialized || bounds.r_max == bounds.r_min) return 0.0;
  double r = 2.0 * (r_unnormalized - bounds.r_min) / (bounds.r_max - bounds.r_min) - 1.0;
  return std::min(std::max(r, -1.0), 1.0);
}

ReinforceStats reinforce_update(ScorerState& scorer, const ClassifierPair& classifiers,
                                const Dataset& source, const std::vector<size_t>& batch,
                                Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("reinforce_update: empty batch");
  if (source.n_states != scorer.codec.n_states || source.n_actions != scorer.codec.n_actions) {
    throw std::invalid_argument("reinforce_update: dataset dimensions do not match scorer");
  }

  const size_t b = batch.size();
  std::vector<ForwardCache> caches(b);
  std::vector<double> scores(b), dyn(b);
  std::vector<uint8_t> selected(b);

  for (size_t j = 0; j < b; ++j) {
    if (batch[j] >= source.transitions.size()) {
      throw std::invalid_argument("reinforce_update: batch index out of range");
    }
    const Transition& t = source.transitions[batch[j]];
    scores[j] = mlp_forward(scorer.net,
                            scorer.codec.encode_transition(t.state, t.action, t.next_state),
                            &caches[j])[0];
  }
  for (size_t j = 0; j < b; ++j) selected[j] = rng.bernoulli(clamp_open_unit(scores[j])) ? 1 : 0;
  for (size_t j = 0; j < b; ++j) {
    const Transition& t = source.transitions[batch[j]];
    dyn[j] = dynamics_factor(classifiers, t.state, t.action, t.next_state);
  }

  const double r_unnorm = batch_reward_unnormalized(scores, dyn, scorer.delta);
  const double r = normalize_reward(scorer.bounds, r_unnorm);

  // Direct reward gradient coefficient; zero until the bounds are usable.
  double reward_coef = 0.0;
  if (scorer.mode == GradientMode::full && scorer.bounds.initialized &&
      scorer.bounds.r_max != scorer.bounds.r_min) {
    reward_coef = 2.0 / (scorer.bounds.r_max - scorer.bounds.r_min);
  }

  ReinforceStats stats;
  stats.reward_unnormalized = r_unnorm;
  stats.reward_normalized = r;

  Gradients total = Gradients::zeros_like(scorer.net);
  double log_pi = 0.0;
  double mean_score = 0.0;
  for (size_t j = 0; j < b; ++j) {
    double w = clamp_open_unit(scores[j]);
    double dlogpi_dw = selected[j] ? 1.0 / w : -1.0 / (1.0 - w);
    log_pi += selected[j] ? std::log(w) : std::log(1.0 - w);
    stats.n_selected += selected[j];
    mean_score += scores[j];

    double coef = r * dlogpi_dw;
    if (scorer.mode == GradientMode::full) {
      coef += reward_coef * (scorer.delta * dyn[j] + (1.0 - scorer.delta));
    }
    total.accumulate(mlp_backward(scorer.net, caches[j], {coef}));
  }
  mlp_step(scorer.net, scorer.opt, total, UpdateDirection::ascend);
  scorer.bounds.update(r_unnorm);

  stats.mean_score = mean_score / static_cast<double>(b);
  stats.log_pi = log_pi;
  return stats;
}

TsTrainReport train_ts(ScorerState& scorer, const ClassifierPair& classifiers,
                       const Dataset& source, int n_updates, uint64_t seed) {
  if (source.transitions.empty()) throw std::invalid_argument("train_ts: empty source dataset");
  if (n_updates < 1) throw std::invalid_argument("train_ts: need at least one update");
  Rng rng(seed);
  TsTrainReport report;
  report.updates = n_updates;
  const int n = static_cast<int>(source.transitions.size());
  std::vector<size_t> batch(scorer.batch_size);
  for (int step = 0; step < n_updates; ++step) {
    for (auto& idx : batch) idx = static_cast<size_t>(rng.uniform_int(n));
    ReinforceStats stats = reinforce_update(scorer, classifiers, source, batch, rng);
    report.batch_rewards.push_back(stats.reward_unnormalized);
    report.mean_scores.push_back(stats.mean_score);
  }
  return report;
}

void save_scorer(const ScorerState& scorer, const std::string& path) {
  nlohmann::json j;
  j["format"] = "cltv-scorer-v1";
  j["n_states"] = scorer.codec.n_states;
  j["n_actions"] = scorer.codec.n_actions;
  j["delta"] = scorer.delta;
  j["gradient_mode"] = gradient_mode_to_string(scorer.mode);
  j["batch_size"] = scorer.batch_size;
  j["bounds"] = {{"initialized", scorer.bounds.initialized},
                 {"r_min", scorer.bounds.r_min},
                 {"r_max", scorer.bounds.r_max}};
  j["net"] = mlp_to_json(scorer.net);
  write_json_file(j, path);
}

ScorerState load_scorer(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  if (require_field(j, "format", path).get<std::string>() != "cltv-scorer-v1") {
    throw std::runtime_error(path + ": unknown checkpoint format");
  }
  ScorerState s;
  s.codec.n_states = require_field(j, "n_states", path).get<int>();
  s.codec.n_actions = require_field(j, "n_actions", path).get<int>();
  s.delta = require_field(j, "delta", path).get<double>();
  s.mode = gradient_mode_from_string(require_field(j, "gradient_mode", path).get<std::string>());
  s.batch_size = require_field(j, "batch_size", path).get<int>();
  const nlohmann::json& jb = require_field(j, "bounds", path);
  s.bounds.initialized = require_field(jb, "initialized", path).get<bool>();
  s.bounds.r_min = require_field(jb, "r_min", path).get<double>();
  s.bounds.r_max = require_field(jb, "r_max", path).get<double>();
  s.net = mlp_from_json(require_field(j, "net", path), path);
  if (s.net.input_dim() != s.codec.transition_dim()) {
    throw std::runtime_error(path + ": scorer input dimension " +
                             std::to_string(s.net.input_dim()) + " does not match encoder " +
                             std::to_string(s.codec.transition_dim()));
  }
  return s;
}

}  // namespace cltv
