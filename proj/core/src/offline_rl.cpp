#include "cltv/offline_rl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cltv/format.hpp"
#include "mlp_json.hpp"

namespace cltv {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

/// Stable softmax over a row of length n.
void softmax_row(const double* q, int n, double temperature, std::vector<double>& out) {
  out.resize(n);
  double m = q[0];
  for (int i = 1; i < n; ++i) m = std::max(m, q[i]);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp((q[i] - m) / temperature);
    total += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= total;
}

double logsumexp_row(const double* q, int n) {
  double m = q[0];
  for (int i = 1; i < n; ++i) m = std::max(m, q[i]);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += std::exp(q[i] - m);
  return m + std::log(total);
}

}  // namespace

Policy AcPair::actor(double temperature) const {
  return softmax_policy_from_q(q, n_states, n_actions, temperature);
}

AcPair init_ac(int n_states, int n_actions) {
  check(n_states >= 2 && n_actions >= 2, "init_ac: invalid dimensions");
  AcPair ac;
  ac.n_states = n_states;
  ac.n_actions = n_actions;
  ac.q.assign(static_cast<size_t>(n_states) * n_actions, 0.0);
  ac.q_target = ac.q;
  return ac;
}

CqlStats cql_update(AcPair& ac, const CqlConfig& cfg, const std::vector<Transition>& pool,
                    const std::vector<uint8_t>& terminal, double gamma, Rng& rng) {
  check(!pool.empty(), "cql_update: empty pool");
  check(cfg.batch_size >= 1, "cql_update: batch_size must be positive");
  check(terminal.size() == static_cast<size_t>(ac.n_states), "cql_update: terminal mask size");
  check(gamma > 0.0 && gamma < 1.0, "cql_update: gamma must lie in (0, 1)");

  const int n = static_cast<int>(pool.size());
  const int na = ac.n_actions;
  std::vector<double> grad(ac.q.size(), 0.0);
  std::vector<double> pi_next, pi_data;
  CqlStats stats;

  for (int k = 0; k < cfg.batch_size; ++k) {
    const Transition& t = pool[static_cast<size_t>(rng.uniform_int(n))];
    if (t.state < 0 || t.state >= ac.n_states || t.next_state < 0 ||
        t.next_state >= ac.n_states || t.action < 0 || t.action >= na) {
      throw std::invalid_argument("cql_update: transition references unknown state or action");
    }
    const size_t i_data = static_cast<size_t>(t.state) * na + t.action;

    double target_v = 0.0;
    if (!terminal[t.next_state]) {
      softmax_row(ac.q.data() + static_cast<size_t>(t.next_state) * na, na, cfg.temperature,
                  pi_next);
      const double* qt = ac.q_target.data() + static_cast<size_t>(t.next_state) * na;
      for (int u = 0; u < na; ++u) target_v += pi_next[u] * qt[u];
    }
    const double y = t.reward + gamma * target_v;
    const double diff = ac.q[i_data] - y;
    stats.td_loss += diff * diff;
    grad[i_data] += 2.0 * diff;

    // Conservatism: push down the soft maximum, push up the data action.
    const double* qrow = ac.q.data() + static_cast<size_t>(t.state) * na;
    stats.cql_penalty += logsumexp_row(qrow, na) - ac.q[i_data];
    softmax_row(qrow, na, 1.0, pi_data);
    for (int u = 0; u < na; ++u) {
      grad[static_cast<size_t>(t.state) * na + u] += cfg.alpha * pi_data[u];
    }
    grad[i_data] -= cfg.alpha;
  }

  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
  for (size_t i = 0; i < ac.q.size(); ++i) ac.q[i] -= cfg.lr * grad[i] * inv_b;
  for (size_t i = 0; i < ac.q.size(); ++i) {
    ac.q_target[i] = (1.0 - cfg.tau) * ac.q_target[i] + cfg.tau * ac.q[i];
  }
  stats.td_loss *= inv_b;
  stats.cql_penalty *= inv_b;
  return stats;
}

void save_ac(const AcPair& ac, double gamma, uint64_t env_fingerprint,
             const std::string& config_hash, const std::string& path) {
  nlohmann::json j;
  j["format"] = "cltv-ac-v1";
  j["n_states"] = ac.n_states;
  j["n_actions"] = ac.n_actions;
  j["gamma"] = gamma;
  j["env_fingerprint"] = hex_u64(env_fingerprint);
  j["config_hash"] = config_hash;
  j["q"] = ac.q;
  j["q_target"] = ac.q_target;
  write_json_file(j, path);
}

LoadedAc load_ac(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  if (require_field(j, "format", path).get<std::string>() != "cltv-ac-v1") {
    throw std::runtime_error(path + ": unknown checkpoint format");
  }
  LoadedAc out;
  out.ac.n_states = require_field(j, "n_states", path).get<int>();
  out.ac.n_actions = require_field(j, "n_actions", path).get<int>();
  out.gamma = require_field(j, "gamma", path).get<double>();
  out.env_fingerprint = parse_hex_u64(require_field(j, "env_fingerprint", path).get<std::string>());
  out.config_hash = require_field(j, "config_hash", path).get<std::string>();
  out.ac.q = require_field(j, "q", path).get<std::vector<double>>();
  out.ac.q_target = require_field(j, "q_target", path).get<std::vector<double>>();
  size_t want = static_cast<size_t>(out.ac.n_states) * out.ac.n_actions;
  if (out.ac.q.size() != want || out.ac.q_target.size() != want) {
    throw std::runtime_error(path + ": Q table size does not match dimensions");
  }
  return out;
}

GaussianAcPair init_gaussian_ac(const GaussianAcConfig& cfg, uint64_t seed) {
  GaussianAcPair ac;
  std::vector<int> critic_sizes = {2};
  critic_sizes.insert(critic_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  critic_sizes.push_back(1);
  std::vector<int> actor_sizes = {1};
  actor_sizes.insert(actor_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  actor_sizes.push_back(1);

  ac.critic = init_mlp(critic_sizes, Activation::tanh_act, Head::linear_vector,
                       derive_seed(seed, "critic"));
  ac.critic_target = ac.critic;
  ac.actor.mean_net = init_mlp(actor_sizes, Activation::tanh_act, Head::linear_vector,
                               derive_seed(seed, "actor"));
  ac.actor.sigma = cfg.sigma;
  ac.critic_opt = OptimizerState::adam(cfg.critic_lr);
  ac.actor_opt = OptimizerState::adam(cfg.actor_lr);
  return ac;
}

GaussianAcStats gaussian_ac_update(GaussianAcPair& ac, const GaussianAcConfig& cfg,
                                   const ContinuousDataset& data, Rng& rng) {
  check(!data.transitions.empty(), "gaussian_ac_update: empty dataset");
  const int n = static_cast<int>(data.transitions.size());
  GaussianAcStats stats;

  Gradients critic_grad = Gradients::zeros_like(ac.critic);
  Gradients actor_grad = Gradients::zeros_like(ac.actor.mean_net);

  for (int k = 0; k < cfg.batch_size; ++k) {
    const ContinuousTransition& t = data.transitions[static_cast<size_t>(rng.uniform_int(n))];

    // Critic TD regression toward the frozen target network.
    double mu_next = ac.actor.mean(t.next_state);
    double q_next = mlp_forward(ac.critic_target, {t.next_state, mu_next})[0];
    double target = t.reward + data.gamma * q_next;
    ForwardCache cache;
    double q = mlp_forward(ac.critic, {t.state, t.action}, &cache)[0];
    double diff = q - target;
    stats.critic_loss += diff * diff;
    critic_grad.accumulate(mlp_backward(ac.critic, cache, {2.0 * diff}));

    // Actor: ascend Q(s, mu(s)) - beta * (mu(s) - a_data)^2.
    ForwardCache mu_cache;
    double mu = mlp_forward(ac.actor.mean_net, {t.state}, &mu_cache)[0];
    ForwardCache q_cache;
    double q_mu = mlp_forward(ac.critic, {t.state, mu}, &q_cache)[0];
    std::vector<double> dq_dinput;
    mlp_backward(ac.critic, q_cache, {1.0}, &dq_dinput);
    double dj_dmu = dq_dinput[1] - 2.0 * cfg.beta * (mu - t.action);
    stats.actor_objective += q_mu - cfg.beta * (mu - t.action) * (mu - t.action);
    actor_grad.accumulate(mlp_backward(ac.actor.mean_net, mu_cache, {dj_dmu}));
  }

  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
  critic_grad.scale(inv_b);
  actor_grad.scale(inv_b);
  mlp_step(ac.critic, ac.critic_opt, critic_grad, UpdateDirection::descend);
  mlp_step(ac.actor.mean_net, ac.actor_opt, actor_grad, UpdateDirection::ascend);

  // Polyak-average the critic target.
  for (size_t l = 0; l < ac.critic.weights.size(); ++l) {
    for (size_t i = 0; i < ac.critic.weights[l].size(); ++i) {
      ac.critic_target.weights[l][i] =
          (1.0 - cfg.tau) * ac.critic_target.weights[l][i] + cfg.tau * ac.critic.weights[l][i];
    }
    for (size_t i = 0; i < ac.critic.biases[l].size(); ++i) {
      ac.critic_target.biases[l][i] =
          (1.0 - cfg.tau) * ac.critic_target.biases[l][i] + cfg.tau * ac.critic.biases[l][i];
    }
  }

  stats.critic_loss *= inv_b;
  stats.actor_objective *= inv_b;
  return stats;
}

std::vector<double> gaussian_actor_update_direction(const GaussianAcPair& ac, double beta,
                                                    double state, double action_data) {
  ForwardCache mu_cache;
  double mu = mlp_forward(ac.actor.mean_net, {state}, &mu_cache)[0];
  ForwardCache q_cache;
  mlp_forward(ac.critic, {state, mu}, &q_cache);
  std::vector<double> dq_dinput;
  mlp_backward(ac.critic, q_cache, {1.0}, &dq_dinput);
  double dj_dmu = dq_dinput[1] - 2.0 * beta * (mu - action_data);
  Gradients g = mlp_backward(ac.actor.mean_net, mu_cache, {dj_dmu});

  std::vector<double> flat;
  for (size_t l = 0; l < g.weights.size(); ++l) {
    flat.insert(flat.end(), g.weights[l].begin(), g.weights[l].end());
    flat.insert(flat.end(), g.biases[l].begin(), g.biases[l].end());
  }
  return flat;
}

ReferenceScores reference_scores(const TabularMDP& env, int horizon) {
  OptimalQSolution opt = solve_optimal_q(env);
  if (!opt.converged) {
    throw std::runtime_error("reference_scores: optimal Q iteration did not converge");
  }
  Policy random_tier = epsilon_greedy_policy(opt.q, env.n_states, env.n_actions, 1.0);
  Policy expert_tier = epsilon_greedy_policy(opt.q, env.n_states, env.n_actions, 0.05);
  ReferenceScores refs;
  refs.random_score = expected_return(env, random_tier, horizon);
  refs.expert_score = expected_return(env, expert_tier, horizon);
  return refs;
}

double normalized_score(double raw_score, const ReferenceScores& refs) {
  const double span = refs.expert_score - refs.random_score;
  if (!(span > 1e-9)) {
    throw std::runtime_error(
        "normalized_score: degenerate references (expert does not beat random)");
  }
  return 100.0 * (raw_score - refs.random_score) / span;
}

}  // namespace cltv
