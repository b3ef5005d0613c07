#ifndef CLTV_TESTS_TEST_SUPPORT_HPP
#define CLTV_TESTS_TEST_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cltv/classifiers.hpp"
#include "cltv/mdp.hpp"
#include "cltv/mlp.hpp"
#include "cltv/rng.hpp"
#include "cltv/scoring.hpp"

// Oracles shared by the unit tests and the acceptance runner. Everything in
// here is an independent reimplementation (sampling, rank statistics, finite
// differences, exhaustive enumeration) used to cross-check the library.
namespace testutil {

struct MonteCarlo {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
  int n = 0;
};

/// Sampled discounted return from the initial distribution. Deliberately
/// re-rolls episodes with its own loop instead of calling evaluate_return.
inline MonteCarlo mc_discounted_return(const cltv::TabularMDP& mdp, const cltv::Policy& policy,
                                       int n_episodes, int horizon, uint64_t seed) {
  cltv::Rng rng(seed);
  double total = 0.0, total_sq = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    int x = cltv::sample_categorical(mdp.initial_dist.data(), mdp.n_states, rng);
    double ret = 0.0, discount = 1.0;
    for (int step = 0; step < horizon; ++step) {
      if (mdp.terminal[x]) break;
      int u = policy.sample(x, rng);
      const double* row = mdp.p.data() + mdp.idx(x, u, 0);
      int y = cltv::sample_categorical(row, mdp.n_states, rng);
      ret += discount * mdp.reward(x, u, y);
      discount *= mdp.gamma;
      x = y;
    }
    total += ret;
    total_sq += ret * ret;
  }
  MonteCarlo out;
  out.n = n_episodes;
  out.mean = total / n_episodes;
  double var = (total_sq - total * total / n_episodes) / std::max(n_episodes - 1, 1);
  out.se = std::sqrt(std::max(var, 0.0) / n_episodes);
  return out;
}

/// Expected number of visits to each state over `horizon` steps (a visit is
/// a transition emitted from that state, so absorbed mass stops counting).
inline std::vector<double> expected_visit_counts(const cltv::TabularMDP& mdp,
                                                 const cltv::Policy& policy, int horizon) {
  std::vector<double> m = mdp.initial_dist;
  std::vector<double> visits(mdp.n_states, 0.0);
  for (int t = 0; t < horizon; ++t) {
    std::vector<double> next(mdp.n_states, 0.0);
    for (int x = 0; x < mdp.n_states; ++x) {
      if (mdp.terminal[x] || m[x] == 0.0) continue;
      visits[x] += m[x];
      std::vector<double> pi = policy.probs(x);
      for (int u = 0; u < mdp.n_actions; ++u) {
        for (int y = 0; y < mdp.n_states; ++y) {
          next[y] += m[x] * pi[u] * mdp.prob(x, u, y);
        }
      }
    }
    m.swap(next);
  }
  return visits;
}

/// Mann-Whitney AUC with 0.5 credit for ties.
inline double auc_from_scores(const std::vector<double>& negatives,
                              const std::vector<double>& positives) {
  if (negatives.empty() || positives.empty()) {
    throw std::invalid_argument("auc_from_scores: both classes must be non-empty");
  }
  std::vector<double> sorted_neg = negatives;
  std::sort(sorted_neg.begin(), sorted_neg.end());
  double wins = 0.0;
  for (double p : positives) {
    auto lo = std::lower_bound(sorted_neg.begin(), sorted_neg.end(), p);
    auto hi = std::upper_bound(sorted_neg.begin(), sorted_neg.end(), p);
    wins += static_cast<double>(lo - sorted_neg.begin());
    wins += 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(negatives.size()) * static_cast<double>(positives.size()));
}

/// Central finite differences of a scalar function of the parameters,
/// returned in the same layout as analytic gradients.
template <typename F>
inline cltv::Gradients finite_difference(const cltv::MlpParams& net, F f, double h = 1e-5) {
  cltv::Gradients g = cltv::Gradients::zeros_like(net);
  cltv::MlpParams work = net;
  for (size_t l = 0; l < net.weights.size(); ++l) {
    for (size_t i = 0; i < net.weights[l].size(); ++i) {
      double saved = work.weights[l][i];
      work.weights[l][i] = saved + h;
      double hi = f(work);
      work.weights[l][i] = saved - h;
      double lo = f(work);
      work.weights[l][i] = saved;
      g.weights[l][i] = (hi - lo) / (2.0 * h);
    }
    for (size_t i = 0; i < net.biases[l].size(); ++i) {
      double saved = work.biases[l][i];
      work.biases[l][i] = saved + h;
      double hi = f(work);
      work.biases[l][i] = saved - h;
      double lo = f(work);
      work.biases[l][i] = saved;
      g.biases[l][i] = (hi - lo) / (2.0 * h);
    }
  }
  return g;
}

/// Worst elementwise relative error between two gradients; the denominator
/// is floored so entries near zero compare absolutely.
inline double max_rel_error(const cltv::Gradients& a, const cltv::Gradients& b,
                            double floor_val = 1e-6) {
  double worst = 0.0;
  auto compare = [&](const std::vector<double>& x, const std::vector<double>& y) {
    for (size_t i = 0; i < x.size(); ++i) {
      double denom = std::max({std::abs(x[i]), std::abs(y[i]), floor_val});
      worst = std::max(worst, std::abs(x[i] - y[i]) / denom);
    }
  };
  for (size_t l = 0; l < a.weights.size(); ++l) {
    compare(a.weights[l], b.weights[l]);
    compare(a.biases[l], b.biases[l]);
  }
  return worst;
}

/// Weights then biases, layer by layer (the library's flat layout).
inline std::vector<double> flatten(const cltv::Gradients& g) {
  std::vector<double> flat;
  for (size_t l = 0; l < g.weights.size(); ++l) {
    flat.insert(flat.end(), g.weights[l].begin(), g.weights[l].end());
    flat.insert(flat.end(), g.biases[l].begin(), g.biases[l].end());
  }
  return flat;
}

inline std::vector<double> flatten_params(const cltv::MlpParams& net) {
  std::vector<double> flat;
  for (size_t l = 0; l < net.weights.size(); ++l) {
    flat.insert(flat.end(), net.weights[l].begin(), net.weights[l].end());
    flat.insert(flat.end(), net.biases[l].begin(), net.biases[l].end());
  }
  return flat;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: size mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom == 0.0) throw std::invalid_argument("cosine: zero vector");
  return dot / denom;
}

inline void zero_weights(cltv::MlpParams& net) {
  for (auto& layer : net.weights) std::fill(layer.begin(), layer.end(), 0.0);
  for (auto& layer : net.biases) std::fill(layer.begin(), layer.end(), 0.0);
}

struct TupleSpec {
  int traj_id;
  int step;
  int state;
  int action;
  int next_state;
  double reward;
  cltv::Domain domain = cltv::Domain::source;
};

/// Hand-crafted dataset from explicit tuples; validates the result so the
/// fixture itself cannot be malformed.
inline cltv::Dataset make_dataset(int n_states, int n_actions, double gamma,
                                  const std::vector<TupleSpec>& tuples,
                                  const std::string& role = "source") {
  cltv::Dataset ds;
  ds.role = role;
  ds.n_states = n_states;
  ds.n_actions = n_actions;
  ds.gamma = gamma;
  ds.env_fingerprint = 0x1234;
  for (const auto& t : tuples) {
    ds.transitions.push_back(
        {t.traj_id, t.step, t.state, t.action, t.next_state, t.reward, t.domain});
  }
  cltv::validate_dataset(ds);
  return ds;
}

/// MDP with every transition row equal to a self-loop and one flat reward.
/// The simplest fixture whose Q values are a closed-form geometric series.
inline cltv::TabularMDP self_loop_mdp(int n_states, int n_actions, double reward, double gamma) {
  cltv::TabularMDP m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  m.p.assign(static_cast<size_t>(n_states) * n_actions * n_states, 0.0);
  m.r.assign(m.p.size(), reward);
  m.initial_dist.assign(n_states, 0.0);
  m.initial_dist[0] = 1.0;
  m.terminal.assign(n_states, 0);
  for (int x = 0; x < n_states; ++x) {
    for (int u = 0; u < n_actions; ++u) m.p[m.idx(x, u, x)] = 1.0;
  }
  m.validate();
  return m;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the system temp root, wiped on creation.
inline std::string scratch_dir(const std::string& name) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "cltv-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

struct ReinforceOracle {
  std::vector<double> exact;    // exhaustive-enumeration expectation, flat
  std::vector<double> mc_mean;  // Monte-Carlo mean of sampled update steps
  std::vector<double> mc_se;    // per-coordinate standard error
  double worst_sigma = 0.0;     // max_i |mc - exact| / se
};

/**
 * Cross-checks the policy-gradient estimator against its exact expectation.
 *
 * The exact side enumerates all 2^B selection masks of the batch with their
 * product-Bernoulli probabilities and accumulates r * d log pi / d phi (plus
 * the deterministic direct-reward term in full mode). The sampled side runs
 * the real update from identical parameters n_samples times and recovers
 * each realized gradient from the parameter step. Requires an SGD scorer
 * with pre-seeded bounds so the step is exactly lr * gradient.
 */
inline ReinforceOracle reinforce_estimator_oracle(const cltv::ScorerState& scorer0,
                                                  const cltv::ClassifierPair& classifiers,
                                                  const cltv::Dataset& source,
                                                  const std::vector<size_t>& batch,
                                                  int n_samples, uint64_t seed) {
  using namespace cltv;
  if (scorer0.opt.kind != OptimizerState::Kind::sgd) {
    throw std::invalid_argument("reinforce_estimator_oracle: scorer must use SGD");
  }
  if (!scorer0.bounds.initialized || scorer0.bounds.r_max <= scorer0.bounds.r_min) {
    throw std::invalid_argument("reinforce_estimator_oracle: bounds must be pre-seeded");
  }
  const size_t b = batch.size();
  if (b == 0 || b > 20) {
    throw std::invalid_argument("reinforce_estimator_oracle: batch size must be in [1, 20]");
  }

  // Per-transition forward passes, scores, score gradients, dynamics factors.
  std::vector<double> scores(b), dyn(b);
  std::vector<std::vector<double>> dw(b);
  for (size_t j = 0; j < b; ++j) {
    const Transition& t = source.transitions[batch[j]];
    ForwardCache cache;
    scores[j] = mlp_forward(scorer0.net,
                            scorer0.codec.encode_transition(t.state, t.action, t.next_state),
                            &cache)[0];
    dw[j] = flatten(mlp_backward(scorer0.net, cache, {1.0}));
    dyn[j] = dynamics_factor(classifiers, t.state, t.action, t.next_state);
  }
  const double r_unnorm = batch_reward_unnormalized(scores, dyn, scorer0.delta);
  const double r = normalize_reward(scorer0.bounds, r_unnorm);
  const size_t n_params = dw[0].size();

  std::vector<double> exact(n_params, 0.0);
  for (uint32_t mask = 0; mask < (1u << b); ++mask) {
    double prob = 1.0;
    std::vector<double> grad(n_params, 0.0);
    for (size_t j = 0; j < b; ++j) {
      const bool sel = (mask >> j) & 1u;
      const double w = std::min(std::max(scores[j], 1e-12), 1.0 - 1e-12);
      prob *= sel ? w : 1.0 - w;
      const double dlogpi_dw = sel ? 1.0 / w : -1.0 / (1.0 - w);
      for (size_t i = 0; i < n_params; ++i) grad[i] += r * dlogpi_dw * dw[j][i];
    }
    for (size_t i = 0; i < n_params; ++i) exact[i] += prob * grad[i];
  }
  if (scorer0.mode == GradientMode::full) {
    const double reward_coef = 2.0 / (scorer0.bounds.r_max - scorer0.bounds.r_min);
    for (size_t j = 0; j < b; ++j) {
      const double coef = reward_coef * (scorer0.delta * dyn[j] + (1.0 - scorer0.delta));
      for (size_t i = 0; i < n_params; ++i) exact[i] += coef * dw[j][i];
    }
  }

  // Sampled side: rerun the real update from the same parameters.
  const std::vector<double> theta0 = flatten_params(scorer0.net);
  std::vector<double> sum(n_params, 0.0), sum_sq(n_params, 0.0);
  Rng seeder(seed);
  for (int s = 0; s < n_samples; ++s) {
    ScorerState scorer = scorer0;
    Rng rng(seeder.next_u64());
    reinforce_update(scorer, classifiers, source, batch, rng);
    const std::vector<double> theta1 = flatten_params(scorer.net);
    for (size_t i = 0; i < n_params; ++i) {
      double g = (theta1[i] - theta0[i]) / scorer0.opt.lr;
      sum[i] += g;
      sum_sq[i] += g * g;
    }
  }

  ReinforceOracle out;
  out.exact = std::move(exact);
  out.mc_mean.resize(n_params);
  out.mc_se.resize(n_params);
  for (size_t i = 0; i < n_params; ++i) {
    out.mc_mean[i] = sum[i] / n_samples;
    double var = (sum_sq[i] - sum[i] * sum[i] / n_samples) / std::max(n_samples - 1, 1);
    out.mc_se[i] = std::sqrt(std::max(var, 0.0) / n_samples);
    double diff = std::abs(out.mc_mean[i] - out.exact[i]);
    // A zero-variance coordinate must match outright.
    double sigma = out.mc_se[i] > 1e-15 ? diff / out.mc_se[i] : (diff > 1e-9 ? 1e9 : 0.0);
    out.worst_sigma = std::max(out.worst_sigma, sigma);
  }
  return out;
}

}  // namespace testutil

#endif  // CLTV_TESTS_TEST_SUPPORT_HPP
