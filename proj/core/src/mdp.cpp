#include "cltv/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cltv {

namespace {

constexpr double kGreedyNegLogit = -1e30;

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

struct GridGeom {
  int w = 0, h = 0;
  int at(int x, int y) const { return y * w + x; }
  int clamp_move(int s, int dx, int dy) const {
    int x = s % w, y = s / w;
    int nx = std::clamp(x + dx, 0, w - 1);
    int ny = std::clamp(y + dy, 0, h - 1);
    return at(nx, ny);
  }
};

void normalize_rows(TabularMDP& m) {
  for (int x = 0; x < m.n_states; ++x) {
    for (int u = 0; u < m.n_actions; ++u) {
      double total = 0.0;
      for (int y = 0; y < m.n_states; ++y) total += m.p[m.idx(x, u, y)];
      check(total > 0.0, "make_env: empty transition row");
      for (int y = 0; y < m.n_states; ++y) m.p[m.idx(x, u, y)] /= total;
    }
  }
}

TabularMDP blank_mdp(int n_states, int n_actions, double gamma) {
  TabularMDP m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  m.p.assign(static_cast<size_t>(n_states) * n_actions * n_states, 0.0);
  m.r.assign(m.p.size(), 0.0);
  m.initial_dist.assign(n_states, 0.0);
  m.terminal.assign(n_states, 0);
  return m;
}

/// Absorbing self-loop with zero reward; the representation of a terminal
/// state that validate() expects.
void seal_terminal(TabularMDP& m, int s) {
  m.terminal[s] = 1;
  for (int u = 0; u < m.n_actions; ++u) {
    for (int y = 0; y < m.n_states; ++y) {
      m.p[m.idx(s, u, y)] = (y == s) ? 1.0 : 0.0;
      m.r[m.idx(s, u, y)] = 0.0;
    }
  }
}

TabularMDP make_chain(int n, double slip, double gamma) {
  check(n >= 2, "make_env: chain needs at least 2 states");
  TabularMDP m = blank_mdp(n, 2, gamma);
  int goal = n - 1;
  for (int x = 0; x < n; ++x) {
    int left = std::max(x - 1, 0);
    int right = std::min(x + 1, n - 1);
    if (x == goal) {
      // Absorbing but not terminal: staying at the goal keeps paying.
      left = right = goal;
    }
    m.p[m.idx(x, 0, left)] += 1.0 - slip;
    m.p[m.idx(x, 0, right)] += slip;
    m.p[m.idx(x, 1, right)] += 1.0 - slip;
    m.p[m.idx(x, 1, left)] += slip;
    for (int u = 0; u < 2; ++u) m.r[m.idx(x, u, goal)] = 1.0;
  }
  m.initial_dist[0] = 1.0;
  return m;
}

TabularMDP make_grid_family(int w, int h, double slip, double gamma, bool cliff) {
  check(w >= 2 && h >= 2, "make_env: grid needs width and height >= 2");
  GridGeom g{w, h};
  TabularMDP m = blank_mdp(w * h, 4, gamma);
  const int dx[4] = {0, 0, -1, 1};  // up, down, left, right
  const int dy[4] = {-1, 1, 0, 0};
  // Lateral slip goes to the two perpendicular directions.
  const int perp[4][2] = {{2, 3}, {2, 3}, {0, 1}, {0, 1}};

  int start = cliff ? g.at(0, h - 1) : g.at(0, 0);
  int goal = g.at(w - 1, h - 1);

  std::vector<uint8_t> is_terminal(m.n_states, 0);
  is_terminal[goal] = 1;
  if (cliff) {
    for (int x = 1; x < w - 1; ++x) is_terminal[g.at(x, h - 1)] = 1;
  }

  for (int s = 0; s < m.n_states; ++s) {
    if (is_terminal[s]) continue;
    for (int u = 0; u < 4; ++u) {
      m.p[m.idx(s, u, g.clamp_move(s, dx[u], dy[u]))] += 1.0 - slip;
      for (int k = 0; k < 2; ++k) {
        int v = perp[u][k];
        m.p[m.idx(s, u, g.clamp_move(s, dx[v], dy[v]))] += slip / 2.0;
      }
      m.r[m.idx(s, u, goal)] = 1.0;
    }
  }
  for (int s = 0; s < m.n_states; ++s) {
    if (is_terminal[s]) seal_terminal(m, s);
  }
  m.initial_dist[start] = 1.0;
  return m;
}

}  // namespace

std::string EnvSpec::describe() const {
  if (family == "chain") {
    return "chain(n=" + std::to_string(n) + ",slip=" + std::to_string(slip) + ")";
  }
  return family + "(" + std::to_string(width) + "x" + std::to_string(height) +
         ",slip=" + std::to_string(slip) + ")";
}

TabularMDP make_env(const EnvSpec& spec, double gamma) {
  check(gamma > 0.0 && gamma < 1.0, "make_env: gamma must lie in (0, 1)");
  check(spec.slip >= 0.0 && spec.slip < 1.0, "make_env: slip must lie in [0, 1)");
  TabularMDP m;
  if (spec.family == "chain") {
    m = make_chain(spec.n, spec.slip, gamma);
  } else if (spec.family == "gridworld") {
    m = make_grid_family(spec.width, spec.height, spec.slip, gamma, false);
  } else if (spec.family == "cliffwalk") {
    m = make_grid_family(spec.width, spec.height, spec.slip, gamma, true);
  } else {
    throw std::invalid_argument("make_env: unknown family '" + spec.family + "'");
  }
  normalize_rows(m);
  m.validate();
  return m;
}

void TabularMDP::validate() const {
  check(n_states >= 2, "TabularMDP: need at least 2 states");
  check(n_actions >= 2, "TabularMDP: need at least 2 actions");
  check(gamma > 0.0 && gamma < 1.0, "TabularMDP: gamma must lie in (0, 1)");
  size_t want = static_cast<size_t>(n_states) * n_actions * n_states;
  check(p.size() == want && r.size() == want, "TabularMDP: tensor size mismatch");
  check(initial_dist.size() == static_cast<size_t>(n_states) &&
            terminal.size() == static_cast<size_t>(n_states),
        "TabularMDP: state vector size mismatch");

  for (int x = 0; x < n_states; ++x) {
    for (int u = 0; u < n_actions; ++u) {
      double total = 0.0;
      for (int y = 0; y < n_states; ++y) {
        double pv = prob(x, u, y);
        check(pv >= 0.0, "TabularMDP: negative transition probability");
        double rv = reward(x, u, y);
        check(rv >= 0.0 && rv <= 1.0, "TabularMDP: reward outside [0, 1]");
        total += pv;
      }
      check(std::abs(total - 1.0) <= 1e-9, "TabularMDP: transition row does not sum to 1");
      if (terminal[x]) {
        check(std::abs(prob(x, u, x) - 1.0) <= 1e-12, "TabularMDP: terminal state not absorbing");
        for (int y = 0; y < n_states; ++y) {
          check(reward(x, u, y) == 0.0, "TabularMDP: terminal state has nonzero reward");
        }
      }
    }
  }
  double init_total = 0.0;
  for (int x = 0; x < n_states; ++x) {
    check(initial_dist[x] >= 0.0, "TabularMDP: negative initial probability");
    check(!(terminal[x] && initial_dist[x] > 0.0), "TabularMDP: initial mass on terminal state");
    init_total += initial_dist[x];
  }
  check(std::abs(init_total - 1.0) <= 1e-9, "TabularMDP: initial distribution does not sum to 1");
}

uint64_t TabularMDP::fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  int64_t dims[2] = {n_states, n_actions};
  h = fnv1a64(dims, sizeof(dims), h);
  h = fnv1a64(&gamma, sizeof(gamma), h);
  h = fnv1a64(p.data(), p.size() * sizeof(double), h);
  h = fnv1a64(r.data(), r.size() * sizeof(double), h);
  h = fnv1a64(initial_dist.data(), initial_dist.size() * sizeof(double), h);
  h = fnv1a64(terminal.data(), terminal.size() * sizeof(uint8_t), h);
  return h;
}

TabularMDP perturb_dynamics(const TabularMDP& mdp, double mismatch, uint64_t seed) {
  check(mismatch >= 0.0 && mismatch <= 1.0, "perturb_dynamics: mismatch must lie in [0, 1]");
  mdp.validate();
  TabularMDP out = mdp;
  if (mismatch == 0.0) return out;  // bit-identical copy
  Rng rng(seed);
  for (int x = 0; x < mdp.n_states; ++x) {
    for (int u = 0; u < mdp.n_actions; ++u) {
      // Terminal rows stay absorbing so the terminal mask keeps its meaning.
      std::vector<double> random_row = rng.simplex(mdp.n_states);
      if (mdp.terminal[x]) continue;
      double total = 0.0;
      for (int y = 0; y < mdp.n_states; ++y) {
        double v = (1.0 - mismatch) * mdp.prob(x, u, y) + mismatch * random_row[y];
        out.p[out.idx(x, u, y)] = v;
        total += v;
      }
      for (int y = 0; y < mdp.n_states; ++y) out.p[out.idx(x, u, y)] /= total;
    }
  }
  out.validate();
  return out;
}

std::vector<double> Policy::probs(int state) const {
  assert(state >= 0 && state < n_states);
  const double* row = logits.data() + static_cast<size_t>(state) * n_actions;
  double m = row[0];
  for (int u = 1; u < n_actions; ++u) m = std::max(m, row[u]);
  std::vector<double> out(n_actions);
  double total = 0.0;
  for (int u = 0; u < n_actions; ++u) {
    out[u] = std::exp(row[u] - m);
    total += out[u];
  }
  for (int u = 0; u < n_actions; ++u) out[u] /= total;
  return out;
}

int Policy::sample(int state, Rng& rng) const {
  std::vector<double> pr = probs(state);
  return sample_categorical(pr.data(), n_actions, rng);
}

Policy Policy::uniform(int n_states, int n_actions) {
  Policy pol;
  pol.n_states = n_states;
  pol.n_actions = n_actions;
  pol.logits.assign(static_cast<size_t>(n_states) * n_actions, 0.0);
  return pol;
}

Policy Policy::from_probabilities(int n_states, int n_actions, const std::vector<double>& probs) {
  check(probs.size() == static_cast<size_t>(n_states) * n_actions,
        "Policy::from_probabilities: size mismatch");
  Policy pol;
  pol.n_states = n_states;
  pol.n_actions = n_actions;
  pol.logits.resize(probs.size());
  for (int x = 0; x < n_states; ++x) {
    double total = 0.0;
    for (int u = 0; u < n_actions; ++u) {
      double pv = probs[static_cast<size_t>(x) * n_actions + u];
      check(pv >= 0.0, "Policy::from_probabilities: negative probability");
      total += pv;
    }
    check(std::abs(total - 1.0) <= 1e-9, "Policy::from_probabilities: row does not sum to 1");
    for (int u = 0; u < n_actions; ++u) {
      size_t i = static_cast<size_t>(x) * n_actions + u;
      pol.logits[i] = probs[i] > 0.0 ? std::log(probs[i]) : kGreedyNegLogit;
    }
  }
  return pol;
}

Policy softmax_policy_from_q(const std::vector<double>& q, int n_states, int n_actions,
                             double temperature) {
  check(temperature > 0.0, "softmax_policy_from_q: temperature must be positive");
  check(q.size() == static_cast<size_t>(n_states) * n_actions,
        "softmax_policy_from_q: size mismatch");
  Policy pol;
  pol.n_states = n_states;
  pol.n_actions = n_actions;
  pol.logits.resize(q.size());
  for (size_t i = 0; i < q.size(); ++i) pol.logits[i] = q[i] / temperature;
  return pol;
}

Policy epsilon_greedy_policy(const std::vector<double>& q, int n_states, int n_actions,
                             double eps) {
  check(eps >= 0.0 && eps <= 1.0, "epsilon_greedy_policy: eps must lie in [0, 1]");
  check(q.size() == static_cast<size_t>(n_states) * n_actions,
        "epsilon_greedy_policy: size mismatch");
  std::vector<double> probs(q.size(), 0.0);
  for (int x = 0; x < n_states; ++x) {
    const double* row = q.data() + static_cast<size_t>(x) * n_actions;
    int best = 0;
    for (int u = 1; u < n_actions; ++u) {
      if (row[u] > row[best]) best = u;
    }
    for (int u = 0; u < n_actions; ++u) {
      size_t i = static_cast<size_t>(x) * n_actions + u;
      probs[i] = eps / n_actions + (u == best ? 1.0 - eps : 0.0);
    }
  }
  return Policy::from_probabilities(n_states, n_actions, probs);
}

QSolution solve_q_values(const TabularMDP& mdp, const Policy& policy) {
  mdp.validate();
  check(policy.n_states == mdp.n_states && policy.n_actions == mdp.n_actions,
        "solve_q_values: policy shape mismatch");
  const int n = mdp.n_states;
  const int na = mdp.n_actions;

  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(n);
  for (int x = 0; x < n; ++x) {
    std::vector<double> pi = policy.probs(x);
    for (int u = 0; u < na; ++u) {
      for (int y = 0; y < n; ++y) {
        double pv = pi[u] * mdp.prob(x, u, y);
        a(x, y) -= mdp.gamma * pv;
        r_pi(x) += pv * mdp.reward(x, u, y);
      }
    }
  }
  Eigen::VectorXd v = a.partialPivLu().solve(r_pi);
  double residual = (a * v - r_pi).lpNorm<Eigen::Infinity>();

  QSolution sol;
  sol.v.assign(n, 0.0);
  for (int x = 0; x < n; ++x) sol.v[x] = v(x);
  sol.q.assign(static_cast<size_t>(n) * na, 0.0);
  for (int x = 0; x < n; ++x) {
    for (int u = 0; u < na; ++u) {
      double qv = 0.0;
      for (int y = 0; y < n; ++y) {
        qv += mdp.prob(x, u, y) * (mdp.reward(x, u, y) + mdp.gamma * sol.v[y]);
      }
      sol.q[static_cast<size_t>(x) * na + u] = qv;
    }
  }
  // Consistency of V with the recovered Q closes the loop on the solve.
  for (int x = 0; x < n; ++x) {
    std::vector<double> pi = policy.probs(x);
    double vx = 0.0;
    for (int u = 0; u < na; ++u) vx += pi[u] * sol.q[static_cast<size_t>(x) * na + u];
    residual = std::max(residual, std::abs(vx - sol.v[x]));
  }
  sol.bellman_residual = residual;
  if (!(residual <= 1e-10)) {
    throw std::runtime_error("solve_q_values: Bellman residual " + std::to_string(residual) +
                             " exceeds 1e-10");
  }
  return sol;
}

OptimalQSolution solve_optimal_q(const TabularMDP& mdp, double tol, int max_iter) {
  mdp.validate();
  const int n = mdp.n_states;
  const int na = mdp.n_actions;
  OptimalQSolution sol;
  sol.q.assign(static_cast<size_t>(n) * na, 0.0);
  std::vector<double> vmax(n, 0.0), next_q(sol.q.size(), 0.0);

  auto apply = [&](const std::vector<double>& vin, std::vector<double>& qout) {
    double change = 0.0;
    for (int x = 0; x < n; ++x) {
      for (int u = 0; u < na; ++u) {
        double qv = 0.0;
        for (int y = 0; y < n; ++y) {
          qv += mdp.prob(x, u, y) * (mdp.reward(x, u, y) + mdp.gamma * vin[y]);
        }
        size_t i = static_cast<size_t>(x) * na + u;
        change = std::max(change, std::abs(qv - qout[i]));
        qout[i] = qv;
      }
    }
    return change;
  };

  double change = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iter && change > tol; ++it) {
    for (int x = 0; x < n; ++x) {
      const double* row = sol.q.data() + static_cast<size_t>(x) * na;
      vmax[x] = *std::max_element(row, row + na);
    }
    next_q = sol.q;
    change = apply(vmax, next_q);
    sol.q.swap(next_q);
  }
  sol.iterations = it;
  sol.residual = change;
  sol.converged = change <= tol;
  sol.v.assign(n, 0.0);
  for (int x = 0; x < n; ++x) {
    const double* row = sol.q.data() + static_cast<size_t>(x) * na;
    sol.v[x] = *std::max_element(row, row + na);
  }
  return sol;
}

std::vector<double> occupancy(const TabularMDP& mdp, const Policy& policy) {
  mdp.validate();
  check(policy.n_states == mdp.n_states && policy.n_actions == mdp.n_actions,
        "occupancy: policy shape mismatch");
  const int n = mdp.n_states;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd init(n);
  for (int x = 0; x < n; ++x) {
    init(x) = mdp.initial_dist[x];
    std::vector<double> pi = policy.probs(x);
    for (int u = 0; u < mdp.n_actions; ++u) {
      for (int y = 0; y < n; ++y) {
        // Transposed flow: occupancy of y receives mass from x.
        a(y, x) -= mdp.gamma * pi[u] * mdp.prob(x, u, y);
      }
    }
  }
  Eigen::VectorXd z = a.partialPivLu().solve(init);
  std::vector<double> d(n, 0.0);
  for (int x = 0; x < n; ++x) d[x] = (1.0 - mdp.gamma) * z(x);
  return d;
}

double policy_kl(const Policy& p1, const Policy& p2, int state) {
  check(p1.n_states == p2.n_states && p1.n_actions == p2.n_actions,
        "policy_kl: policy shape mismatch");
  check(state >= 0 && state < p1.n_states, "policy_kl: state out of range");
  std::vector<double> a = p1.probs(state);
  std::vector<double> b = p2.probs(state);
  double kl = 0.0;
  for (int u = 0; u < p1.n_actions; ++u) {
    if (a[u] == 0.0) continue;
    if (b[u] == 0.0) return std::numeric_limits<double>::infinity();
    kl += a[u] * std::log(a[u] / b[u]);
  }
  return std::max(kl, 0.0);
}

double policy_kl_mean(const Policy& p1, const Policy& p2, const std::vector<int>& states) {
  check(!states.empty(), "policy_kl_mean: empty state list");
  double total = 0.0;
  for (int s : states) total += policy_kl(p1, p2, s);
  return total / static_cast<double>(states.size());
}

int Dataset::n_trajectories() const {
  int count = 0;
  int last = -1;
  for (const auto& t : transitions) {
    if (t.traj_id != last) {
      ++count;
      last = t.traj_id;
    }
  }
  return count;
}

std::vector<TrajectorySpan> trajectory_spans(const Dataset& ds) {
  std::vector<TrajectorySpan> spans;
  size_t i = 0;
  while (i < ds.transitions.size()) {
    size_t j = i;
    int tid = ds.transitions[i].traj_id;
    while (j < ds.transitions.size() && ds.transitions[j].traj_id == tid) ++j;
    spans.push_back({tid, i, j});
    i = j;
  }
  return spans;
}

void validate_dataset(const Dataset& ds) {
  auto fail = [](size_t i, const std::string& what) {
    throw std::runtime_error("dataset transition " + std::to_string(i) + ": " + what);
  };
  if (ds.n_states < 2 || ds.n_actions < 2) {
    throw std::runtime_error("dataset: invalid state/action dimensions");
  }
  int expected_tid = 0;
  int expected_step = 1;
  for (size_t i = 0; i < ds.transitions.size(); ++i) {
    const Transition& t = ds.transitions[i];
    if (t.state < 0 || t.state >= ds.n_states) fail(i, "state out of range");
    if (t.next_state < 0 || t.next_state >= ds.n_states) fail(i, "next_state out of range");
    if (t.action < 0 || t.action >= ds.n_actions) fail(i, "action out of range");
    if (!std::isfinite(t.reward)) fail(i, "non-finite reward");
    if (i == 0 && t.traj_id != 0) fail(i, "trajectory ids must start at 0");
    if (t.traj_id == expected_tid - 1) {
      // continuing previous trajectory
      if (t.step != expected_step) fail(i, "steps must be contiguous from 1");
    } else if (t.traj_id == expected_tid) {
      if (t.step != 1) fail(i, "trajectory must start at step 1");
      ++expected_tid;
      expected_step = 1;
    } else {
      fail(i, "trajectory ids must be contiguous");
    }
    expected_step = t.step + 1;
  }
}

Dataset generate_dataset(const TabularMDP& mdp, const Policy& policy, int n_trajectories,
                         int horizon, uint64_t seed, Domain domain, const std::string& role) {
  mdp.validate();
  check(n_trajectories >= 1, "generate_dataset: need at least one trajectory");
  check(horizon >= 1, "generate_dataset: horizon must be positive");
  check(policy.n_states == mdp.n_states && policy.n_actions == mdp.n_actions,
        "generate_dataset: policy shape mismatch");
  Dataset ds;
  ds.role = role;
  ds.env_fingerprint = mdp.fingerprint();
  ds.n_states = mdp.n_states;
  ds.n_actions = mdp.n_actions;
  ds.gamma = mdp.gamma;
  Rng rng(seed);
  for (int tid = 0; tid < n_trajectories; ++tid) {
    int x = sample_categorical(mdp.initial_dist.data(), mdp.n_states, rng);
    for (int step = 1; step <= horizon; ++step) {
      int u = policy.sample(x, rng);
      const double* row = mdp.p.data() + mdp.idx(x, u, 0);
      int y = sample_categorical(row, mdp.n_states, rng);
      ds.transitions.push_back({tid, step, x, u, y, mdp.reward(x, u, y), domain});
      if (mdp.terminal[y]) break;
      x = y;
    }
  }
  return ds;
}

Dataset mix_datasets(const Dataset& source, const Dataset& target, double source_frac) {
  check(source_frac >= 0.0 && source_frac <= 1.0, "mix_datasets: source_frac must lie in [0, 1]");
  check(!source.transitions.empty() && !target.transitions.empty(),
        "mix_datasets: both datasets must be non-empty");
  check(source.n_states == target.n_states && source.n_actions == target.n_actions,
        "mix_datasets: dimension mismatch");
  check(source.gamma == target.gamma, "mix_datasets: gamma mismatch");

  const auto src_spans = trajectory_spans(source);
  const double t_count = static_cast<double>(target.transitions.size());

  // Smallest source prefix whose share reaches source_frac; the crossing
  // trajectory is included, which is the rounding that favors the source.
  size_t s_count = 0;
  size_t n_src_spans = 0;
  while (n_src_spans < src_spans.size() &&
         static_cast<double>(s_count) / (static_cast<double>(s_count) + t_count) < source_frac) {
    s_count += src_spans[n_src_spans].end - src_spans[n_src_spans].begin;
    ++n_src_spans;
  }

  Dataset out;
  out.role = "mixed";
  out.env_fingerprint = target.env_fingerprint;
  out.n_states = target.n_states;
  out.n_actions = target.n_actions;
  out.gamma = target.gamma;
  out.transitions.reserve(s_count + target.transitions.size());

  int tid = 0;
  for (size_t k = 0; k < n_src_spans; ++k) {
    for (size_t i = src_spans[k].begin; i < src_spans[k].end; ++i) {
      Transition t = source.transitions[i];
      t.traj_id = tid;
      out.transitions.push_back(t);
    }
    ++tid;
  }
  for (const auto& span : trajectory_spans(target)) {
    for (size_t i = span.begin; i < span.end; ++i) {
      Transition t = target.transitions[i];
      t.traj_id = tid;
      out.transitions.push_back(t);
    }
    ++tid;
  }
  validate_dataset(out);
  return out;
}

EvalResult evaluate_return(const TabularMDP& mdp, const Policy& policy, int n_episodes,
                           int horizon, uint64_t seed) {
  mdp.validate();
  check(n_episodes >= 1, "evaluate_return: need at least one episode");
  check(horizon >= 1, "evaluate_return: horizon must be positive");
  Rng rng(seed);
  double total = 0.0, total_sq = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    int x = sample_categorical(mdp.initial_dist.data(), mdp.n_states, rng);
    double ret = 0.0;
    for (int step = 0; step < horizon; ++step) {
      int u = policy.sample(x, rng);
      const double* row = mdp.p.data() + mdp.idx(x, u, 0);
      int y = sample_categorical(row, mdp.n_states, rng);
      ret += mdp.reward(x, u, y);
      if (mdp.terminal[y]) break;
      x = y;
    }
    total += ret;
    total_sq += ret * ret;
  }
  EvalResult res;
  res.n_episodes = n_episodes;
  res.mean = total / n_episodes;
  if (n_episodes > 1) {
    double var = (total_sq - total * total / n_episodes) / (n_episodes - 1);
    res.stddev = std::sqrt(std::max(var, 0.0));
  }
  return res;
}

double expected_return(const TabularMDP& mdp, const Policy& policy, int horizon) {
  mdp.validate();
  check(horizon >= 1, "expected_return: horizon must be positive");
  check(policy.n_states == mdp.n_states && policy.n_actions == mdp.n_actions,
        "expected_return: policy shape mismatch");
  const int n = mdp.n_states;
  // w[x] = expected remaining undiscounted return with h steps left.
  std::vector<double> w(n, 0.0), next(n, 0.0);
  std::vector<std::vector<double>> pi(n);
  for (int x = 0; x < n; ++x) pi[x] = policy.probs(x);
  for (int h = 0; h < horizon; ++h) {
    for (int x = 0; x < n; ++x) {
      if (mdp.terminal[x]) {
        next[x] = 0.0;
        continue;
      }
      double acc = 0.0;
      for (int u = 0; u < mdp.n_actions; ++u) {
        const double* row = mdp.p.data() + mdp.idx(x, u, 0);
        const double* rew = mdp.r.data() + mdp.idx(x, u, 0);
        double inner = 0.0;
        for (int y = 0; y < n; ++y) {
          inner += row[y] * (rew[y] + (mdp.terminal[y] ? 0.0 : w[y]));
        }
        acc += pi[x][u] * inner;
      }
      next[x] = acc;
    }
    w.swap(next);
  }
  double out = 0.0;
  for (int x = 0; x < n; ++x) out += mdp.initial_dist[x] * w[x];
  return out;
}

int sample_categorical(const double* row, int n, Rng& rng) {
  double u = rng.uniform01();
  double cum = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += row[i];
    if (u < cum) return i;
  }
  // Floating point slack: fall back to the last index with mass.
  for (int i = n - 1; i >= 0; --i) {
    if (row[i] > 0.0) return i;
  }
  return n - 1;
}

}  // namespace cltv
