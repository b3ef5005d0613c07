#include "cltv/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "cltv/dataset_io.hpp"
#include "cltv/format.hpp"
#include "cltv/rng.hpp"

namespace fs = std::filesystem;

namespace cltv {

double tier_epsilon(const std::string& tier) {
  if (tier == "random") return 1.0;
  if (tier == "medium") return 0.5;
  if (tier == "expert") return 0.05;
  throw ConfigError("unknown behaviour tier '" + tier +
                    "' (expected random, medium or expert)");
}

namespace {

std::string join_ints(const std::vector<int>& xs) {
  std::string s;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(xs[i]);
  }
  return s;
}

std::string join_doubles(const std::vector<double>& xs) {
  std::string s;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    s += format_double(xs[i]);
  }
  return s;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

ExperimentConfig experiment_config_from_kv(const KeyValueConfig& kv) {
  ExperimentConfig cfg;

  cfg.env.family = kv.get_string("env.family", "gridworld");
  cfg.env.n = kv.get_int("env.n", 8);
  cfg.env.width = kv.get_int("env.width", 5);
  cfg.env.height = kv.get_int("env.height", 5);
  cfg.env.slip = kv.get_double("env.slip", 0.1);
  cfg.gamma = kv.get_double("env.gamma", 0.99);
  cfg.mismatch = kv.get_double("env.mismatch", 0.3);
  cfg.seed = kv.get_uint64("seed", 1);

  cfg.data.source_tier = kv.get_string("data.source_tier", "random");
  cfg.data.target_tier = kv.get_string("data.target_tier", "medium");
  cfg.data.source_trajectories = kv.get_int("data.source_trajectories", 200);
  cfg.data.target_trajectories = kv.get_int("data.target_trajectories", 40);
  cfg.data.horizon = kv.get_int("data.horizon", 60);
  cfg.data.source_frac = kv.get_double("data.source_frac", 0.9);

  cfg.classifier.hidden = kv.get_int_list("classifier.hidden", cfg.classifier.hidden);
  cfg.classifier.lr = kv.get_double("classifier.lr", cfg.classifier.lr);
  cfg.classifier.epochs = kv.get_int("classifier.epochs", cfg.classifier.epochs);
  cfg.classifier.batch_size = kv.get_int("classifier.batch_size", cfg.classifier.batch_size);

  cfg.scorer.hidden = kv.get_int_list("ts.hidden", cfg.scorer.hidden);
  cfg.scorer.lr = kv.get_double("ts.lr", cfg.scorer.lr);
  cfg.scorer.adam = kv.get_bool("ts.adam", cfg.scorer.adam);
  cfg.scorer.batch_size = kv.get_int("ts.batch_size", cfg.scorer.batch_size);
  cfg.scorer.delta = kv.get_double("ts.delta", cfg.scorer.delta);
  cfg.scorer.updates = kv.get_int("ts.updates", cfg.scorer.updates);
  std::string mode = kv.get_string("ts.gradient_mode", gradient_mode_to_string(cfg.scorer.mode));
  try {
    cfg.scorer.mode = gradient_mode_from_string(mode);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("ts.gradient_mode: ") + e.what());
  }

  cfg.cltv.lambda = kv.get_double("cltv.lambda", cfg.cltv.lambda);
  cfg.cltv.m_ratio = kv.get_double("cltv.m_ratio", cfg.cltv.m_ratio);
  cfg.cltv.epochs = kv.get_int("cltv.epochs", cfg.cltv.epochs);
  cfg.cltv.steps_per_epoch = kv.get_int("cltv.steps_per_epoch", cfg.cltv.steps_per_epoch);
  std::string variant =
      kv.get_string("cltv.reward_variant", reward_variant_to_string(cfg.cltv.reward_variant));
  try {
    cfg.cltv.reward_variant = reward_variant_from_string(variant);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cltv.reward_variant: ") + e.what());
  }
  cfg.cltv.td_alpha = kv.get_double("cltv.td_alpha", cfg.cltv.td_alpha);
  cfg.target_ac_steps = kv.get_int("cltv.target_ac_steps", cfg.target_ac_steps);
  cfg.cltv.gamma = cfg.gamma;

  cfg.cql.lr = kv.get_double("cql.lr", cfg.cql.lr);
  cfg.cql.alpha = kv.get_double("cql.alpha", cfg.cql.alpha);
  cfg.cql.tau = kv.get_double("cql.tau", cfg.cql.tau);
  cfg.cql.batch_size = kv.get_int("cql.batch_size", cfg.cql.batch_size);
  cfg.cql.temperature = kv.get_double("cql.temperature", cfg.cql.temperature);

  cfg.eval.n_episodes = kv.get_int("eval.n_episodes", 100);
  cfg.eval.horizon = kv.get_int("eval.horizon", 200);

  cfg.sweep_deltas = kv.get_double_list("sweep.deltas", cfg.sweep_deltas);
  cfg.sweep_lambdas = kv.get_double_list("sweep.lambdas", cfg.sweep_lambdas);

  std::vector<std::string> unknown = kv.unread_keys();
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }

  require(cfg.gamma > 0.0 && cfg.gamma < 1.0, "env.gamma must lie in (0, 1)");
  require(cfg.mismatch >= 0.0 && cfg.mismatch <= 1.0, "env.mismatch must lie in [0, 1]");
  tier_epsilon(cfg.data.source_tier);
  tier_epsilon(cfg.data.target_tier);
  require(cfg.data.source_trajectories > 0, "data.source_trajectories must be positive");
  require(cfg.data.target_trajectories > 0, "data.target_trajectories must be positive");
  require(cfg.data.horizon > 0, "data.horizon must be positive");
  require(cfg.data.source_frac > 0.0 && cfg.data.source_frac < 1.0,
          "data.source_frac must lie in (0, 1)");
  require(cfg.scorer.delta >= 0.0 && cfg.scorer.delta <= 1.0, "ts.delta must lie in [0, 1]");
  require(cfg.scorer.batch_size > 0, "ts.batch_size must be positive");
  require(cfg.scorer.updates >= 0, "ts.updates must be >= 0");
  require(cfg.cltv.lambda >= 0.0 && cfg.cltv.lambda <= 1.0, "cltv.lambda must lie in [0, 1]");
  require(cfg.cltv.m_ratio > 0.0 && cfg.cltv.m_ratio <= 1.0, "cltv.m_ratio must lie in (0, 1]");
  require(cfg.cltv.epochs >= 0, "cltv.epochs must be >= 0");
  require(cfg.cltv.steps_per_epoch >= 0, "cltv.steps_per_epoch must be >= 0");
  require(cfg.target_ac_steps >= 0, "cltv.target_ac_steps must be >= 0");
  require(cfg.cql.batch_size > 0, "cql.batch_size must be positive");
  require(cfg.eval.n_episodes > 0, "eval.n_episodes must be positive");
  require(cfg.eval.horizon > 0, "eval.horizon must be positive");
  for (double d : cfg.sweep_deltas)
    require(d >= 0.0 && d <= 1.0, "sweep.deltas entries must lie in [0, 1]");
  for (double l : cfg.sweep_lambdas)
    require(l >= 0.0 && l <= 1.0, "sweep.lambdas entries must lie in [0, 1]");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from_kv(KeyValueConfig::from_file(path));
}

KeyValueConfig experiment_config_to_kv(const ExperimentConfig& cfg) {
  KeyValueConfig kv;
  kv.set("env.family", cfg.env.family);
  kv.set("env.n", std::to_string(cfg.env.n));
  kv.set("env.width", std::to_string(cfg.env.width));
  kv.set("env.height", std::to_string(cfg.env.height));
  kv.set("env.slip", format_double(cfg.env.slip));
  kv.set("env.gamma", format_double(cfg.gamma));
  kv.set("env.mismatch", format_double(cfg.mismatch));
  kv.set("data.source_tier", cfg.data.source_tier);
  kv.set("data.target_tier", cfg.data.target_tier);
  kv.set("data.source_trajectories", std::to_string(cfg.data.source_trajectories));
  kv.set("data.target_trajectories", std::to_string(cfg.data.target_trajectories));
  kv.set("data.horizon", std::to_string(cfg.data.horizon));
  kv.set("data.source_frac", format_double(cfg.data.source_frac));
  kv.set("classifier.hidden", join_ints(cfg.classifier.hidden));
  kv.set("classifier.lr", format_double(cfg.classifier.lr));
  kv.set("classifier.epochs", std::to_string(cfg.classifier.epochs));
  kv.set("classifier.batch_size", std::to_string(cfg.classifier.batch_size));
  kv.set("ts.hidden", join_ints(cfg.scorer.hidden));
  kv.set("ts.lr", format_double(cfg.scorer.lr));
  kv.set("ts.adam", cfg.scorer.adam ? "true" : "false");
  kv.set("ts.batch_size", std::to_string(cfg.scorer.batch_size));
  kv.set("ts.delta", format_double(cfg.scorer.delta));
  kv.set("ts.updates", std::to_string(cfg.scorer.updates));
  kv.set("ts.gradient_mode", gradient_mode_to_string(cfg.scorer.mode));
  kv.set("cltv.lambda", format_double(cfg.cltv.lambda));
  kv.set("cltv.m_ratio", format_double(cfg.cltv.m_ratio));
  kv.set("cltv.epochs", std::to_string(cfg.cltv.epochs));
  kv.set("cltv.steps_per_epoch", std::to_string(cfg.cltv.steps_per_epoch));
  kv.set("cltv.reward_variant", reward_variant_to_string(cfg.cltv.reward_variant));
  kv.set("cltv.td_alpha", format_double(cfg.cltv.td_alpha));
  kv.set("cltv.target_ac_steps", std::to_string(cfg.target_ac_steps));
  kv.set("cql.lr", format_double(cfg.cql.lr));
  kv.set("cql.alpha", format_double(cfg.cql.alpha));
  kv.set("cql.tau", format_double(cfg.cql.tau));
  kv.set("cql.batch_size", std::to_string(cfg.cql.batch_size));
  kv.set("cql.temperature", format_double(cfg.cql.temperature));
  kv.set("eval.n_episodes", std::to_string(cfg.eval.n_episodes));
  kv.set("eval.horizon", std::to_string(cfg.eval.horizon));
  kv.set("sweep.deltas", join_doubles(cfg.sweep_deltas));
  kv.set("sweep.lambdas", join_doubles(cfg.sweep_lambdas));
  return kv;
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  return experiment_config_to_kv(cfg).hash_hex();
}

ExperimentData generate_experiment_data(const ExperimentConfig& cfg, uint64_t seed) {
  ExperimentData data;
  data.target_env = make_env(cfg.env, cfg.gamma);
  data.source_env =
      perturb_dynamics(data.target_env, cfg.mismatch, derive_seed(seed, "env-perturb"));

  OptimalQSolution source_q = solve_optimal_q(data.source_env);
  OptimalQSolution target_q = solve_optimal_q(data.target_env);
  if (!source_q.converged || !target_q.converged)
    throw std::runtime_error("optimal Q solve did not converge while preparing tier policies");

  int n = data.target_env.n_states;
  int a = data.target_env.n_actions;
  Policy source_pol =
      epsilon_greedy_policy(source_q.q, n, a, tier_epsilon(cfg.data.source_tier));
  Policy target_pol =
      epsilon_greedy_policy(target_q.q, n, a, tier_epsilon(cfg.data.target_tier));

  data.source = generate_dataset(data.source_env, source_pol, cfg.data.source_trajectories,
                                 cfg.data.horizon, derive_seed(seed, "dataset-source"),
                                 Domain::source, "source");
  data.target = generate_dataset(data.target_env, target_pol, cfg.data.target_trajectories,
                                 cfg.data.horizon, derive_seed(seed, "dataset-target"),
                                 Domain::target, "target");
  data.mixed = mix_datasets(data.source, data.target, cfg.data.source_frac);
  return data;
}

std::pair<Dataset, Dataset> split_by_domain(const Dataset& mixed) {
  Dataset source_part;
  Dataset target_part;
  for (Dataset* part : {&source_part, &target_part}) {
    part->env_fingerprint = mixed.env_fingerprint;
    part->n_states = mixed.n_states;
    part->n_actions = mixed.n_actions;
    part->gamma = mixed.gamma;
  }
  source_part.role = "source";
  target_part.role = "target";

  int last_traj = -1;
  int source_trajs = 0;
  int target_trajs = 0;
  for (const Transition& t : mixed.transitions) {
    Dataset& part = t.domain == Domain::source ? source_part : target_part;
    int& count = t.domain == Domain::source ? source_trajs : target_trajs;
    if (t.traj_id != last_traj) {
      last_traj = t.traj_id;
      ++count;
    }
    Transition copy = t;
    copy.traj_id = count - 1;
    part.transitions.push_back(copy);
  }
  if (source_part.transitions.empty() || target_part.transitions.empty())
    throw std::runtime_error("split_by_domain: mixed dataset must contain both domains");
  validate_dataset(source_part);
  validate_dataset(target_part);
  return {std::move(source_part), std::move(target_part)};
}

namespace {

void write_text_file(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << text;
    if (!out.good()) throw std::runtime_error("write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

void require_directory(const std::string& out_dir) {
  if (!fs::is_directory(out_dir))
    throw ConfigError("output directory does not exist: " + out_dir);
}

std::string manifest_common(const ExperimentConfig& cfg, uint64_t seed,
                            const TabularMDP& target_env, const TabularMDP& source_env,
                            const Dataset& mixed, size_t n_source_transitions,
                            size_t n_target_transitions) {
  std::string m;
  m += "config_hash = " + config_hash_hex(cfg) + "\n";
  m += "seed = " + std::to_string(seed) + "\n";
  m += "env = " + cfg.env.describe() + "\n";
  m += "target_env_fingerprint = " + hex_u64(target_env.fingerprint()) + "\n";
  m += "source_env_fingerprint = " + hex_u64(source_env.fingerprint()) + "\n";
  m += "mixed_dataset_fingerprint = " + hex_u64(mixed.env_fingerprint) + "\n";
  m += "source_transitions = " + std::to_string(n_source_transitions) + "\n";
  m += "target_transitions = " + std::to_string(n_target_transitions) + "\n";
  m += "mixed_transitions = " + std::to_string(mixed.transitions.size()) + "\n";
  double share = mixed.transitions.empty()
                     ? 0.0
                     : static_cast<double>(n_source_transitions) /
                           static_cast<double>(mixed.transitions.size());
  m += "mixed_source_share = " + format_double(share) + "\n";
  return m;
}

}  // namespace

void write_experiment_data(const ExperimentConfig& cfg, uint64_t seed,
                           const std::string& out_dir) {
  require_directory(out_dir);
  ExperimentData data = generate_experiment_data(cfg, seed);
  fs::path dir(out_dir);
  save_dataset(data.source, (dir / "source.jsonl").string());
  save_dataset(data.target, (dir / "target.jsonl").string());
  save_dataset(data.mixed, (dir / "mixed.jsonl").string());

  auto [src_part, tgt_part] = split_by_domain(data.mixed);
  std::string manifest =
      manifest_common(cfg, seed, data.target_env, data.source_env, data.mixed,
                      src_part.transitions.size(), tgt_part.transitions.size());
  manifest += "full_source_transitions = " + std::to_string(data.source.transitions.size()) + "\n";
  manifest += "full_target_transitions = " + std::to_string(data.target.transitions.size()) + "\n";
  write_text_file((dir / "manifest.txt").string(), manifest);
}

RunOutcome run_experiment(const ExperimentConfig& cfg, Method method, uint64_t seed,
                          const std::string& out_dir, const Dataset* preloaded_mixed) {
  require_directory(out_dir);
  fs::path dir(out_dir);
  auto wall_start = std::chrono::steady_clock::now();

  TabularMDP target_env = make_env(cfg.env, cfg.gamma);
  TabularMDP source_env =
      perturb_dynamics(target_env, cfg.mismatch, derive_seed(seed, "env-perturb"));
  Dataset mixed;
  if (preloaded_mixed != nullptr) {
    if (preloaded_mixed->env_fingerprint != target_env.fingerprint())
      throw std::runtime_error(
          "preloaded dataset fingerprint " + hex_u64(preloaded_mixed->env_fingerprint) +
          " does not match the configured environment " + hex_u64(target_env.fingerprint()));
    mixed = *preloaded_mixed;
  } else {
    mixed = generate_experiment_data(cfg, seed).mixed;
  }
  auto [src_part, tgt_part] = split_by_domain(mixed);

  RunInputs inputs;
  inputs.source = &src_part;
  inputs.target = &tgt_part;
  inputs.eval_env = &target_env;
  inputs.method = method;
  inputs.classifier_cfg = cfg.classifier;
  inputs.scorer_cfg = cfg.scorer;
  inputs.cltv_cfg = cfg.cltv;
  if (method == Method::cltv_td)
    inputs.cltv_cfg.reward_variant = RewardVariant::td;
  else if (method == Method::cltv_rs)
    inputs.cltv_cfg.reward_variant = RewardVariant::rs;
  inputs.cql_cfg = cfg.cql;
  inputs.eval = cfg.eval;
  inputs.target_ac_steps = cfg.target_ac_steps;
  inputs.seed = seed;

  if (method == Method::cltv_td || method == Method::cltv_rs) {
    // The reshaping variants consume the value estimate plain temporal
    // difference learning can reach from the offline pool itself, not an
    // oracle solve: V is read off an unpenalized critic pre-trained on the
    // mixed data, so it inherits whatever bias the mismatched source
    // transitions introduce.
    AcPair pool_critic = init_ac(target_env.n_states, target_env.n_actions);
    CqlConfig plain_cfg = cfg.cql;
    plain_cfg.alpha = 0.0;
    Rng tv_rng(derive_seed(seed, "variant-v"));
    for (int s = 0; s < cfg.target_ac_steps; ++s)
      cql_update(pool_critic, plain_cfg, mixed.transitions, target_env.terminal,
                 cfg.gamma, tv_rng);
    inputs.target_v.assign(target_env.n_states, 0.0);
    for (int x = 0; x < target_env.n_states; ++x) {
      double best = pool_critic.q[static_cast<size_t>(x) * target_env.n_actions];
      for (int u = 1; u < target_env.n_actions; ++u)
        best = std::max(best, pool_critic.q[static_cast<size_t>(x) * target_env.n_actions + u]);
      inputs.target_v[x] = best;
    }
  }

  std::string metrics_path = (dir / "metrics.csv").string();
  std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot open " + metrics_path + " for writing");
  metrics << metrics_csv_header();
  metrics.flush();
  inputs.on_row = [&](const MetricsRow& row) {
    metrics << metrics_row_csv(row, method, seed);
    metrics.flush();
  };

  RunOutcome outcome;
  try {
    outcome.result = run_cltv(inputs);
  } catch (const std::exception& e) {
    metrics << "# aborted: " << e.what() << "\n";
    metrics.flush();
    throw;
  }
  outcome.final_normalized_score = outcome.result.final_normalized_score;
  outcome.metrics_path = metrics_path;
  metrics.close();

  std::string hash = config_hash_hex(cfg);
  save_ac(outcome.result.ac, cfg.gamma, target_env.fingerprint(), hash,
          (dir / "policy.json").string());
  if (outcome.result.target_ac)
    save_ac(*outcome.result.target_ac, cfg.gamma, target_env.fingerprint(), hash,
            (dir / "target_policy.json").string());
  if (outcome.result.classifiers)
    save_classifier_pair(*outcome.result.classifiers, (dir / "classifiers.json").string());
  if (outcome.result.scorer)
    save_scorer(*outcome.result.scorer, (dir / "scorer.json").string());

  std::string manifest = manifest_common(cfg, seed, target_env, source_env, mixed,
                                         src_part.transitions.size(),
                                         tgt_part.transitions.size());
  manifest += "method = " + method_to_string(method) + "\n";
  manifest += "final_normalized_score = " + format_double(outcome.final_normalized_score) + "\n";
  write_text_file((dir / "manifest.txt").string(), manifest);

  const PhaseTimings& t = outcome.result.timings;
  double total_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - wall_start)
                        .count();
  char buf[64];
  std::string timings;
  auto add_ms = [&](const char* name, double ms) {
    std::snprintf(buf, sizeof(buf), "%s_ms = %.3f\n", name, ms);
    timings += buf;
  };
  add_ms("classifier", t.classifier_ms);
  add_ms("ts", t.ts_ms);
  add_ms("target_ac", t.target_ac_ms);
  add_ms("curriculum", t.curriculum_ms);
  add_ms("total", total_ms);
  write_text_file((dir / "timings.txt").string(), timings);
  return outcome;
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg, const std::string& out_dir,
                                 int jobs) {
  require_directory(out_dir);
  fs::path dir(out_dir);

  std::vector<SweepCell> cells;
  std::vector<fs::path> cell_dirs;
  for (size_t i = 0; i < cfg.sweep_deltas.size(); ++i) {
    for (size_t j = 0; j < cfg.sweep_lambdas.size(); ++j) {
      SweepCell cell;
      cell.delta = cfg.sweep_deltas[i];
      cell.lambda = cfg.sweep_lambdas[j];
      cell.normalized_score = std::numeric_limits<double>::quiet_NaN();
      cells.push_back(cell);
      cell_dirs.push_back(dir / ("cell-" + std::to_string(i) + "-" + std::to_string(j)));
    }
  }

  auto run_cell = [&](size_t idx) {
    ExperimentConfig cell_cfg = cfg;
    cell_cfg.scorer.delta = cells[idx].delta;
    cell_cfg.cltv.lambda = cells[idx].lambda;
    try {
      fs::create_directory(cell_dirs[idx]);
      RunOutcome outcome =
          run_experiment(cell_cfg, Method::cltv, cfg.seed, cell_dirs[idx].string());
      cells[idx].normalized_score = outcome.final_normalized_score;
    } catch (const std::exception&) {
      // Recorded as a NaN row; the sweep carries on.
    }
  };

  int workers = std::clamp(jobs, 1, static_cast<int>(cells.size()));
  if (workers <= 1) {
    for (size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<size_t> next{0};
    auto drain = [&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= cells.size()) break;
        run_cell(i);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers) - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(drain);
    drain();
    for (auto& th : pool) th.join();
  }

  write_text_file((dir / "sweep.csv").string(), sweep_to_csv(cells));
  return cells;
}

std::string sweep_to_csv(const std::vector<SweepCell>& cells) {
  std::string csv = "delta,lambda,normalized_score\n";
  for (const auto& c : cells)
    csv += format_double(c.delta) + "," + format_double(c.lambda) + "," +
           format_double(c.normalized_score) + "\n";
  return csv;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.n = static_cast<int>(values.size());
  if (values.empty()) return a;
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

}  // namespace cltv
