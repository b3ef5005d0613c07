#ifndef CLTV_EXPERIMENT_HPP
#define CLTV_EXPERIMENT_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cltv/classifiers.hpp"
#include "cltv/config.hpp"
#include "cltv/mdp.hpp"
#include "cltv/offline_rl.hpp"
#include "cltv/scoring.hpp"
#include "cltv/valuation.hpp"

namespace cltv {

/// Behaviour tiers: random -> eps 1.0, medium -> eps 0.5, expert -> eps 0.05
/// (eps-greedy mixtures on the exact optimal Q of the generating MDP).
double tier_epsilon(const std::string& tier);

struct DataConfig {
  std::string source_tier = "random";
  std::string target_tier = "medium";
  int source_trajectories = 200;
  int target_trajectories = 40;
  int horizon = 60;
  double source_frac = 0.9;
};

/**
 * Fully resolved experiment description. Parsed from flat key=value text
 * with dotted sections (env.*, data.*, classifier.*, ts.*, cltv.*, cql.*,
 * eval.*, sweep.*); unknown keys are rejected so typos cannot silently fall
 * back to defaults.
 */
struct ExperimentConfig {
  EnvSpec env;            // env.family, env.n, env.width, env.height, env.slip
  double gamma = 0.99;    // env.gamma, shared by data generation and training
  double mismatch = 0.3;  // env.mismatch, source-dynamics perturbation
  uint64_t seed = 1;      // default seed, overridable per run
  DataConfig data;
  ClassifierConfig classifier;
  ScorerConfig scorer;
  CltvConfig cltv;
  CqlConfig cql;
  EvalSettings eval;
  int target_ac_steps = 2000;  // cltv.target_ac_steps
  std::vector<double> sweep_deltas = {0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> sweep_lambdas = {0.2, 0.4, 0.6, 0.8, 1.0};
};

ExperimentConfig experiment_config_from_kv(const KeyValueConfig& kv);
ExperimentConfig load_experiment_config(const std::string& path);

/**
 * Serializes every field back to key=value form (except the seed, which is
 * a per-run input, not part of the experiment identity). The hash of this
 * canonical form is the config hash embedded in every output file, so two
 * configs that resolve to the same experiment hash identically no matter
 * how the files were formatted.
 */
KeyValueConfig experiment_config_to_kv(const ExperimentConfig& cfg);
std::string config_hash_hex(const ExperimentConfig& cfg);

struct ExperimentData {
  TabularMDP target_env;
  TabularMDP source_env;  // perturbed copy of target_env
  Dataset source;         // rolled out on source_env with the source tier
  Dataset target;         // rolled out on target_env with the target tier
  Dataset mixed;          // whole-trajectory 90/10 style mixture
};

/// Environments, tier policies and datasets, all derived from named
/// substreams of `seed` so the same seed reproduces the same bytes.
ExperimentData generate_experiment_data(const ExperimentConfig& cfg, uint64_t seed);

/// Splits a mixed dataset back into its source- and target-domain parts,
/// renumbering trajectory ids in each; the method consumes the two sides
/// separately while the mixture is the published artifact.
std::pair<Dataset, Dataset> split_by_domain(const Dataset& mixed);

/// Writes source.jsonl, target.jsonl, mixed.jsonl and a manifest into
/// out_dir (which must already exist).
void write_experiment_data(const ExperimentConfig& cfg, uint64_t seed,
                           const std::string& out_dir);

struct RunOutcome {
  RunResult result;
  double final_normalized_score = 0.0;
  std::string metrics_path;
};

/**
 * End-to-end run of one method: inline data generation (or a preloaded
 * mixed dataset), the curriculum or baseline loop, metrics streamed to
 * out_dir/metrics.csv (an "# aborted" marker line is appended if a phase
 * throws), checkpoints for every trained component, a manifest and a
 * wall-clock timings file. out_dir must already exist.
 */
RunOutcome run_experiment(const ExperimentConfig& cfg, Method method, uint64_t seed,
                          const std::string& out_dir, const Dataset* preloaded_mixed = nullptr);

struct SweepCell {
  double delta = 0.0;
  double lambda = 0.0;
  double normalized_score = 0.0;  // NaN when the cell failed
};

/**
 * Runs method cltv once per (delta, lambda) grid cell, one seed each, each
 * cell in its own subdirectory. Cell failures are recorded as NaN rows and
 * the sweep continues. jobs > 1 runs cells in a worker pool; results are
 * ordered by grid position either way.
 */
std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg, const std::string& out_dir,
                                 int jobs);

std::string sweep_to_csv(const std::vector<SweepCell>& cells);

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single value
  int n = 0;
};

Aggregate aggregate(const std::vector<double>& values);

}  // namespace cltv

#endif  // CLTV_EXPERIMENT_HPP
