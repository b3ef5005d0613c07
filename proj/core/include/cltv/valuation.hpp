#ifndef CLTV_VALUATION_HPP
#define CLTV_VALUATION_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cltv/classifiers.hpp"
#include "cltv/mdp.hpp"
#include "cltv/offline_rl.hpp"
#include "cltv/scoring.hpp"

namespace cltv {

enum class RewardVariant { cltv, td, rs };

std::string reward_variant_to_string(RewardVariant v);
RewardVariant reward_variant_from_string(const std::string& s);

struct CltvConfig {
  double lambda = 0.8;      // blend between original reward and transition score
  double m_ratio = 0.1;     // fraction of source trajectories selected per epoch
  int epochs = 10;
  int steps_per_epoch = 500;
  double gamma = 0.99;
  RewardVariant reward_variant = RewardVariant::cltv;
  double td_alpha = 0.5;    // only used by the td variant
};

struct TrajectoryValue {
  int traj_id = 0;
  double similarity = 1.0;  // exp(-mean KL), in (0, 1]
  double ret = 0.0;         // discounted return of the trajectory
  double value = 0.0;       // similarity * ret
};

/// Blends every source reward with its transition score:
///   r_j <- (1 - lambda) * r_j + lambda * w_j.
/// Throws when scores are missing or misaligned.
Dataset modify_rewards(const ScoredDataset& scored, double lambda);

/// Temporal-difference reward reshaping against a fixed state-value table:
///   r <- V(x) + alpha * (r + gamma * V(x') - V(x)).
Dataset reward_variant_td(const Dataset& ds, const std::vector<double>& v, double alpha,
                          double gamma);

/// Potential-difference reshaping: r <- gamma * V(x') - V(x).
Dataset reward_variant_rs(const Dataset& ds, const std::vector<double>& v, double gamma);

/**
 * Value of one trajectory under the current policy pair:
 *   similarity = exp(-(1/L) * sum_t KL(pi_target(.|x_t) || pi_source(.|x_t)))
 *   ret        = sum_t gamma^{t-1} r_t
 *   value      = similarity * ret.
 * The KL is the full distributional divergence at each visited state, not
 * the likelihood of the logged action. Throws on an empty span.
 */
TrajectoryValue value_trajectory(const Dataset& ds, const TrajectorySpan& span,
                                 const Policy& pi_target, const Policy& pi_source,
                                 double gamma);

/// Top ceil(m_ratio * K) trajectory ids by value, descending; ties broken by
/// ascending id so the selection is deterministic.
std::vector<int> select_top_m(const std::vector<TrajectoryValue>& values, double m_ratio);

enum class Method { vanilla, cltv, cltv_td, cltv_rs, ts_only };

std::string method_to_string(Method m);
Method method_from_string(const std::string& s);

struct EvalSettings {
  int n_episodes = 100;
  int horizon = 200;
};

/// One metrics row; emitted every 100 base-algorithm steps and at the end of
/// every epoch. Rows are monotone in (epoch, step).
struct MetricsRow {
  int epoch = 0;
  long step = 0;  // cumulative base-algorithm updates
  double mean_eval_return = 0.0;
  double std_eval_return = 0.0;
  double normalized_score = 0.0;
  int n_selected = 0;
  double mean_selected_value = 0.0;
};

struct PhaseTimings {
  double classifier_ms = 0.0;
  double ts_ms = 0.0;
  double target_ac_ms = 0.0;
  double curriculum_ms = 0.0;
};

struct RunInputs {
  const Dataset* source = nullptr;
  const Dataset* target = nullptr;
  const TabularMDP* eval_env = nullptr;
  Method method = Method::vanilla;
  ClassifierConfig classifier_cfg;
  ScorerConfig scorer_cfg;
  CltvConfig cltv_cfg;
  CqlConfig cql_cfg;
  EvalSettings eval;
  int target_ac_steps = 2000;    // pretraining budget for the frozen target pair
  std::vector<double> target_v;  // exact V(x) table for the td / rs variants
  uint64_t seed = 0;
  // Called on every metrics row as it is produced, so callers can stream
  // rows to disk and keep partial results when a later phase throws.
  std::function<void(const MetricsRow&)> on_row;
};

struct RunResult {
  AcPair ac;  // the base pair the curriculum trains
  std::vector<MetricsRow> metrics;
  PhaseTimings timings;
  std::optional<ClassifierPair> classifiers;
  std::optional<ScorerState> scorer;
  std::optional<AcPair> target_ac;
  double final_normalized_score = 0.0;
};

/**
 * End-to-end curriculum run.
 *
 * vanilla:  base algorithm on source + target with original rewards.
 * ts_only:  classifier + scorer training, reward modification, then the base
 *           algorithm on the full modified source + target (no selection).
 * cltv:     reward modification as ts_only, then per epoch: value every
 *           source trajectory against the frozen target actor and the
 *           current base actor, select the top m, train on the selection
 *           plus the target data.
 * cltv_td / cltv_rs: curriculum as cltv but rewards reshaped against
 *           target_v instead of transition scores (no classifiers, no TS).
 *
 * Every stochastic phase draws from its own named substream of the run
 * seed, so e.g. evaluation settings never perturb training.
 */
RunResult run_cltv(const RunInputs& in);

/// Fixed CSV header shared by every metrics file.
std::string metrics_csv_header();

/// One CSV line for a row. Deterministic: no wall-clock columns, doubles
/// printed with 17 significant digits.
std::string metrics_row_csv(const MetricsRow& row, Method method, uint64_t seed);

std::string metrics_to_csv(const std::vector<MetricsRow>& rows, Method method, uint64_t seed);

}  // namespace cltv

#endif  // CLTV_VALUATION_HPP
