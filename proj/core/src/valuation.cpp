#include "cltv/valuation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cltv/format.hpp"
#include "cltv/rng.hpp"

namespace cltv {

namespace {

double ms_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

std::string reward_variant_to_string(RewardVariant v) {
  switch (v) {
    case RewardVariant::cltv: return "cltv";
    case RewardVariant::td: return "td";
    case RewardVariant::rs: return "rs";
  }
  throw std::logic_error("unknown reward variant");
}

RewardVariant reward_variant_from_string(const std::string& s) {
  if (s == "cltv") return RewardVariant::cltv;
  if (s == "td") return RewardVariant::td;
  if (s == "rs") return RewardVariant::rs;
  throw std::runtime_error("unknown reward variant '" + s + "' (expected cltv, td or rs)");
}

std::string method_to_string(Method m) {
  switch (m) {
    case Method::vanilla: return "vanilla";
    case Method::cltv: return "cltv";
    case Method::cltv_td: return "cltv-td";
    case Method::cltv_rs: return "cltv-rs";
    case Method::ts_only: return "ts-only";
  }
  throw std::logic_error("unknown method");
}

Method method_from_string(const std::string& s) {
  if (s == "vanilla") return Method::vanilla;
  if (s == "cltv") return Method::cltv;
  if (s == "cltv-td") return Method::cltv_td;
  if (s == "cltv-rs") return Method::cltv_rs;
  if (s == "ts-only") return Method::ts_only;
  throw std::runtime_error("unknown method '" + s +
                           "' (expected vanilla, cltv, cltv-td, cltv-rs or ts-only)");
}

Dataset modify_rewards(const ScoredDataset& scored, double lambda) {
  if (lambda < 0.0 || lambda > 1.0)
    throw std::runtime_error("modify_rewards: lambda must lie in [0, 1]");
  if (scored.scores.size() != scored.dataset.transitions.size())
    throw std::runtime_error("modify_rewards: scores misaligned with transitions (" +
                             std::to_string(scored.scores.size()) + " scores for " +
                             std::to_string(scored.dataset.transitions.size()) +
                             " transitions)");
  Dataset out = scored.dataset;
  for (size_t j = 0; j < out.transitions.size(); ++j) {
    double w = scored.scores[j];
    if (!std::isfinite(w))
      throw std::runtime_error("modify_rewards: non-finite score at transition " +
                               std::to_string(j));
    out.transitions[j].reward = (1.0 - lambda) * out.transitions[j].reward + lambda * w;
  }
  return out;
}

namespace {

void check_value_table(const Dataset& ds, const std::vector<double>& v, const char* who) {
  if (static_cast<int>(v.size()) != ds.n_states)
    throw std::runtime_error(std::string(who) + ": value table has " +
                             std::to_string(v.size()) + " entries for " +
                             std::to_string(ds.n_states) + " states");
}

}  // namespace

Dataset reward_variant_td(const Dataset& ds, const std::vector<double>& v, double alpha,
                          double gamma) {
  check_value_table(ds, v, "reward_variant_td");
  Dataset out = ds;
  for (auto& t : out.transitions)
    t.reward = v[t.state] + alpha * (t.reward + gamma * v[t.next_state] - v[t.state]);
  return out;
}

Dataset reward_variant_rs(const Dataset& ds, const std::vector<double>& v, double gamma) {
  check_value_table(ds, v, "reward_variant_rs");
  Dataset out = ds;
  for (auto& t : out.transitions) t.reward = gamma * v[t.next_state] - v[t.state];
  return out;
}

TrajectoryValue value_trajectory(const Dataset& ds, const TrajectorySpan& span,
                                 const Policy& pi_target, const Policy& pi_source,
                                 double gamma) {
  if (span.begin >= span.end)
    throw std::runtime_error("value_trajectory: empty trajectory " +
                             std::to_string(span.traj_id));
  double kl_sum = 0.0;
  double ret = 0.0;
  double discount = 1.0;
  for (size_t j = span.begin; j < span.end; ++j) {
    const Transition& t = ds.transitions[j];
    kl_sum += policy_kl(pi_target, pi_source, t.state);
    ret += discount * t.reward;
    discount *= gamma;
  }
  TrajectoryValue out;
  out.traj_id = span.traj_id;
  double mean_kl = kl_sum / static_cast<double>(span.end - span.begin);
  out.similarity = std::exp(-mean_kl);
  out.ret = ret;
  out.value = out.similarity * out.ret;
  return out;
}

std::vector<int> select_top_m(const std::vector<TrajectoryValue>& values, double m_ratio) {
  if (values.empty()) throw std::runtime_error("select_top_m: no trajectories to rank");
  if (m_ratio <= 0.0 || m_ratio > 1.0)
    throw std::runtime_error("select_top_m: m_ratio must lie in (0, 1]");
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (values[a].value != values[b].value) return values[a].value > values[b].value;
    return values[a].traj_id < values[b].traj_id;
  });
  auto k = static_cast<size_t>(
      std::ceil(m_ratio * static_cast<double>(values.size())));
  k = std::min(std::max<size_t>(k, 1), values.size());
  std::vector<int> ids(k);
  for (size_t i = 0; i < k; ++i) ids[i] = values[order[i]].traj_id;
  return ids;
}

namespace {

struct EvalContext {
  const TabularMDP* env;
  EvalSettings settings;
  ReferenceScores refs;
  double temperature;
  uint64_t seed;
};

MetricsRow eval_row(const EvalContext& ctx, const AcPair& ac, int epoch, long step,
                    int n_selected, double mean_selected_value) {
  MetricsRow row;
  row.epoch = epoch;
  row.step = step;
  Policy actor = ac.actor(ctx.temperature);
  uint64_t eval_seed = derive_seed(
      ctx.seed, "eval-e" + std::to_string(epoch) + "-s" + std::to_string(step));
  EvalResult er = evaluate_return(*ctx.env, actor, ctx.settings.n_episodes,
                                  ctx.settings.horizon, eval_seed);
  row.mean_eval_return = er.mean;
  row.std_eval_return = er.stddev;
  row.normalized_score = normalized_score(er.mean, ctx.refs);
  row.n_selected = n_selected;
  row.mean_selected_value = mean_selected_value;
  return row;
}

void check_inputs(const RunInputs& in) {
  if (in.source == nullptr || in.target == nullptr || in.eval_env == nullptr)
    throw std::runtime_error("run_cltv: source, target and eval_env are all required");
  if (in.source->transitions.empty()) throw std::runtime_error("run_cltv: empty source dataset");
  if (in.target->transitions.empty()) throw std::runtime_error("run_cltv: empty target dataset");
  if (in.source->n_states != in.target->n_states ||
      in.source->n_actions != in.target->n_actions)
    throw std::runtime_error("run_cltv: source and target datasets disagree on dimensions");
  if (in.source->n_states != in.eval_env->n_states ||
      in.source->n_actions != in.eval_env->n_actions)
    throw std::runtime_error("run_cltv: datasets and evaluation environment disagree on dimensions");
  if (in.cltv_cfg.lambda < 0.0 || in.cltv_cfg.lambda > 1.0)
    throw std::runtime_error("run_cltv: lambda must lie in [0, 1]");
  if (in.cltv_cfg.m_ratio <= 0.0 || in.cltv_cfg.m_ratio > 1.0)
    throw std::runtime_error("run_cltv: m_ratio must lie in (0, 1]");
  if (in.cltv_cfg.epochs < 0) throw std::runtime_error("run_cltv: epochs must be >= 0");
  if (in.cltv_cfg.steps_per_epoch < 0)
    throw std::runtime_error("run_cltv: steps_per_epoch must be >= 0");
  if (in.cltv_cfg.gamma <= 0.0 || in.cltv_cfg.gamma >= 1.0)
    throw std::runtime_error("run_cltv: gamma must lie in (0, 1)");
  if (in.eval.n_episodes <= 0 || in.eval.horizon <= 0)
    throw std::runtime_error("run_cltv: evaluation needs positive n_episodes and horizon");
  bool needs_v = in.method == Method::cltv_td || in.method == Method::cltv_rs;
  if (needs_v && static_cast<int>(in.target_v.size()) != in.source->n_states)
    throw std::runtime_error("run_cltv: td / rs variants need a target_v entry per state");
}

}  // namespace

RunResult run_cltv(const RunInputs& in) {
  check_inputs(in);
  const Dataset& src = *in.source;
  const Dataset& tgt = *in.target;
  const int n_states = src.n_states;
  const int n_actions = src.n_actions;
  const double gamma = in.cltv_cfg.gamma;
  const bool curriculum = in.method == Method::cltv || in.method == Method::cltv_td ||
                          in.method == Method::cltv_rs;

  RunResult out;
  EvalContext ctx{in.eval_env, in.eval, reference_scores(*in.eval_env, in.eval.horizon),
                  in.cql_cfg.temperature, in.seed};

  // Phase 1: reward preparation.
  Dataset working_source = src;
  if (in.method == Method::cltv || in.method == Method::ts_only) {
    auto t0 = std::chrono::steady_clock::now();
    ClassifierPair pair = init_classifier_pair(n_states, n_actions, in.classifier_cfg,
                                               derive_seed(in.seed, "classifier-init"));
    train_classifiers(pair, src, tgt, in.classifier_cfg,
                      derive_seed(in.seed, "classifier-train"));
    out.timings.classifier_ms = ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    ScorerState scorer =
        init_scorer(n_states, n_actions, in.scorer_cfg, derive_seed(in.seed, "ts-init"));
    train_ts(scorer, pair, src, in.scorer_cfg.updates, derive_seed(in.seed, "ts-train"));
    out.timings.ts_ms = ms_since(t0);

    working_source = modify_rewards(score_dataset(scorer, src), in.cltv_cfg.lambda);
    out.classifiers = std::move(pair);
    out.scorer = std::move(scorer);
  } else if (in.method == Method::cltv_td) {
    working_source = reward_variant_td(src, in.target_v, in.cltv_cfg.td_alpha, gamma);
  } else if (in.method == Method::cltv_rs) {
    working_source = reward_variant_rs(src, in.target_v, gamma);
  }

  // Phase 2: frozen target-domain pair, trained on the target data alone.
  Policy pi_target = Policy::uniform(n_states, n_actions);
  if (curriculum) {
    auto t0 = std::chrono::steady_clock::now();
    AcPair target_ac = init_ac(n_states, n_actions);
    Rng tac_rng(derive_seed(in.seed, "target-ac"));
    for (int s = 0; s < in.target_ac_steps; ++s)
      cql_update(target_ac, in.cql_cfg, tgt.transitions, in.eval_env->terminal, gamma,
                 tac_rng);
    pi_target = target_ac.actor(in.cql_cfg.temperature);
    out.target_ac = std::move(target_ac);
    out.timings.target_ac_ms = ms_since(t0);
  }

  // Phase 3: the curriculum loop (or the plain pooled loop for vanilla and
  // ts-only, which differ only in skipping the selection step).
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<TrajectorySpan> spans = trajectory_spans(working_source);
  out.ac = init_ac(n_states, n_actions);
  Rng base_rng(derive_seed(in.seed, "base-train"));

  auto emit = [&](const MetricsRow& row) {
    out.metrics.push_back(row);
    if (in.on_row) in.on_row(row);
  };

  long global_step = 0;
  for (int epoch = 1; epoch <= in.cltv_cfg.epochs; ++epoch) {
    std::vector<int> pool_ids(spans.size());
    std::iota(pool_ids.begin(), pool_ids.end(), 0);
    int n_selected = 0;
    double mean_selected_value = 0.0;
    if (curriculum) {
      Policy pi_source = out.ac.actor(in.cql_cfg.temperature);
      std::vector<TrajectoryValue> values;
      values.reserve(spans.size());
      for (const auto& span : spans)
        values.push_back(value_trajectory(working_source, span, pi_target, pi_source, gamma));
      pool_ids = select_top_m(values, in.cltv_cfg.m_ratio);
      n_selected = static_cast<int>(pool_ids.size());
      for (int id : pool_ids) mean_selected_value += values[id].value;
      mean_selected_value /= static_cast<double>(pool_ids.size());
      // The pool is materialized in ascending trajectory order so that a
      // full selection reproduces the vanilla pool byte for byte.
      std::sort(pool_ids.begin(), pool_ids.end());
    }

    std::vector<Transition> pool;
    for (int id : pool_ids)
      pool.insert(pool.end(), working_source.transitions.begin() + spans[id].begin,
                  working_source.transitions.begin() + spans[id].end);
    pool.insert(pool.end(), tgt.transitions.begin(), tgt.transitions.end());

    for (int s = 1; s <= in.cltv_cfg.steps_per_epoch; ++s) {
      cql_update(out.ac, in.cql_cfg, pool, in.eval_env->terminal, gamma, base_rng);
      ++global_step;
      if (global_step % 100 == 0 && s < in.cltv_cfg.steps_per_epoch)
        emit(eval_row(ctx, out.ac, epoch, global_step, n_selected, mean_selected_value));
    }
    emit(eval_row(ctx, out.ac, epoch, global_step, n_selected, mean_selected_value));
  }
  out.timings.curriculum_ms = ms_since(t0);

  if (!out.metrics.empty()) {
    out.final_normalized_score = out.metrics.back().normalized_score;
  } else {
    MetricsRow row = eval_row(ctx, out.ac, 0, 0, 0, 0.0);
    out.final_normalized_score = row.normalized_score;
  }
  return out;
}

std::string metrics_csv_header() {
  return "method,seed,epoch,step,mean_eval_return,std_eval_return,normalized_score,"
         "n_selected,mean_selected_value\n";
}

std::string metrics_row_csv(const MetricsRow& row, Method method, uint64_t seed) {
  std::string line = method_to_string(method) + "," + std::to_string(seed) + ",";
  line += std::to_string(row.epoch) + "," + std::to_string(row.step) + ",";
  line += format_double(row.mean_eval_return) + "," + format_double(row.std_eval_return) + ",";
  line += format_double(row.normalized_score) + ",";
  line += std::to_string(row.n_selected) + "," + format_double(row.mean_selected_value) + "\n";
  return line;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows, Method method, uint64_t seed) {
  std::string csv = metrics_csv_header();
  for (const auto& row : rows) csv += metrics_row_csv(row, method, seed);
  return csv;
}

}  // namespace cltv
