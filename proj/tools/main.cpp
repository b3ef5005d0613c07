// Command line front end: dataset generation, experiment runs, delta/lambda
// sweeps, bound verification and checkpoint re-evaluation.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure,
// 3 bound violation from verify-theory.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cltv/config.hpp"
#include "cltv/dataset_io.hpp"
#include "cltv/experiment.hpp"
#include "cltv/format.hpp"
#include "cltv/mdp.hpp"
#include "cltv/offline_rl.hpp"
#include "cltv/rng.hpp"
#include "cltv/theory.hpp"
#include "cltv/valuation.hpp"

namespace fs = std::filesystem;
using namespace cltv;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitTheoryViolation = 3;

void require_out_dir(const std::string& out_dir) {
  if (!fs::is_directory(out_dir))
    throw ConfigError("output directory does not exist: " + out_dir);
}

int cmd_gen_data(const std::string& config_path, const std::vector<uint64_t>& seeds,
                 const std::string& out_dir) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  uint64_t seed = seeds.empty() ? cfg.seed : seeds.front();
  write_experiment_data(cfg, seed, out_dir);
  std::printf("wrote source.jsonl, target.jsonl, mixed.jsonl and manifest.txt to %s\n",
              out_dir.c_str());
  return kExitOk;
}

int cmd_run(const std::string& config_path, std::vector<uint64_t> seeds,
            const std::string& method_name, const std::string& out_dir,
            const std::string& data_dir) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  Method method = method_from_string(method_name);
  if (seeds.empty()) seeds.push_back(cfg.seed);
  require_out_dir(out_dir);

  Dataset preloaded;
  const Dataset* preloaded_ptr = nullptr;
  if (!data_dir.empty()) {
    preloaded = load_dataset((fs::path(data_dir) / "mixed.jsonl").string());
    preloaded_ptr = &preloaded;
  }

  std::vector<double> scores;
  for (uint64_t seed : seeds) {
    std::string run_dir = out_dir;
    if (seeds.size() > 1) {
      run_dir = (fs::path(out_dir) / ("seed-" + std::to_string(seed))).string();
      fs::create_directory(run_dir);
    }
    RunOutcome outcome = run_experiment(cfg, method, seed, run_dir, preloaded_ptr);
    scores.push_back(outcome.final_normalized_score);
    std::printf("seed %llu: normalized score %s (metrics: %s)\n",
                static_cast<unsigned long long>(seed),
                format_double(outcome.final_normalized_score).c_str(),
                outcome.metrics_path.c_str());
  }

  Aggregate agg = aggregate(scores);
  std::string agg_csv = "method,n_seeds,mean_normalized_score,std_normalized_score\n";
  agg_csv += method_to_string(method) + "," + std::to_string(agg.n) + "," +
             format_double(agg.mean) + "," + format_double(agg.stddev) + "\n";
  {
    std::string path = (fs::path(out_dir) / "aggregate.csv").string();
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) throw std::runtime_error("cannot open " + path + " for writing");
    std::fwrite(agg_csv.data(), 1, agg_csv.size(), f);
    std::fclose(f);
  }
  std::printf("%s: mean normalized score %s +- %s over %d seed(s)\n",
              method_to_string(method).c_str(), format_double(agg.mean).c_str(),
              format_double(agg.stddev).c_str(), agg.n);
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, int jobs) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  std::vector<SweepCell> cells = run_sweep(cfg, out_dir, jobs);
  int failed = 0;
  for (const auto& c : cells)
    if (!(c.normalized_score == c.normalized_score)) ++failed;
  std::printf("sweep finished: %zu cells (%d failed), matrix in %s/sweep.csv\n", cells.size(),
              failed, out_dir.c_str());
  return kExitOk;
}

int cmd_verify_theory(int trials, uint64_t seed, double slack) {
  if (trials < 0) throw ConfigError("--trials must be >= 0");
  TheoryConfig cfg;
  cfg.trials = trials;
  cfg.seed = seed;
  cfg.slack = slack;
  std::vector<BoundReport> reports = run_all_checks(cfg);
  std::fputs(report_table(reports).c_str(), stdout);
  if (trials == 0) {
    std::puts("warning: 0 trials requested, every check passed vacuously");
    return kExitOk;
  }
  int violations = total_violations(reports);
  if (violations > 0) {
    std::printf("%d violation(s) detected\n", violations);
    return kExitTheoryViolation;
  }
  std::puts("all bounds hold");
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path,
             const std::vector<uint64_t>& seeds) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  LoadedAc loaded = load_ac(checkpoint_path);

  TabularMDP env = make_env(cfg.env, cfg.gamma);
  if (loaded.env_fingerprint != env.fingerprint())
    throw ConfigError("checkpoint was trained on environment " +
                      hex_u64(loaded.env_fingerprint) + " but the config describes " +
                      hex_u64(env.fingerprint()));
  std::string hash = config_hash_hex(cfg);
  if (loaded.config_hash != hash)
    throw ConfigError("checkpoint config hash " + loaded.config_hash +
                      " does not match this config (" + hash + ")");

  uint64_t seed = seeds.empty() ? cfg.seed : seeds.front();
  Policy actor = loaded.ac.actor(cfg.cql.temperature);
  EvalResult er = evaluate_return(env, actor, cfg.eval.n_episodes, cfg.eval.horizon,
                                  derive_seed(seed, "eval-cli"));
  ReferenceScores refs = reference_scores(env, cfg.eval.horizon);
  std::printf("mean_return = %s\nstd_return = %s\nnormalized_score = %s\n",
              format_double(er.mean).c_str(), format_double(er.stddev).c_str(),
              format_double(normalized_score(er.mean, refs)).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline RL curriculum pipeline: transition scoring, trajectory "
               "valuation and bound verification on exactly solvable MDPs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string data_dir;
  std::string checkpoint_path;
  std::string method_name = "cltv";
  std::vector<uint64_t> seeds;
  int trials = 200;
  uint64_t theory_seed = 1;
  double slack = 1e-9;
  int jobs = 1;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate the source/target/mixed datasets");
  gen->add_option("--config", config_path, "Experiment config file")->required();
  gen->add_option("--seed", seeds, "Seed override (default: config seed)");
  gen->add_option("--out", out_dir, "Existing output directory")->required();

  CLI::App* run = app.add_subcommand("run", "Run one method end to end");
  run->add_option("--config", config_path, "Experiment config file")->required();
  run->add_option("--seed", seeds, "Seed(s); several values run one trial each");
  run->add_option("--method", method_name, "vanilla, cltv, cltv-td, cltv-rs or ts-only")
      ->check(CLI::IsMember({"vanilla", "cltv", "cltv-td", "cltv-rs", "ts-only"}));
  run->add_option("--out", out_dir, "Existing output directory")->required();
  run->add_option("--data", data_dir, "Directory with a pregenerated mixed.jsonl");

  CLI::App* sweep = app.add_subcommand("sweep", "Grid over ts.delta and cltv.lambda");
  sweep->add_option("--config", config_path, "Experiment config file")->required();
  sweep->add_option("--out", out_dir, "Existing output directory")->required();
  sweep->add_option("--jobs", jobs, "Parallel cell workers")->check(CLI::PositiveNumber);

  CLI::App* verify = app.add_subcommand("verify-theory", "Check every bound numerically");
  verify->add_option("--trials", trials, "Randomized trials per bound");
  verify->add_option("--seed", theory_seed, "Trial stream seed");
  verify->add_option("--slack", slack, "Violation tolerance (negative to force failures)");

  CLI::App* eval = app.add_subcommand("eval", "Re-evaluate a saved policy checkpoint");
  eval->add_option("--config", config_path, "Experiment config file")->required();
  eval->add_option("--checkpoint", checkpoint_path, "policy.json from a run")->required();
  eval->add_option("--seed", seeds, "Evaluation seed (default: config seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, seeds, out_dir);
    if (run->parsed()) return cmd_run(config_path, seeds, method_name, out_dir, data_dir);
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir, jobs);
    if (verify->parsed()) return cmd_verify_theory(trials, theory_seed, slack);
    if (eval->parsed()) return cmd_eval(config_path, checkpoint_path, seeds);
    std::fputs("no subcommand selected\n", stderr);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
