#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "cltv/theory.hpp"
#include "test_support.hpp"

using namespace cltv;

namespace {

const std::vector<std::string> kCheckNames = {
    "pinsker",           "tv-l1-identity",  "value-estimation", "value-gap",
    "target-lower-bound", "perf-difference", "policy-improvement"};

double row_tv(const TabularMDP& a, const TabularMDP& b, int x, int u) {
  double l1 = 0.0;
  for (int y = 0; y < a.n_states; ++y) {
    l1 += std::abs(a.p[a.idx(x, u, y)] - b.p[b.idx(x, u, y)]);
  }
  return 0.5 * l1;
}

double row_max_change(const TabularMDP& a, const TabularMDP& b, int x, int u) {
  double worst = 0.0;
  for (int y = 0; y < a.n_states; ++y) {
    worst = std::max(worst, std::abs(a.p[a.idx(x, u, y)] - b.p[b.idx(x, u, y)]));
  }
  return worst;
}

}  // namespace

TEST_SUITE_BEGIN("theory");

TEST_CASE("total variation matches hand values and the event form") {
  CHECK(total_variation({1.0, 0.0}, {0.0, 1.0}) == 1.0);
  CHECK(total_variation({0.5, 0.5}, {0.5, 0.5}) == 0.0);
  CHECK(total_variation({0.7, 0.3}, {0.4, 0.6}) == doctest::Approx(0.3).epsilon(1e-15));

  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 2 + rng.uniform_int(6);
    std::vector<double> p = rng.simplex(n, 0.0);
    std::vector<double> q = rng.simplex(n, 0.0);
    double tv = total_variation(p, q);
    CHECK(tv >= 0.0);
    CHECK(tv <= 1.0);
    CHECK(std::abs(tv - total_variation_event_form(p, q)) <= 1e-15);
  }

  CHECK_THROWS(total_variation({0.5, 0.5}, {1.0}));
}

TEST_CASE("kl divergence handles identity, support mismatch and a near-point mass") {
  CHECK(kl_divergence({0.2, 0.8}, {0.2, 0.8}) == 0.0);
  CHECK(kl_divergence({1.0, 0.0}, {0.5, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK(std::isinf(kl_divergence({0.5, 0.5}, {1.0, 0.0})));

  // Pinsker at an extreme pair: TV is nearly 1/2 yet stays below sqrt(KL/2).
  std::vector<double> p = {1.0 - 1e-9, 1e-9};
  std::vector<double> q = {0.5, 0.5};
  double tv = total_variation(p, q);
  CHECK(tv == doctest::Approx(0.5 - 1e-9).epsilon(1e-12));
  CHECK(tv <= std::sqrt(kl_divergence(p, q) / 2.0));
  CHECK(std::sqrt(kl_divergence(p, q) / 2.0) == doctest::Approx(0.5887).epsilon(1e-3));
}

TEST_CASE("random bound-check mdps are dense, terminal-free and state-action rewarded") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    TabularMDP m = random_theory_mdp(rng, 0.9, 6, 4);
    CHECK(m.n_states >= 2);
    CHECK(m.n_states <= 6);
    CHECK(m.n_actions >= 2);
    CHECK(m.n_actions <= 4);
    for (int x = 0; x < m.n_states; ++x) {
      CHECK(m.terminal[x] == 0);
      for (int u = 0; u < m.n_actions; ++u) {
        double row_sum = 0.0;
        double r0 = m.r[m.idx(x, u, 0)];
        CHECK(r0 >= 0.0);
        CHECK(r0 <= 1.0);
        for (int y = 0; y < m.n_states; ++y) {
          CHECK(m.p[m.idx(x, u, y)] >= 0.01);
          CHECK(m.r[m.idx(x, u, y)] == r0);  // reward depends on (x, u) only
          row_sum += m.p[m.idx(x, u, y)];
        }
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("two-point perturbation moves bounded mass and equates max norm with row tv") {
  Rng rng(7);
  TabularMDP base = random_theory_mdp(rng, 0.9, 6, 4);
  TabularMDP moved = two_point_perturb(base, 0.05, 0.004, rng);

  bool any_changed = false;
  for (int x = 0; x < base.n_states; ++x) {
    for (int u = 0; u < base.n_actions; ++u) {
      double row_sum = 0.0;
      for (int y = 0; y < base.n_states; ++y) {
        double entry = moved.p[moved.idx(x, u, y)];
        CHECK(entry >= 0.004 - 1e-15);
        row_sum += entry;
      }
      CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
      double biggest = row_max_change(base, moved, x, u);
      CHECK(biggest <= 0.05 + 1e-15);
      CHECK(std::abs(biggest - row_tv(base, moved, x, u)) <= 1e-12);
      if (biggest > 0.0) any_changed = true;
    }
  }
  CHECK(any_changed);
}

TEST_CASE("every bound check passes a fresh randomized batch") {
  TheoryConfig cfg;
  cfg.trials = 50;
  cfg.seed = 12;
  std::vector<BoundReport> reports = run_all_checks(cfg);
  REQUIRE(reports.size() == kCheckNames.size());
  for (size_t i = 0; i < reports.size(); ++i) {
    CAPTURE(reports[i].bound_name);
    CHECK(reports[i].bound_name == kCheckNames[i]);
    CHECK(reports[i].n_trials == 50);
    CHECK(reports[i].violations == 0);
    CHECK(std::isfinite(reports[i].worst_gap));
  }
  CHECK(total_violations(reports) == 0);
}

TEST_CASE("the first trial of every check is a degenerate identity") {
  TheoryConfig cfg;
  cfg.trials = 1;
  cfg.seed = 3;
  for (const BoundReport& r : run_all_checks(cfg)) {
    CAPTURE(r.bound_name);
    CHECK(r.n_trials == 1);
    CHECK(r.violations == 0);
    CHECK(std::abs(r.worst_gap) <= 1e-9);
  }
}

TEST_CASE("an impossible slack flags violations in every check") {
  TheoryConfig cfg;
  cfg.trials = 10;
  cfg.seed = 4;
  cfg.slack = -1.0;
  std::vector<BoundReport> reports = run_all_checks(cfg);
  for (const BoundReport& r : reports) {
    CAPTURE(r.bound_name);
    CHECK(r.violations >= 1);
  }
  CHECK(total_violations(reports) >= static_cast<int>(reports.size()));
}

TEST_CASE("the identity check runs on far tighter slack than the inequalities") {
  TheoryConfig cfg;
  cfg.trials = 40;
  cfg.seed = 21;
  std::vector<BoundReport> reports = run_all_checks(cfg);
  CHECK(reports[1].bound_name == "tv-l1-identity");
  CHECK(reports[1].max_slack_used <= 1e-12);
  CHECK(reports[1].violations == 0);
  CHECK(reports[0].max_slack_used == cfg.slack);
}

TEST_CASE("a uniform reward shift saturates the value estimation bound") {
  Rng rng(2718);
  TabularMDP m = random_theory_mdp(rng, 0.9, 5, 3);
  for (auto& r : m.r) r *= 0.7;

  const double eps = 0.25;
  TabularMDP shifted = m;
  for (auto& r : shifted.r) r += eps;

  Policy pi = random_policy(m.n_states, m.n_actions, rng);
  std::vector<double> v = solve_q_values(m, pi).v;
  std::vector<double> v_shifted = solve_q_values(shifted, pi).v;

  double worst = 0.0;
  for (int x = 0; x < m.n_states; ++x) {
    worst = std::max(worst, std::abs(v_shifted[x] - v[x]));
  }
  // || V_hat - V ||_inf = eps / (1 - gamma) exactly, matching the bound's
  // reward term with no dynamics term.
  CHECK(std::abs(worst - eps / (1.0 - m.gamma)) <= 1e-9);
}

TEST_CASE("the report table lists every check with its trial count") {
  TheoryConfig cfg;
  cfg.trials = 5;
  cfg.seed = 8;
  std::vector<BoundReport> reports = run_all_checks(cfg);
  std::string table = report_table(reports);
  for (const BoundReport& r : reports) {
    CHECK(table.find(r.bound_name) != std::string::npos);
  }
  CHECK(table.find('5') != std::string::npos);
}

TEST_SUITE_END();
