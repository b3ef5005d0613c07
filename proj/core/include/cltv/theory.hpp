#ifndef CLTV_THEORY_HPP
#define CLTV_THEORY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cltv/mdp.hpp"
#include "cltv/rng.hpp"

namespace cltv {

/// Outcome of one bound check over a batch of randomized trials. worst_gap
/// is the smallest RHS - LHS seen; a violation is a trial with
/// LHS > RHS + slack.
struct BoundReport {
  std::string bound_name;
  int n_trials = 0;
  int violations = 0;
  double max_slack_used = 0.0;
  double worst_gap = 0.0;
};

struct TheoryConfig {
  int trials = 200;
  uint64_t seed = 1;
  double slack = 1e-9;
  std::vector<double> gammas = {0.5, 0.9, 0.99};  // cycled across trials
  int max_states = 6;
  int max_actions = 4;
};

/// Half the L1 distance, equivalently the largest gap in probability any
/// event can have between the two distributions.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

/// The event form sum_y max(p_y - q_y, 0); equals total_variation exactly
/// and is computed independently as a cross-check.
double total_variation_event_form(const std::vector<double>& p, const std::vector<double>& q);

/// KL(p || q) with 0 log 0 = 0; +infinity when p has mass where q has none.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

/**
 * Densely connected random MDP for the bound checks: no terminal states,
 * rewards depend on (x, u) only and lie in [0, 1], every transition row has
 * mass at least min_row_mass on every successor so row KLs stay finite.
 */
TabularMDP random_theory_mdp(Rng& rng, double gamma, int max_states, int max_actions,
                             double min_row_mass = 0.01);

/**
 * Moves a random amount of mass (at most max_delta) between two entries of
 * every transition row, never dropping an entry below mass_floor. Each row's
 * largest entrywise change equals the mass moved in it, so the entrywise
 * max-norm and the per-row total variation of the perturbation coincide.
 */
TabularMDP two_point_perturb(const TabularMDP& mdp, double max_delta, double mass_floor,
                             Rng& rng);

/// Random full-support policy with logits drawn from a standard normal.
Policy random_policy(int n_states, int n_actions, Rng& rng);

// Each check runs cfg.trials randomized trials (trial 0 is the degenerate
// identity case where both sides coincide), cycling gamma through
// cfg.gammas where dynamics matter.

/// D_TV(P, Q) <= sqrt(KL(P || Q) / 2) on random distribution pairs.
BoundReport check_pinsker(const TheoryConfig& cfg);

/// D_TV(P, Q) == 0.5 * ||P - Q||_1 via two independent computations.
BoundReport check_tv_l1(const TheoryConfig& cfg);

/// Model-estimation value bound: for a policy pi and a perturbed model
/// (r_hat, p_hat),
///   ||V - V_hat||_inf <= (1/(1-g)) * (||r - r_hat||_inf
///                                     + (g/(1-g)) * ||p - p_hat||_inf)
/// with both values solved exactly and entrywise max norms.
BoundReport check_value_estimation_bound(const TheoryConfig& cfg);

/// Dynamics-gap value bound: for shared rewards and two dynamics,
///   ||V_S - V_T||_inf <= (g/(1-g)^2) * sqrt(max_row KL(p_S || p_T) / 2).
BoundReport check_value_gap_bound(const TheoryConfig& cfg);

/// Target-domain lower bound: with eps = sqrt(max_row KL / 2) (the smallest
/// eps the premise admits),
///   E_d[V_T] >= E_d[V_S] - g * eps / (1-g)^2,
/// also re-checked with eps doubled (looser, must still hold).
BoundReport check_target_lower_bound(const TheoryConfig& cfg);

/// Advantage-vs-TV policy improvement bound:
///   E_{d_b, pi_b}[A^{pi_i}] - (2/(1-g)) E_{d_b}[TV(pi_b, pi_next)]
///     <= (1-g) (V^{pi_next} - V^{pi_i})
/// with exact occupancies and values; the pi_next = pi_b case must reduce
/// to the performance-difference identity within 1e-9.
BoundReport check_perf_difference(const TheoryConfig& cfg);

/// KL form of the improvement bound:
///   (1-g)(V^{pi_next} - V^{pi_i})
///     >= E[A^{pi_i}] - (sqrt(2)/(1-g)) E_{d_b}[sqrt(KL(pi_b || pi_next))],
/// plus the per-trial dominance check that the KL penalty term is never
/// smaller than the TV penalty term it relaxes.
BoundReport check_policy_improvement_bound(const TheoryConfig& cfg);

/// All seven checks in a fixed order.
std::vector<BoundReport> run_all_checks(const TheoryConfig& cfg);

int total_violations(const std::vector<BoundReport>& reports);

/// Fixed-width text table, one row per report.
std::string report_table(const std::vector<BoundReport>& reports);

}  // namespace cltv

#endif  // CLTV_THEORY_HPP
