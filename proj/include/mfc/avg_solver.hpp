#pragma once

#include <cstdint>
#include <vector>

#include "mfc/chain.hpp"
#include "mfc/common.hpp"
#include "mfc/lift.hpp"

namespace mfc {

/// Solution of the average-cost optimality equation on a lifted MDP:
///   gain + h(s) = min_a [ cost(s,a) + sum_s' row(s,a)(s') h(s') ],
/// with h anchored to zero at a reference state.
struct AverageSolution {
    double gain = 0.0;
    Vec relative_values;
    std::vector<int> policy;
    double residual = 0.0;  // sup-norm defect of (gain, h) in the equation above
    long iterations = 0;
    double contraction_estimate = 0.0;  // largest measured ratio of successive spans
    bool converged = false;
    Vec span_history;
};

/// One application of the average-cost Bellman operator (ties to the smallest
/// action index).
Vec bellman_T(const LiftedMdp& mdp, const Vec& v);

/// Anchored operator: bellman_T followed by subtraction of the anchor value.
Vec relative_T0(const LiftedMdp& mdp, const Vec& v, int anchor);

/// Greedy action indices for the average-cost operator at v.
std::vector<int> greedy_policy(const LiftedMdp& mdp, const Vec& v);

/// Relative value iteration from v = 0 until the sup-norm step is below tol.
/// Convergence is guaranteed under a minorization certificate; without one
/// the non-convergence report carries the span history.
AverageSolution solve_rvi(const LiftedMdp& mdp, int anchor, double tol, long max_iter = 100000);

struct OracleSolution {
    double gain = 0.0;          // worst-start average of the selected policy
    std::vector<int> policy;
    Vec per_start;              // exact average cost from every start
    Vec bias;                   // relative values of the selected policy
    bool start_dependent = false;
    std::uint64_t policies_evaluated = 0;
};

/// Exhaustive search over stationary deterministic policies, each evaluated
/// exactly by chain analysis. Selection minimizes the worst-start average;
/// exact ties fall back to the lexicographically smaller per-start gain
/// vector, then the smaller bias vector, then the enumeration index, so the
/// result is deterministic and prefers policies with less transient excess
/// cost.
OracleSolution solve_oracle(const LiftedMdp& mdp, const Budgets& budgets = {});

/// Exact per-start average cost of a stationary deterministic policy.
Vec evaluate_policy_average(const LiftedMdp& mdp, const std::vector<int>& policy);

/// Same for a randomized policy: rows[s] is a distribution over the action
/// list of state s.
Vec evaluate_policy_average(const LiftedMdp& mdp, const Mat& rows);

/// Dense transition matrix and stage costs induced by a randomized policy.
std::pair<Mat, Vec> induced_chain(const LiftedMdp& mdp, const Mat& rows);

}  // namespace mfc
