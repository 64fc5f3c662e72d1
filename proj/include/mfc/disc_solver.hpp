#pragma once

#include <optional>
#include <vector>

#include "mfc/avg_solver.hpp"
#include "mfc/common.hpp"
#include "mfc/lift.hpp"
#include "mfc/model.hpp"

namespace mfc {

struct DiscountedSolution {
    double beta = 0.0;
    Vec values;  // optimal discounted values K
    std::vector<int> policy;
    double sup_residual = 0.0;  // sup |T_beta K - K|
    long iterations = 0;
    bool converged = false;
};

/// One application of the discounted Bellman operator.
Vec bellman_discounted(const LiftedMdp& mdp, const Vec& v, double beta);

/// Discounted fixed point to sup-norm residual tol, via anchored value
/// iteration (rate beta at worst, much faster under minorization, uniformly
/// in beta). Optional warm start from a previous relative value function.
DiscountedSolution solve_discounted(const LiftedMdp& mdp, double beta, double tol,
                                    long max_iter = 1000000, const Vec* warm_start = nullptr,
                                    int anchor = 0);

/// Relative discounted values: K - K(anchor), exactly zero at the anchor.
Vec relative_h(const DiscountedSolution& sol, int anchor);

struct VanishingDiscountTrace {
    std::vector<double> betas;
    Vec j_estimates;            // (1 - beta) K(anchor) per rung
    std::vector<Vec> h_estimates;
    Vec diameter_bounds;        // 2 K_c / (1 - 2 K_f beta) * diam, when available
    Vec rung_residuals;         // discounted sup residual per rung
    std::vector<int> policy_changes;  // states whose greedy action moved between rungs
    bool stabilized = false;
};

struct VanishingOptions {
    int k_max = 20;           // schedule beta_k = 1 - 2^-k, k = 1..k_max
    double tol = 1e-6;        // stop when successive j estimates differ by <= tol
    double solve_tol = 0.0;   // per-rung residual target; defaults to tol * 1e-2
    long max_iter = 1000000;
    bool stop_early = true;
    const AgentModel* model = nullptr;            // for diameter bounds
    std::optional<LipschitzReport> lipschitz;     // constants for the bounds
};

/// Vanishing-discount ladder with warm starts. The returned AverageSolution
/// carries the final rung's relative values and greedy policy, the gain from
/// the last scaled anchor value, and the exact undiscounted equation defect.
std::pair<AverageSolution, VanishingDiscountTrace> vanishing_discount(
    const LiftedMdp& mdp, int anchor, const VanishingOptions& opts = {});

/// Largest pairwise transport distance between lifted states.
double lifted_state_diameter(const LiftedMdp& mdp, const Mat& metric_x);

}  // namespace mfc
