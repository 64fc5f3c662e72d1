#include "mfc/disc_solver.hpp"

#include <algorithm>
#include <cmath>

#include "mfc/solver_core.hpp"

namespace mfc {

Vec bellman_discounted(const LiftedMdp& mdp, const Vec& v, double beta) {
    return core::bellman_apply(mdp, v, beta);
}

DiscountedSolution solve_discounted(const LiftedMdp& mdp, double beta, double tol, long max_iter,
                                    const Vec* warm_start, int anchor) {
    if (beta <= 0.0 || beta >= 1.0)
        throw std::invalid_argument("solve_discounted: beta must lie in (0, 1)");
    auto res = core::anchored_discounted_solve(mdp, beta, anchor, tol, max_iter, warm_start);
    DiscountedSolution out;
    out.beta = beta;
    out.values = std::move(res.values);
    out.policy = std::move(res.policy);
    out.sup_residual = res.residual;
    out.iterations = res.iterations;
    out.converged = res.converged;
    return out;
}

Vec relative_h(const DiscountedSolution& sol, int anchor) {
    Vec h = sol.values;
    const double level = h[anchor];
    for (double& x : h) x -= level;
    h[anchor] = 0.0;
    return h;
}

double lifted_state_diameter(const LiftedMdp& mdp, const Mat& metric_x) {
    double diam = 0.0;
    for (int i = 0; i < mdp.num_states(); ++i) {
        const Vec pi = mdp.states[i].probabilities();
        for (int j = i + 1; j < mdp.num_states(); ++j)
            diam = std::max(diam, wasserstein1(pi, mdp.states[j].probabilities(), metric_x));
    }
    return diam;
}

std::pair<AverageSolution, VanishingDiscountTrace> vanishing_discount(
    const LiftedMdp& mdp, int anchor, const VanishingOptions& opts) {
    VanishingDiscountTrace trace;
    const double solve_tol = opts.solve_tol > 0.0 ? opts.solve_tol : opts.tol * 1e-2;

    double diam = 0.0;
    const bool bounds = opts.lipschitz.has_value() && opts.model != nullptr;
    if (bounds) diam = lifted_state_diameter(mdp, opts.model->metric_x);

    Vec warm(mdp.num_states(), 0.0);
    std::vector<int> prev_policy;
    long total_iterations = 0;
    for (int k = 1; k <= opts.k_max; ++k) {
        const double beta = 1.0 - std::pow(2.0, -k);
        auto sol = solve_discounted(mdp, beta, solve_tol, opts.max_iter, &warm, anchor);
        total_iterations += sol.iterations;
        const Vec h = relative_h(sol, anchor);

        trace.betas.push_back(beta);
        trace.j_estimates.push_back((1.0 - beta) * sol.values[anchor]);
        trace.h_estimates.push_back(h);
        trace.rung_residuals.push_back(sol.sup_residual);
        if (bounds)
            trace.diameter_bounds.push_back(2.0 * opts.lipschitz->k_cost /
                                            (1.0 - 2.0 * opts.lipschitz->k_transition * beta) *
                                            diam);
        int changes = 0;
        if (!prev_policy.empty())
            for (std::size_t s = 0; s < sol.policy.size(); ++s)
                if (sol.policy[s] != prev_policy[s]) ++changes;
        trace.policy_changes.push_back(prev_policy.empty() ? 0 : changes);
        prev_policy = sol.policy;
        warm = h;

        const std::size_t r = trace.j_estimates.size();
        if (opts.stop_early && r >= 2 &&
            std::abs(trace.j_estimates[r - 1] - trace.j_estimates[r - 2]) <= opts.tol) {
            trace.stabilized = true;
            break;
        }
    }
    if (!opts.stop_early && !trace.j_estimates.empty()) {
        const std::size_t r = trace.j_estimates.size();
        trace.stabilized = r >= 2 && std::abs(trace.j_estimates[r - 1] -
                                              trace.j_estimates[r - 2]) <= opts.tol;
    }

    AverageSolution avg;
    avg.gain = trace.j_estimates.back();
    avg.relative_values = trace.h_estimates.back();
    avg.policy = prev_policy;
    avg.iterations = total_iterations;
    avg.converged = trace.stabilized;
    const Vec tv = core::bellman_apply(mdp, avg.relative_values, 1.0);
    double defect = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s)
        defect = std::max(defect, std::abs(avg.gain + avg.relative_values[s] - tv[s]));
    avg.residual = defect;
    return {std::move(avg), std::move(trace)};
}

}  // namespace mfc
