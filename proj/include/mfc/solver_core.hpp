#pragma once

#include <concepts>
#include <vector>

#include "mfc/common.hpp"

namespace mfc::core {

/// Minimal finite-MDP surface shared by the population lift and the simplex
/// grid: per-state action lists, stage costs, sparse successor rows.
template <typename M>
concept FiniteMdp = requires(const M& m, int s, int a) {
    { m.num_states() } -> std::convertible_to<int>;
    { m.num_actions(s) } -> std::convertible_to<int>;
    { m.stage_cost(s, a) } -> std::convertible_to<double>;
    { m.row(s, a).begin() };
    { m.row(s, a).end() };
};

/// One Bellman sweep: (Tv)(s) = min_a [ cost(s,a) + beta * sum row * v ].
/// Ties resolve to the smallest action index by strict comparison.
template <FiniteMdp M>
Vec bellman_apply(const M& mdp, const Vec& v, double beta) {
    const int S = mdp.num_states();
    Vec out(S, 0.0);
#pragma omp parallel for schedule(static)
    for (int s = 0; s < S; ++s) {
        double best = 0.0;
        bool first = true;
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            double q = mdp.stage_cost(s, a);
            for (const auto& [next, p] : mdp.row(s, a)) q += beta * p * v[next];
            if (first || q < best) {
                best = q;
                first = false;
            }
        }
        out[s] = best;
    }
    return out;
}

template <FiniteMdp M>
std::vector<int> bellman_greedy(const M& mdp, const Vec& v, double beta) {
    const int S = mdp.num_states();
    std::vector<int> policy(S, 0);
#pragma omp parallel for schedule(static)
    for (int s = 0; s < S; ++s) {
        double best = 0.0;
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            double q = mdp.stage_cost(s, a);
            for (const auto& [next, p] : mdp.row(s, a)) q += beta * p * v[next];
            if (a == 0 || q < best) {
                best = q;
                policy[s] = a;
            }
        }
    }
    return policy;
}

struct AnchoredDiscounted {
    Vec values;  // fixed point K of the discounted operator
    Vec relative;  // K - K(anchor), zero at the anchor exactly
    std::vector<int> policy;
    double residual = 0.0;  // sup |T_beta K - K|
    long iterations = 0;
    bool converged = false;
};

/// Discounted fixed point by anchored value iteration: iterate
/// w <- T_beta w - (T_beta w)(anchor), which contracts in span at least as
/// fast as plain value iteration and uniformly in beta under minorization;
/// the absolute level is recovered in closed form from the anchored fixed
/// point. The anchored residual equals the residual of the recovered values.
template <FiniteMdp M>
AnchoredDiscounted anchored_discounted_solve(const M& mdp, double beta, int anchor, double tol,
                                             long max_iter, const Vec* warm_start = nullptr) {
    const int S = mdp.num_states();
    AnchoredDiscounted result;
    Vec h = warm_start ? *warm_start : Vec(S, 0.0);
    if (warm_start) {
        const double shift = h[anchor];
        for (double& x : h) x -= shift;
    }
    Vec th;
    for (long it = 0; it < max_iter; ++it) {
        th = bellman_apply(mdp, h, beta);
        const double level = th[anchor];
        double diff = 0.0;
        for (int s = 0; s < S; ++s) {
            const double next = th[s] - level;
            diff = std::max(diff, std::abs(next - h[s]));
            h[s] = next;
        }
        result.iterations = it + 1;
        if (diff <= tol) {
            result.converged = true;
            break;
        }
    }
    th = bellman_apply(mdp, h, beta);
    const double level = th[anchor] / (1.0 - beta);
    result.values.assign(S, 0.0);
    for (int s = 0; s < S; ++s) result.values[s] = h[s] + level;
    result.relative = std::move(h);
    const Vec check = bellman_apply(mdp, result.values, beta);
    result.residual = sup_diff(check, result.values);
    result.policy = bellman_greedy(mdp, result.values, beta);
    return result;
}

struct RviResult {
    Vec relative;  // anchored fixed point h, zero at the anchor
    double gain = 0.0;
    std::vector<int> policy;
    double residual = 0.0;  // sup-norm optimality-equation defect of (gain, h)
    long iterations = 0;
    bool converged = false;
    double contraction_estimate = 0.0;
    Vec span_history;  // span of successive iterate differences
};

/// Relative value iteration from v = 0: iterate the anchored average-cost
/// operator until the sup-norm step is below tol. The gain is read off at
/// the anchor and the final defect is recomputed exactly.
template <FiniteMdp M>
RviResult rvi_solve(const M& mdp, int anchor, double tol, long max_iter) {
    const int S = mdp.num_states();
    RviResult result;
    Vec v(S, 0.0);
    Vec tv;
    for (long it = 0; it < max_iter; ++it) {
        tv = bellman_apply(mdp, v, 1.0);
        const double level = tv[anchor];
        double diff = 0.0;
        Vec delta(S, 0.0);
        for (int s = 0; s < S; ++s) {
            const double next = tv[s] - level;
            delta[s] = next - v[s];
            diff = std::max(diff, std::abs(delta[s]));
            v[s] = next;
        }
        result.span_history.push_back(span(delta));
        result.iterations = it + 1;
        if (diff <= tol) {
            result.converged = true;
            break;
        }
    }
    tv = bellman_apply(mdp, v, 1.0);
    result.gain = tv[anchor];
    double defect = 0.0;
    for (int s = 0; s < S; ++s) defect = std::max(defect, std::abs(result.gain + v[s] - tv[s]));
    result.residual = defect;
    result.policy = bellman_greedy(mdp, v, 1.0);
    result.relative = std::move(v);
    for (std::size_t k = 1; k + 1 < result.span_history.size(); ++k) {
        if (result.span_history[k] > 1e-300)
            result.contraction_estimate = std::max(
                result.contraction_estimate, result.span_history[k + 1] / result.span_history[k]);
    }
    return result;
}

}  // namespace mfc::core
