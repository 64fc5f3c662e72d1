#include "mfc/avg_solver.hpp"

#include <algorithm>

#include "mfc/solver_core.hpp"

namespace mfc {

Vec bellman_T(const LiftedMdp& mdp, const Vec& v) { return core::bellman_apply(mdp, v, 1.0); }

Vec relative_T0(const LiftedMdp& mdp, const Vec& v, int anchor) {
    Vec tv = core::bellman_apply(mdp, v, 1.0);
    const double level = tv[anchor];
    for (double& x : tv) x -= level;
    return tv;
}

std::vector<int> greedy_policy(const LiftedMdp& mdp, const Vec& v) {
    return core::bellman_greedy(mdp, v, 1.0);
}

AverageSolution solve_rvi(const LiftedMdp& mdp, int anchor, double tol, long max_iter) {
    auto res = core::rvi_solve(mdp, anchor, tol, max_iter);
    AverageSolution out;
    out.gain = res.gain;
    out.relative_values = std::move(res.relative);
    out.policy = std::move(res.policy);
    out.residual = res.residual;
    out.iterations = res.iterations;
    out.contraction_estimate = res.contraction_estimate;
    out.converged = res.converged;
    out.span_history = std::move(res.span_history);
    return out;
}

std::pair<Mat, Vec> induced_chain(const LiftedMdp& mdp, const Mat& rows) {
    const int S = mdp.num_states();
    Mat P(S, Vec(S, 0.0));
    Vec c(S, 0.0);
    for (int s = 0; s < S; ++s) {
        if (static_cast<int>(rows[s].size()) != mdp.num_actions(s))
            throw std::invalid_argument("induced_chain: policy row does not match the action list");
        double total = 0.0;
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            const double w = rows[s][a];
            if (w < 0.0) throw std::invalid_argument("induced_chain: negative policy weight");
            total += w;
            if (w == 0.0) continue;
            c[s] += w * mdp.stage_cost(s, a);
            for (const auto& [next, p] : mdp.row(s, a)) P[s][next] += w * p;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("induced_chain: policy row does not sum to one");
    }
    return {std::move(P), std::move(c)};
}

namespace {

std::pair<Mat, Vec> induced_chain_deterministic(const LiftedMdp& mdp,
                                                const std::vector<int>& policy) {
    const int S = mdp.num_states();
    Mat P(S, Vec(S, 0.0));
    Vec c(S, 0.0);
    for (int s = 0; s < S; ++s) {
        const int a = policy[s];
        c[s] = mdp.stage_cost(s, a);
        for (const auto& [next, p] : mdp.row(s, a)) P[s][next] += p;
    }
    return {std::move(P), std::move(c)};
}

}  // namespace

Vec evaluate_policy_average(const LiftedMdp& mdp, const std::vector<int>& policy) {
    auto [P, c] = induced_chain_deterministic(mdp, policy);
    return analyze_chain(P, c).gains;
}

Vec evaluate_policy_average(const LiftedMdp& mdp, const Mat& rows) {
    auto [P, c] = induced_chain(mdp, rows);
    return analyze_chain(P, c).gains;
}

namespace {

struct OracleCandidate {
    double worst = 0.0;
    Vec gains;
    Vec bias;
    std::uint64_t index = 0;
    std::vector<int> policy;
    bool valid = false;
};

constexpr double kTieTol = 1e-12;

// Strict "a precedes b" in the oracle's selection order.
bool oracle_better(const OracleCandidate& a, const OracleCandidate& b) {
    if (!b.valid) return a.valid;
    if (!a.valid) return false;
    if (a.worst < b.worst - kTieTol) return true;
    if (a.worst > b.worst + kTieTol) return false;
    for (std::size_t i = 0; i < a.gains.size(); ++i) {
        if (a.gains[i] < b.gains[i] - kTieTol) return true;
        if (a.gains[i] > b.gains[i] + kTieTol) return false;
    }
    for (std::size_t i = 0; i < a.bias.size(); ++i) {
        if (a.bias[i] < b.bias[i] - kTieTol) return true;
        if (a.bias[i] > b.bias[i] + kTieTol) return false;
    }
    return a.index < b.index;
}

}  // namespace

OracleSolution solve_oracle(const LiftedMdp& mdp, const Budgets& budgets) {
    const std::uint64_t total = mdp.total_policies();
    if (total > budgets.max_oracle_policies)
        throw CapacityError("oracle policy enumeration exceeds the budget", total);
    const int S = mdp.num_states();

    OracleCandidate best;
#pragma omp parallel
    {
        OracleCandidate local;
        std::vector<int> policy(S);
#pragma omp for schedule(static)
        for (long long idx = 0; idx < static_cast<long long>(total); ++idx) {
            std::uint64_t rem = static_cast<std::uint64_t>(idx);
            for (int s = S - 1; s >= 0; --s) {
                const std::uint64_t a = static_cast<std::uint64_t>(mdp.num_actions(s));
                policy[s] = static_cast<int>(rem % a);
                rem /= a;
            }
            auto [P, c] = induced_chain_deterministic(mdp, policy);
            auto analysis = analyze_chain(P, c);
            OracleCandidate cand;
            cand.worst = *std::max_element(analysis.gains.begin(), analysis.gains.end());
            cand.gains = std::move(analysis.gains);
            cand.bias = std::move(analysis.bias);
            cand.index = static_cast<std::uint64_t>(idx);
            cand.policy = policy;
            cand.valid = true;
            if (oracle_better(cand, local)) local = std::move(cand);
        }
#pragma omp critical
        {
            if (oracle_better(local, best)) best = std::move(local);
        }
    }

    OracleSolution out;
    out.gain = best.worst;
    out.policy = std::move(best.policy);
    out.per_start = std::move(best.gains);
    out.bias = std::move(best.bias);
    out.policies_evaluated = total;
    const auto [lo, hi] = std::minmax_element(out.per_start.begin(), out.per_start.end());
    out.start_dependent = (*hi - *lo) > 1e-9;
    return out;
}

}  // namespace mfc
