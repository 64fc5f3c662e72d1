#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mfc/common.hpp"
#include "mfc/measures.hpp"
#include "mfc/model.hpp"

namespace mfc {

/// Sparse probability row over lifted-state indices, sorted by index.
using SparseRow = std::vector<std::pair<int, double>>;

/// The measure-valued MDP of an N-agent population: states are empirical
/// measures, actions are joint state-action empirical measures with the
/// matching marginal, the kernel aggregates the agent dynamics through
/// exchangeability.
struct LiftedMdp {
    int population = 0;
    int num_agent_states = 0;
    int num_agent_actions = 0;
    std::vector<EmpiricalMeasure> states;
    std::vector<std::vector<JointEmpiricalMeasure>> actions;  // per state
    std::vector<std::vector<SparseRow>> kernel;               // [state][action]
    std::vector<Vec> cost;                                    // [state][action]
    std::string model_hash;

    int num_states() const { return static_cast<int>(states.size()); }
    int num_actions(int s) const { return static_cast<int>(actions[s].size()); }
    double stage_cost(int s, int a) const { return cost[s][a]; }
    const SparseRow& row(int s, int a) const { return kernel[s][a]; }

    long state_index(const std::vector<int>& counts) const {
        return rank_of_counts(counts, population);
    }
    /// Product of per-state action counts, saturating at 2^63-1.
    std::uint64_t total_policies() const;
};

struct LiftOptions {
    bool monte_carlo = false;
    long samples = 100000;
    std::uint64_t seed = 1;
    Budgets budgets;
    std::uint64_t max_exact_work = 500'000'000;  // DP operations across all rows
};

/// Canonical representative of a joint empirical measure: agent (state,
/// action) pairs sorted lexicographically, so any two vectors with the same
/// joint counts produce the same output.
std::pair<std::vector<int>, std::vector<int>> representative_vector(
    const JointEmpiricalMeasure& theta);

/// Exact distribution of the next empirical measure for agents at (xs, us)
/// under crowd `mu_probs`. Agents are conditionally independent given the
/// common noise, so the row is a noise mixture of product kernels, computed
/// by a dynamic program over partial count vectors. The agent list is sorted
/// first; permutations of it produce bitwise identical rows.
SparseRow exact_lifted_row(const AgentModel& model, std::vector<int> xs, std::vector<int> us,
                           const Vec& mu_probs);

/// Monte Carlo estimate of the same row, deterministic under the seed.
SparseRow sampled_lifted_row(const AgentModel& model, const std::vector<int>& xs,
                             const std::vector<int>& us, const Vec& mu_probs, long samples,
                             std::uint64_t seed);

LiftedMdp build_lifted_mdp(const AgentModel& model, int population, const LiftOptions& opts = {});

void save_lifted_mdp(const LiftedMdp& mdp, const std::string& path);
LiftedMdp load_lifted_mdp(const std::string& path);

/// Ground metric on joint (state, action) atoms, row-major state-major
/// flattening: d((x,u),(x',u')) = d_X(x,x') + d_U(u,u').
Mat joint_ground_metric(const AgentModel& model);

/// Total-variation distances between two vector-state laws evolved under a
/// stationary lifted policy (one entry per step, the first being the initial
/// distance). Uses the L1 convention, so the maximum distance is 2. Note the
/// contraction being probed is the one-step inequality
///   d(t+1) <= (1 - P(B) pi(X)^N) d(t);
/// a display of it elsewhere repeats the same time index on both sides, which
/// we read as the evident one-step statement.
std::vector<double> tv_marginal_contraction_probe(const AgentModel& model, int population,
                                                  const std::vector<int>& policy,
                                                  const Vec& initial_a, const Vec& initial_b,
                                                  int steps, const Budgets& budgets = {});

/// Index of a vector state in the base-|X| encoding (agent 0 most
/// significant), for building initial laws for the probe.
long vector_state_index(const std::vector<int>& agent_states, int num_agent_states);

}  // namespace mfc
