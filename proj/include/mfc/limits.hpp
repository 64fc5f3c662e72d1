#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfc/avg_solver.hpp"
#include "mfc/common.hpp"
#include "mfc/disc_solver.hpp"
#include "mfc/lift.hpp"
#include "mfc/meanfield.hpp"
#include "mfc/model.hpp"

namespace mfc {

struct SweepEntry {
    int population = 0;
    double j = 0.0;
    std::string method;  // "oracle", "rvi", or "vanish"
    bool ok = false;
    std::string error;
};

/// Finite-population optimal averages against the grid value. The gain is
/// start-independent here (optimality-equation constant), so no starting
/// measure enters the table.
struct SweepResult {
    std::vector<SweepEntry> entries;
    double j_inf = 0.0;
    Vec gaps() const {
        Vec g;
        for (const auto& e : entries) g.push_back(std::abs(e.j - j_inf));
        return g;
    }
};

struct SweepOptions {
    std::vector<int> populations{2, 3, 4};
    int grid_resolution = 32;
    int action_mesh = 0;  // 0: same as grid_resolution
    double rvi_tol = 1e-9;
    long rvi_max_iter = 200000;
    VanishingOptions vanish;
    Budgets budgets;
};

/// j per population: the exhaustive oracle when its policy count fits the
/// budget, else relative value iteration when it converges, else the
/// vanishing-discount ladder. Capacity failures are recorded per entry and
/// the sweep continues.
SweepResult value_convergence_sweep(const AgentModel& model, const SweepOptions& opts);

/// Per-lifted-state action distribution induced by agents drawing
/// independently from the symmetric policy's conditional rows at the
/// projected crowd: an exact product-multinomial mixture over the admissible
/// joint measures.
Mat symmetric_action_distribution(const LiftedMdp& mdp, const SimplexGrid& grid,
                                  const SymmetricPolicy& policy);

enum class EvalCriterion { Average, Discounted };

struct SymmetricEvalOptions {
    EvalCriterion criterion = EvalCriterion::Average;
    double beta = 0.9921875;  // used by the discounted criterion
    Budgets budgets;
    // Monte Carlo fallback when the exact lift exceeds the budgets.
    long mc_samples = 200;
    int mc_horizon = 400;
    std::uint64_t mc_seed = 1;
    std::vector<std::vector<int>> mc_starts;  // count vectors; required for the fallback
};

struct SymmetricEvalResult {
    Vec values;           // per start (all lifted states when exact)
    Vec standard_errors;  // zeros when exact
    std::string method;   // "exact" or "monte_carlo"
};

/// Value of the symmetric policy applied by every agent of an N-population,
/// evaluated exactly through the lift when affordable, otherwise by agentwise
/// simulation with reported standard errors.
SymmetricEvalResult evaluate_symmetric_on_finite(const AgentModel& model,
                                                 const SymmetricPolicy& policy, int population,
                                                 const SymmetricEvalOptions& opts = {});

struct FlowMcOptions {
    int population = 8;
    int horizon = 16;
    long samples = 1000;
    std::uint64_t seed = 7;
    std::vector<int> start_counts;  // defaults to the most balanced state
};

/// Sampled joint empirical measures per time step, one trajectory per sample,
/// plus the matched infinite-population flow comparison.
struct FlowEnsemble {
    int population = 0;
    int horizon = 0;
    long samples = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<JointEmpiricalMeasure>> joints;  // [t][sample]
    Vec mean_w1;            // per t: mean W1(sampled joint, matched limit joint)
    Vec cost_time_averages; // per sample: (1/T) sum_t of the stage cost
    double mean_cost = 0.0;
    double stderr_cost = 0.0;
};

/// Simulates N agents under the symmetric policy with shared common noise and
/// compares, per step, the sampled joint measures against the infinite-
/// population flow driven by the same common-noise path.
FlowEnsemble flow_distribution_mc(const AgentModel& model, const SymmetricPolicy& policy,
                                  const FlowMcOptions& opts);

}  // namespace mfc
