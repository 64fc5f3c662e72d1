#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mfc/common.hpp"

namespace mfc {

/// Empirical measure of a population: nonnegative counts summing to the
/// population size. The probability view is counts / population.
struct EmpiricalMeasure {
    std::vector<int> counts;
    int population = 0;

    Vec probabilities() const {
        Vec p(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i)
            p[i] = static_cast<double>(counts[i]) / population;
        return p;
    }
    bool operator==(const EmpiricalMeasure& o) const = default;
};

/// Joint state-action empirical measure. Row sums over actions reproduce the
/// marginal state counts.
struct JointEmpiricalMeasure {
    std::vector<int> counts;  // row-major [state][action]
    int num_actions = 0;
    int population = 0;

    int count(int state, int action) const { return counts[state * num_actions + action]; }
    int& count(int state, int action) { return counts[state * num_actions + action]; }
    int num_states() const { return static_cast<int>(counts.size()) / num_actions; }

    EmpiricalMeasure marginal() const {
        EmpiricalMeasure m{std::vector<int>(num_states(), 0), population};
        for (int x = 0; x < num_states(); ++x)
            for (int u = 0; u < num_actions; ++u) m.counts[x] += count(x, u);
        return m;
    }
    /// Probability matrix view, row-major [state][action].
    Vec probabilities() const {
        Vec p(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i)
            p[i] = static_cast<double>(counts[i]) / population;
        return p;
    }
    bool operator==(const JointEmpiricalMeasure& o) const = default;
};

/// Conditional action distribution per state. States carrying zero marginal
/// mass get a uniform row and are flagged in support_marks.
struct ConditionalKernel {
    Mat rows;                        // [state] -> probability row over actions
    std::vector<bool> support_marks; // true where the marginal mass was zero
};

std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// All count vectors of `num_states` entries summing to `population`, first
/// coordinate decreasing (so (2,0) precedes (1,1) precedes (0,2)). Length is
/// C(population + num_states - 1, num_states - 1).
std::vector<EmpiricalMeasure> enumerate_empirical(int population, int num_states,
                                                  const Budgets& budgets = {});

/// All joint count matrices whose state marginal equals `mu`, ordered with
/// state 0's row most significant and each row in the enumeration order above.
std::vector<JointEmpiricalMeasure> admissible_actions(const EmpiricalMeasure& mu, int num_actions,
                                                      const Budgets& budgets = {});

/// Position of `counts` in the enumerate_empirical order, or -1 if invalid.
long rank_of_counts(const std::vector<int>& counts, int population);

/// Exact first-order optimal transport cost between two probability vectors on
/// a common finite support with the given ground metric. Solved as a min-cost
/// flow on the excess/deficit bipartite instance (successive shortest paths).
double wasserstein1(const Vec& p, const Vec& q, const Mat& metric);

/// Factor a joint probability matrix (row-major [state][action]) into its
/// state marginal and the conditional action kernel.
std::pair<Vec, ConditionalKernel> disintegrate(const Vec& joint, int num_states, int num_actions);

inline std::pair<Vec, ConditionalKernel> disintegrate(const JointEmpiricalMeasure& theta) {
    return disintegrate(theta.probabilities(), theta.num_states(), theta.num_actions);
}

/// Throws ParseError (naming `name`) unless `metric` is a genuine metric:
/// nonnegative, zero exactly on the diagonal, symmetric, triangle inequality.
void validate_metric(const Mat& metric, const std::string& name);

}  // namespace mfc
