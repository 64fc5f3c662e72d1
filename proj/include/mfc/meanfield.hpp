#pragma once

#include <string>
#include <vector>

#include "mfc/common.hpp"
#include "mfc/disc_solver.hpp"
#include "mfc/lift.hpp"
#include "mfc/model.hpp"

namespace mfc {

/// Rational lattice discretization of the probability simplex, with nearest-
/// point projection under the transport distance (first index wins ties).
struct SimplexGrid {
    int resolution = 0;
    std::vector<Vec> points;
    Mat metric;

    int size() const { return static_cast<int>(points.size()); }
    int project(const Vec& p) const;
    /// Transport distance from p to its projection.
    double displacement(const Vec& p) const;
};

SimplexGrid make_simplex_grid(int resolution, const Mat& metric_x, const Budgets& budgets = {});

/// One exact step of the infinite-population measure flow for a common-noise
/// atom: mu'(y) = sum_{x,u} kernel(y|x,u,mu) theta(x,u). Requires theta's
/// state marginal to match mu within 1e-12.
Vec flow_step(const AgentModel& model, const Vec& mu, const Vec& theta_joint, int w0);

/// Per-state conditional action rows attached to every grid point. Rows at
/// states carrying zero mass are uniform.
struct SymmetricPolicy {
    int grid_resolution = 0;
    int action_mesh = 0;
    double beta_tag = 0.0;
    std::vector<Mat> rows;  // [grid point][state] -> action row

    const Mat& rows_at(const SimplexGrid& grid, const Vec& mu) const {
        return rows[grid.project(mu)];
    }
};

void save_symmetric_policy(const SymmetricPolicy& policy, const std::string& path);
SymmetricPolicy load_symmetric_policy(const std::string& path);

/// Finite MDP over grid points: actions are all combinations of per-state
/// conditional rows from the action lattice, successors are flow steps
/// projected back to the grid, mixed over common noise.
class GridMdp {
public:
    GridMdp(const AgentModel& model, int grid_resolution, int action_mesh,
            const Budgets& budgets = {});

    int num_states() const { return grid_.size(); }
    int num_actions(int) const { return static_cast<int>(num_mesh_actions_); }
    double stage_cost(int g, int a) const { return cost_[g][a]; }
    const SparseRow& row(int g, int a) const { return next_[g][a]; }

    const SimplexGrid& grid() const { return grid_; }
    int action_mesh() const { return action_mesh_; }
    /// Conditional rows of a mesh action (shared across grid points).
    Mat action_rows(int a) const;
    double max_projection_displacement() const { return max_displacement_; }
    const AgentModel& model() const { return model_; }

private:
    const AgentModel& model_;
    SimplexGrid grid_;
    int action_mesh_ = 0;
    std::vector<Vec> lattice_rows_;  // action rows on the resolution-m lattice
    std::uint64_t num_mesh_actions_ = 0;
    std::vector<Vec> cost_;
    std::vector<std::vector<SparseRow>> next_;
    double max_displacement_ = 0.0;
};

struct MfDiscountedSolution {
    double beta = 0.0;
    Vec values;
    SymmetricPolicy policy;
    std::vector<int> action_indices;
    double sup_residual = 0.0;
    long iterations = 0;
    bool converged = false;
    double max_projection_displacement = 0.0;
};

MfDiscountedSolution solve_mf_discounted(const GridMdp& mdp, double beta, double tol,
                                         long max_iter = 1000000);

struct MfAverageSolution {
    double gain = 0.0;           // exact average of the final policy on the grid chain
    Vec relative_values;
    SymmetricPolicy policy;
    std::vector<int> action_indices;
    double residual = 0.0;       // optimality-equation defect of (gain, h) on the grid
    bool converged = false;
    VanishingDiscountTrace trace;
};

/// Vanishing-discount ladder on the grid. The reported gain refines the last
/// scaled anchor estimate by evaluating the final greedy policy exactly on
/// the grid chain; for discount factors near one that policy is also average
/// optimal on the finite grid, and the exact evaluation removes the O(1-beta)
/// extraction error.
MfAverageSolution solve_mf_average(const GridMdp& mdp, int anchor, const VanishingOptions& opts);

/// The symmetric policy of a chosen mesh action at every grid point, uniform
/// rows filled in wherever the grid point carries no mass.
SymmetricPolicy extract_symmetric_policy(const GridMdp& mdp, const std::vector<int>& action_indices,
                                         double beta_tag);

}  // namespace mfc
