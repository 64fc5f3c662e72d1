#include "mfc/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "mfc/chain.hpp"
#include "mfc/solver_core.hpp"

namespace mfc {

int SimplexGrid::project(const Vec& p) const {
    int best = 0;
    double best_d = wasserstein1(p, points[0], metric);
    for (int j = 1; j < size(); ++j) {
        const double d = wasserstein1(p, points[j], metric);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

double SimplexGrid::displacement(const Vec& p) const {
    return wasserstein1(p, points[project(p)], metric);
}

SimplexGrid make_simplex_grid(int resolution, const Mat& metric_x, const Budgets& budgets) {
    if (resolution < 1) throw std::invalid_argument("make_simplex_grid: resolution must be >= 1");
    SimplexGrid grid;
    grid.resolution = resolution;
    grid.metric = metric_x;
    for (const auto& m : enumerate_empirical(resolution, static_cast<int>(metric_x.size()), budgets))
        grid.points.push_back(m.probabilities());
    return grid;
}

Vec flow_step(const AgentModel& model, const Vec& mu, const Vec& theta_joint, int w0) {
    const int nx = model.num_states();
    const int nu = model.num_actions();
    if (static_cast<int>(theta_joint.size()) != nx * nu)
        throw std::invalid_argument("flow_step: joint measure has the wrong shape");
    for (int x = 0; x < nx; ++x) {
        double marginal = 0.0;
        for (int u = 0; u < nu; ++u) marginal += theta_joint[x * nu + u];
        if (std::abs(marginal - mu[x]) > 1e-12)
            throw std::invalid_argument("flow_step: joint marginal does not match the crowd");
    }
    Vec out(nx, 0.0);
    for (int x = 0; x < nx; ++x)
        for (int u = 0; u < nu; ++u) {
            const double w = theta_joint[x * nu + u];
            if (w == 0.0) continue;
            const Vec row = model.kernel_row(x, u, mu, w0);
            for (int y = 0; y < nx; ++y) out[y] += w * row[y];
        }
    double total = 0.0;
    for (double& v : out) {
        if (v < 0.0) v = 0.0;  // clears mixture round-off at the -1e-14 scale
        total += v;
    }
    for (double& v : out) v /= total;
    return out;
}

GridMdp::GridMdp(const AgentModel& model, int grid_resolution, int action_mesh,
                 const Budgets& budgets)
    : model_(model), action_mesh_(action_mesh) {
    grid_ = make_simplex_grid(grid_resolution, model.metric_x, budgets);
    const int nx = model.num_states();
    const int nu = model.num_actions();

    for (const auto& m : enumerate_empirical(action_mesh, nu, budgets))
        lattice_rows_.push_back(m.probabilities());
    const std::uint64_t rows_per_state = lattice_rows_.size();
    num_mesh_actions_ = 1;
    for (int x = 0; x < nx; ++x) {
        if (num_mesh_actions_ > budgets.max_enumeration / rows_per_state)
            throw CapacityError("mesh action set exceeds the enumeration budget",
                                num_mesh_actions_ * rows_per_state);
        num_mesh_actions_ *= rows_per_state;
    }
    const std::uint64_t cells =
        static_cast<std::uint64_t>(grid_.size()) * num_mesh_actions_ * model.common_noise.size();
    if (cells > 100000000ull) throw CapacityError("grid table exceeds the cell budget", cells);

    const int G = grid_.size();
    const int A = static_cast<int>(num_mesh_actions_);
    cost_.assign(G, Vec(A, 0.0));
    next_.assign(G, std::vector<SparseRow>(A));

    std::vector<double> displacement(G, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int g = 0; g < G; ++g) {
        const Vec& mu = grid_.points[g];
        Mat unit_cost(nx, Vec(nu, 0.0));
        for (int x = 0; x < nx; ++x)
            for (int u = 0; u < nu; ++u) unit_cost[x][u] = model.cost(x, u, mu);

        Vec theta(nx * nu, 0.0);
        for (int a = 0; a < A; ++a) {
            std::uint64_t rem = static_cast<std::uint64_t>(a);
            double k = 0.0;
            for (int x = nx - 1; x >= 0; --x) {
                const Vec& row = lattice_rows_[rem % rows_per_state];
                rem /= rows_per_state;
                for (int u = 0; u < nu; ++u) {
                    theta[x * nu + u] = mu[x] * row[u];
                    k += mu[x] * row[u] * unit_cost[x][u];
                }
            }
            cost_[g][a] = k;
            std::map<int, double> mix;
            for (int w0 = 0; w0 < model.common_noise.size(); ++w0) {
                const double pw0 = model.common_noise.probs[w0];
                if (pw0 == 0.0) continue;
                const Vec nxt = flow_step(model, mu, theta, w0);
                const int j = grid_.project(nxt);
                displacement[g] =
                    std::max(displacement[g], wasserstein1(nxt, grid_.points[j], grid_.metric));
                mix[j] += pw0;
            }
            next_[g][a] = SparseRow(mix.begin(), mix.end());
        }
    }
    max_displacement_ = *std::max_element(displacement.begin(), displacement.end());
}

Mat GridMdp::action_rows(int a) const {
    const int nx = model_.num_states();
    const std::uint64_t rows_per_state = lattice_rows_.size();
    Mat rows(nx);
    std::uint64_t rem = static_cast<std::uint64_t>(a);
    for (int x = nx - 1; x >= 0; --x) {
        rows[x] = lattice_rows_[rem % rows_per_state];
        rem /= rows_per_state;
    }
    return rows;
}

SymmetricPolicy extract_symmetric_policy(const GridMdp& mdp, const std::vector<int>& action_indices,
                                         double beta_tag) {
    SymmetricPolicy policy;
    policy.grid_resolution = mdp.grid().resolution;
    policy.action_mesh = mdp.action_mesh();
    policy.beta_tag = beta_tag;
    const int nu = mdp.model().num_actions();
    for (int g = 0; g < mdp.num_states(); ++g) {
        Mat rows = mdp.action_rows(action_indices[g]);
        for (std::size_t x = 0; x < rows.size(); ++x)
            if (mdp.grid().points[g][x] == 0.0) rows[x].assign(nu, 1.0 / nu);
        policy.rows.push_back(std::move(rows));
    }
    return policy;
}

MfDiscountedSolution solve_mf_discounted(const GridMdp& mdp, double beta, double tol,
                                         long max_iter) {
    if (beta <= 0.0 || beta >= 1.0)
        throw std::invalid_argument("solve_mf_discounted: beta must lie in (0, 1)");
    auto res = core::anchored_discounted_solve(mdp, beta, 0, tol, max_iter);
    MfDiscountedSolution out;
    out.beta = beta;
    out.values = std::move(res.values);
    out.action_indices = std::move(res.policy);
    out.policy = extract_symmetric_policy(mdp, out.action_indices, beta);
    out.sup_residual = res.residual;
    out.iterations = res.iterations;
    out.converged = res.converged;
    out.max_projection_displacement = mdp.max_projection_displacement();
    return out;
}

namespace {

Vec grid_policy_average(const GridMdp& mdp, const std::vector<int>& action_indices) {
    const int G = mdp.num_states();
    Mat P(G, Vec(G, 0.0));
    Vec c(G, 0.0);
    for (int g = 0; g < G; ++g) {
        c[g] = mdp.stage_cost(g, action_indices[g]);
        for (const auto& [next, p] : mdp.row(g, action_indices[g])) P[g][next] += p;
    }
    return analyze_chain(P, c).gains;
}

}  // namespace

MfAverageSolution solve_mf_average(const GridMdp& mdp, int anchor, const VanishingOptions& opts) {
    MfAverageSolution out;
    const double solve_tol = opts.solve_tol > 0.0 ? opts.solve_tol : opts.tol * 1e-2;

    double diam = 0.0;
    if (opts.lipschitz.has_value()) {
        for (int i = 0; i < mdp.num_states(); ++i)
            for (int j = i + 1; j < mdp.num_states(); ++j)
                diam = std::max(diam, wasserstein1(mdp.grid().points[i], mdp.grid().points[j],
                                                   mdp.grid().metric));
    }

    Vec warm(mdp.num_states(), 0.0);
    std::vector<int> prev_policy;
    double last_beta = 0.0;
    for (int k = 1; k <= opts.k_max; ++k) {
        const double beta = 1.0 - std::pow(2.0, -k);
        auto sol =
            core::anchored_discounted_solve(mdp, beta, anchor, solve_tol, opts.max_iter, &warm);
        last_beta = beta;
        out.trace.betas.push_back(beta);
        out.trace.j_estimates.push_back((1.0 - beta) * sol.values[anchor]);
        out.trace.h_estimates.push_back(sol.relative);
        out.trace.rung_residuals.push_back(sol.residual);
        if (opts.lipschitz.has_value())
            out.trace.diameter_bounds.push_back(2.0 * opts.lipschitz->k_cost /
                                                (1.0 - 2.0 * opts.lipschitz->k_transition * beta) *
                                                diam);
        int changes = 0;
        if (!prev_policy.empty())
            for (std::size_t g = 0; g < sol.policy.size(); ++g)
                if (sol.policy[g] != prev_policy[g]) ++changes;
        out.trace.policy_changes.push_back(prev_policy.empty() ? 0 : changes);
        prev_policy = sol.policy;
        warm = std::move(sol.relative);

        const std::size_t r = out.trace.j_estimates.size();
        if (opts.stop_early && r >= 2 &&
            std::abs(out.trace.j_estimates[r - 1] - out.trace.j_estimates[r - 2]) <= opts.tol) {
            out.trace.stabilized = true;
            break;
        }
    }
    if (!opts.stop_early && out.trace.j_estimates.size() >= 2) {
        const std::size_t r = out.trace.j_estimates.size();
        out.trace.stabilized =
            std::abs(out.trace.j_estimates[r - 1] - out.trace.j_estimates[r - 2]) <= opts.tol;
    }

    out.action_indices = prev_policy;
    out.policy = extract_symmetric_policy(mdp, out.action_indices, last_beta);
    out.relative_values = out.trace.h_estimates.back();
    out.converged = out.trace.stabilized;

    // Exact refinement of the gain: evaluate the final greedy policy on the
    // grid chain. Near beta = 1 that policy is average optimal on this finite
    // MDP, and the exact evaluation removes the O(1-beta) extraction error of
    // the scaled anchor value.
    const Vec gains = grid_policy_average(mdp, out.action_indices);
    out.gain = *std::max_element(gains.begin(), gains.end());

    const Vec tv = core::bellman_apply(mdp, out.relative_values, 1.0);
    double defect = 0.0;
    for (int g = 0; g < mdp.num_states(); ++g)
        defect = std::max(defect, std::abs(out.gain + out.relative_values[g] - tv[g]));
    out.residual = defect;
    return out;
}

void save_symmetric_policy(const SymmetricPolicy& policy, const std::string& path) {
    nlohmann::json doc;
    doc["format"] = "mfc-policy-v1";
    doc["grid_resolution"] = policy.grid_resolution;
    doc["action_mesh"] = policy.action_mesh;
    doc["beta_tag"] = policy.beta_tag;
    doc["rows"] = policy.rows;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write policy artifact: " + path);
    out << doc.dump();
}

SymmetricPolicy load_symmetric_policy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open policy artifact: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ParseError(std::string("policy artifact is not valid JSON: ") + e.what());
    }
    if (!doc.contains("format") || doc["format"] != "mfc-policy-v1")
        throw ParseError("policy artifact: unknown format tag");
    SymmetricPolicy policy;
    policy.grid_resolution = doc.at("grid_resolution").get<int>();
    policy.action_mesh = doc.at("action_mesh").get<int>();
    policy.beta_tag = doc.at("beta_tag").get<double>();
    policy.rows = doc.at("rows").get<std::vector<Mat>>();
    for (const auto& rows : policy.rows)
        for (const auto& row : rows) {
            double total = 0.0;
            for (double p : row) {
                if (p < 0.0) throw ParseError("policy artifact: negative action weight");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9)
                throw ParseError("policy artifact: action row does not sum to one");
        }
    return policy;
}

}  // namespace mfc
