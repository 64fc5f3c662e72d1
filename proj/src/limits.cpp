#include "mfc/limits.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "mfc/rng.hpp"

namespace mfc {

SweepResult value_convergence_sweep(const AgentModel& model, const SweepOptions& opts) {
    SweepResult result;

    const int mesh = opts.action_mesh > 0 ? opts.action_mesh : opts.grid_resolution;
    GridMdp grid_mdp(model, opts.grid_resolution, mesh, opts.budgets);
    VanishingOptions vanish = opts.vanish;
    vanish.model = &model;
    result.j_inf = solve_mf_average(grid_mdp, 0, vanish).gain;

    for (int n : opts.populations) {
        SweepEntry entry;
        entry.population = n;
        try {
            LiftOptions lift_opts;
            lift_opts.budgets = opts.budgets;
            auto mdp = build_lifted_mdp(model, n, lift_opts);
            if (mdp.total_policies() <= opts.budgets.max_oracle_policies) {
                entry.j = solve_oracle(mdp, opts.budgets).gain;
                entry.method = "oracle";
                entry.ok = true;
            } else {
                auto rvi = solve_rvi(mdp, 0, opts.rvi_tol, opts.rvi_max_iter);
                if (rvi.converged) {
                    entry.j = rvi.gain;
                    entry.method = "rvi";
                    entry.ok = true;
                } else {
                    auto [avg, trace] = vanishing_discount(mdp, 0, vanish);
                    entry.j = avg.gain;
                    entry.method = "vanish";
                    entry.ok = true;
                }
            }
        } catch (const CapacityError& e) {
            entry.ok = false;
            entry.error = e.what();
        }
        result.entries.push_back(std::move(entry));
    }
    return result;
}

Mat symmetric_action_distribution(const LiftedMdp& mdp, const SimplexGrid& grid,
                                  const SymmetricPolicy& policy) {
    Mat rows(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s) {
        const Vec mu = mdp.states[s].probabilities();
        const Mat& gamma = policy.rows[grid.project(mu)];
        rows[s].assign(mdp.num_actions(s), 0.0);
        double total = 0.0;
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            const auto& theta = mdp.actions[s][a];
            // product over states of multinomial weights: the running factor
            // placed/(i+1) accumulates n_x! / prod_u c_u! alongside the
            // probability powers.
            double p = 1.0;
            for (int x = 0; x < theta.num_states(); ++x) {
                int placed = 0;
                for (int u = 0; u < theta.num_actions; ++u) {
                    const int c = theta.count(x, u);
                    for (int i = 0; i < c; ++i) {
                        ++placed;
                        p *= gamma[x][u] * static_cast<double>(placed) / (i + 1);
                    }
                }
            }
            rows[s][a] = p;
            total += p;
        }
        // guard against round-off drift in the multinomial normalization
        if (std::abs(total - 1.0) > 1e-9)
            throw std::logic_error("symmetric_action_distribution: weights do not sum to one");
        for (double& w : rows[s]) w /= total;
    }
    return rows;
}

namespace {

Vec discounted_policy_values(const LiftedMdp& mdp, const Mat& rows, double beta) {
    auto [P, c] = induced_chain(mdp, rows);
    const int S = mdp.num_states();
    Eigen::MatrixXd A(S, S);
    Eigen::VectorXd b(S);
    for (int i = 0; i < S; ++i) {
        for (int j = 0; j < S; ++j) A(i, j) = (i == j ? 1.0 : 0.0) - beta * P[i][j];
        b(i) = c[i];
    }
    Eigen::VectorXd k = A.fullPivLu().solve(b);
    Vec out(S);
    for (int i = 0; i < S; ++i) out[i] = k(i);
    return out;
}

struct Trajectory {
    std::vector<int> agent_states;
    Vec limit_crowd;
};

}  // namespace

SymmetricEvalResult evaluate_symmetric_on_finite(const AgentModel& model,
                                                 const SymmetricPolicy& policy, int population,
                                                 const SymmetricEvalOptions& opts) {
    SymmetricEvalResult result;
    auto grid = make_simplex_grid(policy.grid_resolution, model.metric_x, opts.budgets);

    bool exact_ok = true;
    LiftedMdp mdp;
    try {
        LiftOptions lift_opts;
        lift_opts.budgets = opts.budgets;
        mdp = build_lifted_mdp(model, population, lift_opts);
    } catch (const CapacityError&) {
        exact_ok = false;
    }

    if (exact_ok) {
        const Mat rows = symmetric_action_distribution(mdp, grid, policy);
        result.method = "exact";
        if (opts.criterion == EvalCriterion::Average)
            result.values = evaluate_policy_average(mdp, rows);
        else
            result.values = discounted_policy_values(mdp, rows, opts.beta);
        result.standard_errors.assign(result.values.size(), 0.0);
        return result;
    }

    // Monte Carlo fallback: agentwise rollouts from explicit starts.
    if (opts.mc_starts.empty())
        throw CapacityError(
            "exact symmetric evaluation exceeds the budget and no Monte Carlo starts were given",
            static_cast<std::uint64_t>(population));
    result.method = "monte_carlo";
    for (const auto& start : opts.mc_starts) {
        Vec per_sample;
        for (long s = 0; s < opts.mc_samples; ++s) {
            Rng rng(Rng::derive(opts.mc_seed, s));
            std::vector<int> xs;
            for (int x = 0; x < static_cast<int>(start.size()); ++x)
                xs.insert(xs.end(), start[x], x);
            double total = 0.0;
            double discount = 1.0;
            for (int t = 0; t < opts.mc_horizon; ++t) {
                Vec mu(model.num_states(), 0.0);
                for (int x : xs) mu[x] += 1.0 / population;
                const Mat& gamma = policy.rows[grid.project(mu)];
                std::vector<int> us(xs.size());
                double stage = 0.0;
                for (std::size_t i = 0; i < xs.size(); ++i) {
                    us[i] = rng.sample(gamma[xs[i]]);
                    stage += model.cost(xs[i], us[i], mu) / population;
                }
                if (opts.criterion == EvalCriterion::Average) {
                    total += stage;
                } else {
                    total += discount * stage;
                    discount *= opts.beta;
                }
                const int w0 = rng.sample(model.common_noise.probs);
                for (std::size_t i = 0; i < xs.size(); ++i)
                    xs[i] = rng.sample(model.kernel_row(xs[i], us[i], mu, w0));
            }
            per_sample.push_back(opts.criterion == EvalCriterion::Average
                                     ? total / opts.mc_horizon
                                     : total);
        }
        double mean = 0.0;
        for (double v : per_sample) mean += v;
        mean /= per_sample.size();
        double var = 0.0;
        for (double v : per_sample) var += (v - mean) * (v - mean);
        var /= std::max<std::size_t>(per_sample.size() - 1, 1);
        result.values.push_back(mean);
        result.standard_errors.push_back(std::sqrt(var / per_sample.size()));
    }
    return result;
}

FlowEnsemble flow_distribution_mc(const AgentModel& model, const SymmetricPolicy& policy,
                                  const FlowMcOptions& opts) {
    const int nx = model.num_states();
    const int nu = model.num_actions();
    auto grid = make_simplex_grid(policy.grid_resolution, model.metric_x);
    const Mat joint_metric = joint_ground_metric(model);

    std::vector<int> start = opts.start_counts;
    if (start.empty()) {
        // most balanced empirical state
        start.assign(nx, opts.population / nx);
        int rem = opts.population - (opts.population / nx) * nx;
        for (int x = 0; x < rem; ++x) ++start[x];
    }

    FlowEnsemble ens;
    ens.population = opts.population;
    ens.horizon = opts.horizon;
    ens.samples = opts.samples;
    ens.seed = opts.seed;
    ens.joints.assign(opts.horizon,
                      std::vector<JointEmpiricalMeasure>(
                          opts.samples, JointEmpiricalMeasure{std::vector<int>(nx * nu, 0), nu,
                                                              opts.population}));
    Mat w1(opts.horizon, Vec(opts.samples, 0.0));
    ens.cost_time_averages.assign(opts.samples, 0.0);

#pragma omp parallel for schedule(dynamic)
    for (long s = 0; s < opts.samples; ++s) {
        Rng rng(Rng::derive(opts.seed, s));
        std::vector<int> xs;
        for (int x = 0; x < nx; ++x) xs.insert(xs.end(), start[x], x);
        Vec limit_mu(nx, 0.0);
        for (int x = 0; x < nx; ++x) limit_mu[x] = static_cast<double>(start[x]) / opts.population;

        double cost_sum = 0.0;
        for (int t = 0; t < opts.horizon; ++t) {
            Vec mu(nx, 0.0);
            for (int x : xs) mu[x] += 1.0 / opts.population;
            const Mat& gamma = policy.rows[grid.project(mu)];

            JointEmpiricalMeasure theta{std::vector<int>(nx * nu, 0), nu, opts.population};
            std::vector<int> us(xs.size());
            for (std::size_t i = 0; i < xs.size(); ++i) {
                us[i] = rng.sample(gamma[xs[i]]);
                ++theta.count(xs[i], us[i]);
                cost_sum += model.cost(xs[i], us[i], mu) / opts.population;
            }

            // matched limit flow under the same common-noise draw
            const Mat& limit_gamma = policy.rows[grid.project(limit_mu)];
            Vec limit_theta(nx * nu, 0.0);
            for (int x = 0; x < nx; ++x)
                for (int u = 0; u < nu; ++u) limit_theta[x * nu + u] = limit_mu[x] * limit_gamma[x][u];

            w1[t][s] = wasserstein1(theta.probabilities(), limit_theta, joint_metric);

            const int w0 = rng.sample(model.common_noise.probs);
            for (std::size_t i = 0; i < xs.size(); ++i)
                xs[i] = rng.sample(model.kernel_row(xs[i], us[i], mu, w0));
            limit_mu = flow_step(model, limit_mu, limit_theta, w0);
            ens.joints[t][s] = std::move(theta);
        }
        ens.cost_time_averages[s] = cost_sum / opts.horizon;
    }

    ens.mean_w1.assign(opts.horizon, 0.0);
    for (int t = 0; t < opts.horizon; ++t) {
        double total = 0.0;
        for (long s = 0; s < opts.samples; ++s) total += w1[t][s];
        ens.mean_w1[t] = total / opts.samples;
    }
    double mean = 0.0;
    for (double v : ens.cost_time_averages) mean += v;
    mean /= opts.samples;
    double var = 0.0;
    for (double v : ens.cost_time_averages) var += (v - mean) * (v - mean);
    var /= std::max<long>(opts.samples - 1, 1);
    ens.mean_cost = mean;
    ens.stderr_cost = std::sqrt(var / opts.samples);
    return ens;
}

}  // namespace mfc
