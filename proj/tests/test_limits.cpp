#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfc/limits.hpp"
#include "mfc/rng.hpp"
#include "test_models.hpp"

using namespace mfc;

namespace {

SymmetricPolicy uniform_symmetric_policy(int grid_resolution, int nx, int nu, const Mat& metric) {
    SymmetricPolicy policy;
    policy.grid_resolution = grid_resolution;
    policy.action_mesh = grid_resolution;
    policy.beta_tag = 0.0;
    SimplexGrid grid = make_simplex_grid(grid_resolution, metric);
    policy.rows.assign(grid.size(), Mat(nx, Vec(nu, 1.0 / nu)));
    return policy;
}

}  // namespace

TEST_CASE("sweep gaps vanish identically for constant costs") {
    auto model = load_model(fixtures::constant_cost_model(0.7));
    SweepOptions opts;
    opts.populations = {2, 3, 4};
    opts.grid_resolution = 8;
    opts.vanish.tol = 1e-8;
    auto sweep = value_convergence_sweep(model, opts);
    CHECK(sweep.j_inf == doctest::Approx(0.7).epsilon(1e-9));
    for (double gap : sweep.gaps()) CHECK(gap <= 1e-9);
}

TEST_CASE("spread model sweep hits zero exactly at even populations") {
    auto model = load_model(fixtures::spread_model());
    SweepOptions opts;
    opts.populations = {2, 4};
    opts.grid_resolution = 16;
    opts.vanish.tol = 1e-8;
    auto sweep = value_convergence_sweep(model, opts);
    CHECK(sweep.j_inf == 0.0);
    for (const auto& entry : sweep.entries) {
        REQUIRE(entry.ok);
        CHECK(entry.method == "oracle");
        CHECK(entry.j == 0.0);
    }
    for (double gap : sweep.gaps()) CHECK(gap == 0.0);
}

TEST_CASE("sweep records capacity failures and continues") {
    auto model = load_model(fixtures::spread_model());
    SweepOptions opts;
    opts.populations = {2, 200, 4};
    opts.grid_resolution = 8;
    opts.vanish.tol = 1e-7;
    opts.budgets.max_enumeration = 100;  // 201 lifted states exceed this
    auto sweep = value_convergence_sweep(model, opts);
    REQUIRE(sweep.entries.size() == 3);
    CHECK(sweep.entries[0].ok);
    CHECK_FALSE(sweep.entries[1].ok);
    CHECK(sweep.entries[1].error.find("budget") != std::string::npos);
    CHECK(sweep.entries[2].ok);
}

TEST_CASE("agents drawing independently induce product multinomial weights") {
    auto model = load_model(fixtures::spread_model());
    auto mdp = build_lifted_mdp(model, 2);
    auto policy = uniform_symmetric_policy(8, 2, 2, model.metric_x);
    auto grid = make_simplex_grid(8, model.metric_x);
    const Mat rows = symmetric_action_distribution(mdp, grid, policy);

    const long s20 = mdp.state_index({2, 0});
    CHECK(rows[s20][0] == doctest::Approx(0.25));  // both choose action 0
    CHECK(rows[s20][1] == doctest::Approx(0.50));  // split
    CHECK(rows[s20][2] == doctest::Approx(0.25));
    const long s11 = mdp.state_index({1, 1});
    for (int a = 0; a < 4; ++a) CHECK(rows[s11][a] == doctest::Approx(0.25));
}

TEST_CASE("the uniform symmetric mixture earns one quarter on the spread pair") {
    auto model = load_model(fixtures::spread_model());
    auto policy = uniform_symmetric_policy(8, 2, 2, model.metric_x);
    auto eval = evaluate_symmetric_on_finite(model, policy, 2);
    CHECK(eval.method == "exact");
    for (double v : eval.values) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("a coarse scan over state-independent mixtures bottoms out at one quarter") {
    auto model = load_model(fixtures::spread_model());
    auto mdp = build_lifted_mdp(model, 2);
    SimplexGrid grid = make_simplex_grid(4, model.metric_x);
    double best = 1e9;
    for (int step = 0; step <= 20; ++step) {
        const double p = step / 20.0;
        SymmetricPolicy policy;
        policy.grid_resolution = 4;
        policy.action_mesh = 4;
        policy.rows.assign(grid.size(), Mat(2, Vec{1.0 - p, p}));
        const Mat rows = symmetric_action_distribution(mdp, grid, policy);
        const Vec avg = evaluate_policy_average(mdp, rows);
        best = std::min(best, *std::max_element(avg.begin(), avg.end()));
    }
    CHECK(best == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("every symmetric policy earns the constant on constant costs") {
    auto model = load_model(fixtures::constant_cost_model(0.7));
    auto policy = uniform_symmetric_policy(4, 2, 2, model.metric_x);
    for (int n : {2, 3}) {
        auto eval = evaluate_symmetric_on_finite(model, policy, n);
        for (double v : eval.values) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
    }
}

TEST_CASE("discounted symmetric evaluation matches the geometric sum on constants") {
    auto model = load_model(fixtures::constant_cost_model(0.7));
    auto policy = uniform_symmetric_policy(4, 2, 2, model.metric_x);
    SymmetricEvalOptions opts;
    opts.criterion = EvalCriterion::Discounted;
    opts.beta = 0.75;
    auto eval = evaluate_symmetric_on_finite(model, policy, 2, opts);
    for (double v : eval.values) CHECK(v == doctest::Approx(0.7 / 0.25).epsilon(1e-10));
}

TEST_CASE("monte carlo fallback reports the constant with zero spread") {
    auto model = load_model(fixtures::constant_cost_model(0.7));
    auto policy = uniform_symmetric_policy(4, 2, 2, model.metric_x);
    SymmetricEvalOptions opts;
    opts.budgets.max_enumeration = 5;  // admits the policy grid, not the lift
    opts.mc_samples = 16;
    opts.mc_horizon = 64;
    opts.mc_starts = {{3, 2}};
    auto eval = evaluate_symmetric_on_finite(model, policy, 5, opts);
    CHECK(eval.method == "monte_carlo");
    REQUIRE(eval.values.size() == 1);
    CHECK(eval.values[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(eval.standard_errors[0] <= 1e-12);
}

TEST_CASE("deterministic dynamics and policies produce zero-variance ensembles") {
    auto model = load_model(fixtures::spread_model());
    // identity rows: every agent repeats its state, so the joint is frozen
    SymmetricPolicy policy;
    policy.grid_resolution = 8;
    policy.action_mesh = 8;
    SimplexGrid grid = make_simplex_grid(8, model.metric_x);
    policy.rows.assign(grid.size(), Mat{{1.0, 0.0}, {0.0, 1.0}});

    FlowMcOptions opts;
    opts.population = 6;
    opts.horizon = 5;
    opts.samples = 32;
    opts.seed = 5;
    auto ens = flow_distribution_mc(model, policy, opts);
    for (int t = 0; t < opts.horizon; ++t)
        for (long s = 1; s < opts.samples; ++s) CHECK(ens.joints[t][s] == ens.joints[t][0]);
    for (long s = 0; s < opts.samples; ++s)
        CHECK(ens.cost_time_averages[s] == ens.cost_time_averages[0]);
}

TEST_CASE("sampled joints drift toward the matched limit flow as N grows") {
    auto model = load_model(fixtures::spread_model());
    auto policy = uniform_symmetric_policy(8, 2, 2, model.metric_x);
    Vec at_t5;
    for (int n : {8, 32}) {
        FlowMcOptions opts;
        opts.population = n;
        opts.horizon = 6;
        opts.samples = 400;
        opts.seed = 21;
        auto ens = flow_distribution_mc(model, policy, opts);
        at_t5.push_back(ens.mean_w1[5]);
    }
    CHECK(at_t5[1] < at_t5[0]);
}

TEST_CASE("ensembles are bit-reproducible under a fixed seed") {
    auto model = load_model(fixtures::lipschitz_model());
    auto policy = uniform_symmetric_policy(8, 2, 2, model.metric_x);
    FlowMcOptions opts;
    opts.population = 5;
    opts.horizon = 4;
    opts.samples = 40;
    opts.seed = 99;
    auto a = flow_distribution_mc(model, policy, opts);
    auto b = flow_distribution_mc(model, policy, opts);
    CHECK(a.mean_w1 == b.mean_w1);
    CHECK(a.cost_time_averages == b.cost_time_averages);
    for (int t = 0; t < opts.horizon; ++t) CHECK(a.joints[t] == b.joints[t]);
    for (int t = 0; t < opts.horizon; ++t)
        for (const auto& theta : a.joints[t]) {
            int total = 0;
            for (int c : theta.counts) {
                CHECK(c >= 0);
                total += c;
            }
            CHECK(total == opts.population);
        }
}

TEST_CASE("simulated time averages meet the exact lifted evaluation") {
    auto model = load_model(fixtures::lipschitz_model());
    auto policy = uniform_symmetric_policy(8, 2, 2, model.metric_x);
    const int n = 3;
    auto exact = evaluate_symmetric_on_finite(model, policy, n);
    FlowMcOptions opts;
    opts.population = n;
    opts.horizon = 4000;
    opts.samples = 48;
    opts.seed = 13;
    opts.start_counts = {2, 1};
    auto ens = flow_distribution_mc(model, policy, opts);
    auto mdp = build_lifted_mdp(model, n);
    const double exact_value = exact.values[mdp.state_index({2, 1})];
    CHECK(std::abs(ens.mean_cost - exact_value) <= 3.0 * ens.stderr_cost + 1e-4);
}

TEST_CASE("symmetric grid policies close in on the finite optimum") {
    auto model = load_model(fixtures::lipschitz_model());
    GridMdp grid_mdp(model, 16, 16);
    auto disc = solve_mf_discounted(grid_mdp, 1.0 - std::pow(2.0, -7), 1e-9);
    REQUIRE(disc.converged);

    Vec diffs;
    for (int n : {2, 4}) {
        auto mdp = build_lifted_mdp(model, n);
        auto oracle = solve_oracle(mdp);
        auto eval = evaluate_symmetric_on_finite(model, disc.policy, n);
        const long balanced = mdp.state_index(std::vector<int>(2, n / 2));
        diffs.push_back(std::abs(eval.values[balanced] - oracle.gain));
    }
    CHECK(diffs[1] <= diffs[0] + 1e-3);
}
