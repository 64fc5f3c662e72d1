// Acceptance suite: every criterion prints one PASS/FAIL line; the process
// exits with the number of failures. Each check pins its tolerance in place.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lp_oracle.hpp"
#include "mfc/avg_solver.hpp"
#include "mfc/disc_solver.hpp"
#include "mfc/lift.hpp"
#include "mfc/limits.hpp"
#include "mfc/meanfield.hpp"
#include "mfc/model.hpp"
#include "mfc/rng.hpp"
#include "test_models.hpp"

using namespace mfc;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& label) {
        if (!cond) {
            ok = false;
            detail << " [failed: " << label << "]";
        }
    }
};

// shared across criteria: the convergence sweep feeds both 8 and 9
struct Context {
    Vec lipschitz_jn;  // j for N = 2..6
    double lipschitz_jinf = 0.0;
    bool sweep_ready = false;
};

double run_seconds(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1 -----------------------------------------------------------------

bool criterion_spread_golden(Check& check) {
    const auto t0 = std::chrono::steady_clock::now();
    auto model = load_model(fixtures::spread_model());
    auto mdp = build_lifted_mdp(model, 2);
    auto oracle = solve_oracle(mdp);
    check.require(std::abs(oracle.gain) <= 1e-9, "|j*| <= 1e-9");

    const long s20 = mdp.state_index({2, 0});
    const long s02 = mdp.state_index({0, 2});
    const auto& theta20 = mdp.actions[s20][oracle.policy[s20]];
    const auto& theta02 = mdp.actions[s02][oracle.policy[s02]];
    check.require(theta20.count(0, 0) == 1 && theta20.count(0, 1) == 1,
                  "personalized split at (2,0)");
    check.require(theta02.count(1, 0) == 1 && theta02.count(1, 1) == 1,
                  "personalized split at (0,2)");

    // best state-independent symmetric randomization, exact chain analysis
    // over the parameter grid
    double best = std::numeric_limits<double>::infinity();
    Mat rows(mdp.num_states());
    for (int step = 0; step <= 1000; ++step) {
        const double p = step / 1000.0;
        for (int s = 0; s < mdp.num_states(); ++s) {
            rows[s].assign(mdp.num_actions(s), 0.0);
            for (int a = 0; a < mdp.num_actions(s); ++a) {
                const auto& theta = mdp.actions[s][a];
                double w = 1.0;
                for (int x = 0; x < theta.num_states(); ++x) {
                    const int n1 = theta.count(x, 1);
                    const int n0 = theta.count(x, 0);
                    double ways = 1.0;
                    for (int i = 0; i < n1; ++i)
                        ways = ways * static_cast<double>(n0 + n1 - i) / (i + 1);
                    w *= ways * std::pow(p, n1) * std::pow(1.0 - p, n0);
                }
                rows[s][a] = w;
            }
        }
        const Vec avg = evaluate_policy_average(mdp, rows);
        best = std::min(best, *std::max_element(avg.begin(), avg.end()));
    }
    check.require(std::abs(best - 0.25) <= 1e-9, "best symmetric randomization = 1/4");

    const double secs = run_seconds(t0);
    check.require(secs < 1.0, "runtime < 1 s");
    check.detail << " j*=" << oracle.gain << " best_symmetric=" << best << " (" << secs << "s)";
    return check.ok;
}

// --- 2 -----------------------------------------------------------------

bool criterion_span_contraction(Check& check) {
    const auto t0 = std::chrono::steady_clock::now();
    auto model = load_model(fixtures::certified_affine_model());
    auto cert = check_minorization(model);
    check.require(cert.has_value(), "certificate exists");
    if (!cert) return false;
    check.require(std::abs(cert->p_event - 0.3) <= 1e-12, "p(B) = 0.3");
    check.require(std::abs(cert->mass - 0.5) <= 1e-12, "pi(X) = 0.5");

    auto mdp = build_lifted_mdp(model, 2);
    const double bound = 0.925 + 1e-10;
    Rng rng(20240202);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Vec f(mdp.num_states()), g(mdp.num_states());
        for (double& x : f) x = 4.0 * (rng.next_double() - 0.5);
        for (double& x : g) x = 4.0 * (rng.next_double() - 0.5);
        const double before = span_diff(f, g);
        if (before < 1e-12) continue;
        const double after = span_diff(relative_T0(mdp, f, 0), relative_T0(mdp, g, 0));
        worst = std::max(worst, after / before);
    }
    check.require(worst <= bound, "span ratio <= 0.925 + 1e-10");
    const double secs = run_seconds(t0);
    check.require(secs < 10.0, "runtime < 10 s");
    check.detail << " max_ratio=" << worst << " (" << secs << "s)";
    return check.ok;
}

// --- 3 -----------------------------------------------------------------

bool criterion_acoe_residual(Check& check) {
    const std::vector<std::pair<std::string, nlohmann::json>> models = {
        {"certified", fixtures::certified_affine_model()},
        {"resetting", fixtures::resetting_model()},
        {"smooth", fixtures::lipschitz_model()},
    };
    const double tol = 1e-8;
    for (const auto& [name, doc] : models) {
        auto model = load_model(doc);
        auto cert = check_minorization(model);
        check.require(cert.has_value(), name + ": certificate exists");
        if (!cert) continue;
        for (int n : {2, 3}) {
            auto mdp = build_lifted_mdp(model, n);
            auto sol = solve_rvi(mdp, 0, tol);
            const std::string tag = name + " N=" + std::to_string(n);
            check.require(sol.converged, tag + ": converged");
            check.require(sol.residual <= 1e-6, tag + ": defect <= 1e-6");
            const double alpha = cert->alpha(n);
            const double span1 = sol.span_history.front();
            if (span1 > tol) {
                const long budget =
                    static_cast<long>(std::ceil(std::log(tol / span1) / std::log(alpha))) + 2;
                check.require(sol.iterations <= budget,
                              tag + ": iterations within the geometric budget");
            }
            const Vec avg = evaluate_policy_average(mdp, sol.policy);
            for (double g : avg)
                check.require(std::abs(g - sol.gain) <= 1e-5, tag + ": greedy matches j*");
        }
    }
    return check.ok;
}

// --- 4 -----------------------------------------------------------------

bool criterion_dual_methods(Check& check) {
    const std::vector<std::pair<std::string, nlohmann::json>> models = {
        {"certified", fixtures::certified_affine_model()},
        {"resetting", fixtures::resetting_model()},
        {"smooth", fixtures::lipschitz_model()},
    };
    for (const auto& [name, doc] : models) {
        auto model = load_model(doc);
        for (int n : {2, 3}) {
            auto mdp = build_lifted_mdp(model, n);
            if (mdp.total_policies() > 1000000) continue;
            const std::string tag = name + " N=" + std::to_string(n);
            auto oracle = solve_oracle(mdp);
            auto rvi = solve_rvi(mdp, 0, 1e-9);
            check.require(rvi.converged, tag + ": rvi converged");
            VanishingOptions opts;
            opts.tol = 1e-8;
            opts.k_max = 26;
            auto [vanish, trace] = vanishing_discount(mdp, 0, opts);
            check.require(std::abs(oracle.gain - rvi.gain) <= 1e-5, tag + ": oracle vs rvi");
            check.require(std::abs(vanish.gain - rvi.gain) <= 1e-5, tag + ": vanish vs rvi");
            check.require(std::abs(vanish.gain - oracle.gain) <= 1e-5, tag + ": vanish vs oracle");
        }
    }
    return check.ok;
}

// --- 5 -----------------------------------------------------------------

bool criterion_vanishing_monotone(Check& check) {
    const std::vector<std::pair<std::string, nlohmann::json>> models = {
        {"spread", fixtures::spread_model()},
        {"constant", fixtures::constant_cost_model()},
        {"certified", fixtures::certified_affine_model()},
        {"resetting", fixtures::resetting_model()},
        {"smooth", fixtures::lipschitz_model()},
    };
    for (const auto& [name, doc] : models) {
        auto model = load_model(doc);
        auto mdp = build_lifted_mdp(model, 2);
        VanishingOptions opts;
        opts.tol = 1e-8;
        opts.k_max = 26;
        opts.solve_tol = 1e-11;
        opts.stop_early = false;
        auto [avg, trace] = vanishing_discount(mdp, 0, opts);
        check.require(trace.j_estimates.size() >= 12, name + ": ladder reaches rung 12");
        if (trace.j_estimates.size() < 12) continue;
        for (std::size_t k = 2; k + 1 < 12; ++k) {
            const double d1 = std::abs(trace.j_estimates[k] - trace.j_estimates[k - 1]);
            const double d2 = std::abs(trace.j_estimates[k + 1] - trace.j_estimates[k]);
            check.require(d2 <= d1 + 1e-8,
                          name + ": |dj| monotone at k=" + std::to_string(k + 1));
        }
        // final vanishing value against the exhaustive oracle
        auto oracle = solve_oracle(mdp);
        check.require(std::abs(avg.gain - oracle.gain) <= 1e-5, name + ": final j within 1e-5");
    }
    return check.ok;
}

// --- 6 -----------------------------------------------------------------

bool criterion_transport_oracle(Check& check) {
    Rng rng(424242);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto metric = testoracle::random_metric(rng, 5);
        const Vec p = rng.simplex_point(5);
        const Vec q = rng.simplex_point(5);
        worst = std::max(worst,
                         std::abs(wasserstein1(p, q, metric) - testoracle::w1_lp(p, q, metric)));
    }
    check.require(worst <= 1e-9, "LP agreement within 1e-9 on 200 instances");
    check.detail << " max_lp_gap=" << worst;

    for (int n = 1; n <= 6; ++n) {
        const auto metric = testoracle::random_metric(rng, 4);
        for (int trial = 0; trial < 3; ++trial) {
            std::vector<int> xs(n), ys(n);
            Vec p(4, 0.0), q(4, 0.0);
            for (int i = 0; i < n; ++i) {
                xs[i] = static_cast<int>(rng.next_below(4));
                ys[i] = static_cast<int>(rng.next_below(4));
                p[xs[i]] += 1.0 / n;
                q[ys[i]] += 1.0 / n;
            }
            const double gap =
                std::abs(wasserstein1(p, q, metric) - testoracle::w1_matching(xs, ys, metric));
            check.require(gap <= 1e-9, "matching identity at N=" + std::to_string(n));
        }
    }
    return check.ok;
}

// --- 7 -----------------------------------------------------------------

bool criterion_exchangeability(Check& check) {
    Rng rng(777);
    for (const auto& doc : {fixtures::certified_affine_model(), fixtures::lipschitz_model()}) {
        auto model = load_model(doc);
        auto states = enumerate_empirical(4, 2);
        for (int trial = 0; trial < 25; ++trial) {
            const auto& mu = states[rng.next_below(states.size())];
            auto acts = admissible_actions(mu, 2);
            const auto& theta = acts[rng.next_below(acts.size())];
            auto [xs, us] = representative_vector(theta);
            const Vec probs = mu.probabilities();
            const auto canonical = exact_lifted_row(model, xs, us, probs);
            for (int shuffle = 0; shuffle < 10; ++shuffle) {
                auto px = xs;
                auto pu = us;
                for (std::size_t i = px.size(); i > 1; --i) {
                    const std::size_t j = rng.next_below(i);
                    std::swap(px[i - 1], px[j]);
                    std::swap(pu[i - 1], pu[j]);
                }
                check.require(exact_lifted_row(model, px, pu, probs) == canonical,
                              "permuted row identical");
            }
        }
    }
    return check.ok;
}

// --- 8 -----------------------------------------------------------------

bool criterion_value_convergence(Check& check, Context& ctx) {
    auto model = load_model(fixtures::lipschitz_model());
    SweepOptions opts;
    opts.populations = {2, 3, 4, 5, 6};
    opts.grid_resolution = 32;
    opts.vanish.tol = 1e-9;
    opts.vanish.k_max = 16;
    opts.vanish.stop_early = false;
    auto sweep = value_convergence_sweep(model, opts);
    ctx.lipschitz_jinf = sweep.j_inf;
    for (const auto& entry : sweep.entries) {
        check.require(entry.ok, "N=" + std::to_string(entry.population) + " solved");
        ctx.lipschitz_jn.push_back(entry.j);
    }
    ctx.sweep_ready = check.ok;
    const Vec gaps = sweep.gaps();
    for (std::size_t i = 0; i + 1 < gaps.size(); ++i)
        check.require(gaps[i + 1] <= gaps[i] + 1e-3,
                      "gap nonincreasing at N=" + std::to_string(opts.populations[i + 1]));
    check.detail << " j_inf=" << sweep.j_inf << " gaps=";
    for (double g : gaps) check.detail << g << " ";

    auto spread = load_model(fixtures::spread_model());
    SweepOptions sopts;
    sopts.populations = {2, 4, 6};
    sopts.grid_resolution = 32;
    sopts.vanish.tol = 1e-9;
    sopts.vanish.k_max = 16;
    auto ssweep = value_convergence_sweep(spread, sopts);
    for (std::size_t i = 0; i < ssweep.entries.size(); ++i) {
        check.require(ssweep.entries[i].ok, "spread solved");
        check.require(std::abs(ssweep.entries[i].j - ssweep.j_inf) == 0.0,
                      "spread gap exactly 0 at N=" +
                          std::to_string(ssweep.entries[i].population));
    }
    return check.ok;
}

// --- 9 -----------------------------------------------------------------

bool criterion_symmetric_near_optimality(Check& check, const Context& ctx) {
    check.require(ctx.sweep_ready, "sweep results available");
    if (!ctx.sweep_ready) return false;
    auto model = load_model(fixtures::lipschitz_model());
    GridMdp grid_mdp(model, 32, 32);
    const double beta = 1.0 - std::pow(2.0, -7);
    auto disc = solve_mf_discounted(grid_mdp, beta, 1e-10);
    check.require(disc.converged, "grid discounted solve converged");

    Vec diffs;
    for (int n : {2, 4, 6}) {
        auto mdp = build_lifted_mdp(model, n);
        auto eval = evaluate_symmetric_on_finite(model, disc.policy, n);
        const long balanced = mdp.state_index(std::vector<int>(2, n / 2));
        const double jn = ctx.lipschitz_jn[n - 2];
        diffs.push_back(std::abs(eval.values[balanced] - jn));
    }
    for (std::size_t i = 0; i + 1 < diffs.size(); ++i)
        check.require(diffs[i + 1] <= diffs[i] + 1e-3, "difference nonincreasing");
    check.detail << " diffs=";
    for (double d : diffs) check.detail << d << " ";
    return check.ok;
}

// --- 10 ----------------------------------------------------------------

bool criterion_flow_accumulation(Check& check) {
    const auto t0 = std::chrono::steady_clock::now();
    auto model = load_model(fixtures::spread_model());
    SymmetricPolicy policy;
    policy.grid_resolution = 8;
    policy.action_mesh = 8;
    policy.beta_tag = 0.0;
    auto grid = make_simplex_grid(8, model.metric_x);
    policy.rows.assign(grid.size(), Mat(2, Vec(2, 0.5)));  // the spreading mixture

    Vec at_t5;
    for (int n : {8, 16, 32, 64}) {
        FlowMcOptions opts;
        opts.population = n;
        opts.horizon = 6;
        opts.samples = 1000;
        opts.seed = 1234;
        auto ens = flow_distribution_mc(model, policy, opts);
        at_t5.push_back(ens.mean_w1[5]);
    }
    for (std::size_t i = 0; i + 1 < at_t5.size(); ++i)
        check.require(at_t5[i + 1] < at_t5[i], "mean W1 at t=5 decreasing");
    const double secs = run_seconds(t0);
    check.require(secs < 60.0, "runtime < 60 s");
    check.detail << " w1(t=5)=";
    for (double w : at_t5) check.detail << w << " ";
    check.detail << "(" << secs << "s)";
    return check.ok;
}

}  // namespace

int main() {
    Context ctx;
    struct Entry {
        int id;
        const char* name;
        std::function<bool(Check&)> run;
    };
    const std::vector<Entry> entries = {
        {1, "personalized spread optimum and the symmetric quarter",
         [](Check& c) { return criterion_spread_golden(c); }},
        {2, "anchored operator span contraction at the certified factor",
         [](Check& c) { return criterion_span_contraction(c); }},
        {3, "relative value iteration defect and iteration budget",
         [](Check& c) { return criterion_acoe_residual(c); }},
        {4, "oracle, iteration, and vanishing-discount agreement",
         [](Check& c) { return criterion_dual_methods(c); }},
        {5, "vanishing-discount estimates stabilize monotonically",
         [](Check& c) { return criterion_vanishing_monotone(c); }},
        {6, "transport solver against the LP and matching oracles",
         [](Check& c) { return criterion_transport_oracle(c); }},
        {7, "lifted rows are exchangeable under agent permutations",
         [](Check& c) { return criterion_exchangeability(c); }},
        {8, "finite-population values approach the grid value",
         [&ctx](Check& c) { return criterion_value_convergence(c, ctx); }},
        {9, "symmetric grid policies close in on the finite optimum",
         [&ctx](Check& c) { return criterion_symmetric_near_optimality(c, ctx); }},
        {10, "sampled joint measures accumulate on the limit flow",
         [](Check& c) { return criterion_flow_accumulation(c); }},
    };

    int failures = 0;
    for (const auto& entry : entries) {
        Check check;
        bool ok = false;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            ok = entry.run(check);
        } catch (const std::exception& e) {
            check.detail << " [exception: " << e.what() << "]";
            ok = false;
        }
        if (!ok) ++failures;
        std::printf("[%s] criterion %02d: %s%s (%.2fs)\n", ok ? "PASS" : "FAIL", entry.id,
                    entry.name, check.detail.str().c_str(), run_seconds(t0));
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(entries.size()) - failures,
                entries.size());
    return failures;
}
