// Command-line driver for the mean-field average-cost toolkit: model checks,
// population lifts, average/discounted solvers, the simplex-grid limit
// problem, and the population-limit experiments. Every run writes a manifest
// (config echo, model hash, wall time) next to the command's CSV/JSON
// artifacts; with a fixed seed the CSV and result artifacts are byte
// identical across reruns.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfc/avg_solver.hpp"
#include "mfc/disc_solver.hpp"
#include "mfc/lift.hpp"
#include "mfc/limits.hpp"
#include "mfc/meanfield.hpp"
#include "mfc/model.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// exit codes: 0 ok, 2 usage, 3 unreadable file, 4 schema violation,
// 5 budget exceeded, 1 anything else
enum ExitCode { kOk = 0, kOther = 1, kUsage = 2, kFile = 3, kSchema = 4, kBudget = 5 };

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Output {
    std::filesystem::path dir;
    json manifest;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    explicit Output(const std::string& out_dir, const std::string& command) {
        dir = out_dir;
        std::filesystem::create_directories(dir);
        manifest["command"] = command;
        manifest["version"] = kVersion;
    }

    void write_json(const std::string& name, const json& doc) const {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw mfc::FileError("cannot write artifact: " + (dir / name).string());
        out << doc.dump(2) << '\n';
    }

    void write_csv(const std::string& name, const std::string& header,
                   const std::vector<std::vector<double>>& rows) const {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw mfc::FileError("cannot write artifact: " + (dir / name).string());
        out << header << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out << ',';
                out << format_double(row[i]);
            }
            out << '\n';
        }
    }

    void finish() {
        const auto wall =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                  started);
        manifest["wall_ms"] = wall.count();
        write_json("manifest.json", manifest);
    }
};

json policy_table(const mfc::LiftedMdp& mdp, const std::vector<int>& policy) {
    json rows = json::array();
    for (int s = 0; s < mdp.num_states(); ++s) {
        json row;
        row["state"] = mdp.states[s].counts;
        row["action"] = policy[s];
        row["joint_counts"] = mdp.actions[s][policy[s]].counts;
        rows.push_back(std::move(row));
    }
    return rows;
}

mfc::LiftedMdp load_cache_checked(const std::string& path) {
    auto mdp = mfc::load_lifted_mdp(path);
    if (mdp.model_hash.empty()) throw mfc::ParseError("lift cache: missing model hash");
    return mdp;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mean-field average-cost control toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string out_dir = std::getenv("MFC_OUT_DIR") ? std::getenv("MFC_OUT_DIR") : "out";
    std::uint64_t seed = 1;
    double tol = 1e-8;
    int threads = 0;
    std::uint64_t max_states = 2'000'000;
    app.add_option("--out", out_dir, "output directory for artifacts");
    app.add_option("--seed", seed, "seed for every randomized component");
    app.add_option("--tol", tol, "solver tolerance");
    app.add_option("--threads", threads, "cap worker threads (0: library default)");
    app.add_option("--max-states", max_states, "enumeration budget");

    // check-model
    auto* cmd_check = app.add_subcommand("check-model", "validate a model document");
    std::string model_path;
    int lipschitz_samples = 500;
    cmd_check->add_option("--model", model_path, "model file")->required();
    cmd_check->add_option("--samples", lipschitz_samples, "Lipschitz probe samples");

    // lift
    auto* cmd_lift = app.add_subcommand("lift", "build the measure-valued MDP of a population");
    std::string lift_model, lift_out = "lift.json";
    int lift_n = 2;
    long mc_samples = 0;
    cmd_lift->add_option("--model", lift_model, "model file")->required();
    cmd_lift->add_option("--N", lift_n, "population size")->required();
    cmd_lift->add_option("--mc", mc_samples, "Monte Carlo samples per row (0: exact)");
    cmd_lift->add_option("--cache", lift_out, "cache file name (within --out)");

    // solve-avg
    auto* cmd_avg = app.add_subcommand("solve-avg", "average-cost solve on a lift cache");
    std::string avg_cache, avg_method = "rvi";
    int avg_anchor = 0;
    long avg_max_iter = 200000;
    cmd_avg->add_option("--mdp", avg_cache, "lift cache file")->required();
    cmd_avg->add_option("--method", avg_method, "rvi | oracle")
        ->check(CLI::IsMember({"rvi", "oracle"}));
    cmd_avg->add_option("--anchor", avg_anchor, "anchor state index");
    cmd_avg->add_option("--max-iter", avg_max_iter, "iteration cap");

    // solve-disc
    auto* cmd_disc = app.add_subcommand("solve-disc", "discounted solve on a lift cache");
    std::string disc_cache;
    double disc_beta = 0.95;
    cmd_disc->add_option("--mdp", disc_cache, "lift cache file")->required();
    cmd_disc->add_option("--beta", disc_beta, "discount factor in (0,1)");

    // vanish
    auto* cmd_vanish = app.add_subcommand("vanish", "vanishing-discount ladder on a lift cache");
    std::string vanish_cache;
    int vanish_kmax = 20;
    cmd_vanish->add_option("--mdp", vanish_cache, "lift cache file")->required();
    cmd_vanish->add_option("--kmax", vanish_kmax, "last rung of beta = 1 - 2^-k");

    // mf-solve
    auto* cmd_mf = app.add_subcommand("mf-solve", "simplex-grid limit problem");
    std::string mf_model;
    int mf_grid = 16, mf_mesh = 0, mf_kmax = 20;
    double mf_beta = 0.95;
    bool mf_avg = false;
    cmd_mf->add_option("--model", mf_model, "model file")->required();
    cmd_mf->add_option("--grid", mf_grid, "simplex grid resolution");
    cmd_mf->add_option("--mesh", mf_mesh, "action lattice resolution (0: same as grid)");
    cmd_mf->add_option("--beta", mf_beta, "discount factor for the discounted solve");
    cmd_mf->add_flag("--avg", mf_avg, "solve the average-cost problem instead");
    cmd_mf->add_option("--kmax", mf_kmax, "ladder length for --avg");

    // limit-sweep
    auto* cmd_sweep = app.add_subcommand("limit-sweep", "finite-population values vs the grid value");
    std::string sweep_model;
    std::vector<int> sweep_ns{2, 3, 4};
    int sweep_grid = 32;
    cmd_sweep->add_option("--model", sweep_model, "model file")->required();
    cmd_sweep->add_option("--Ns", sweep_ns, "population sizes")->delimiter(',');
    cmd_sweep->add_option("--grid", sweep_grid, "grid resolution for the limit value");

    // eval-policy
    auto* cmd_eval = app.add_subcommand("eval-policy", "evaluate a symmetric policy on a population");
    std::string eval_model, eval_policy, eval_criterion = "avg";
    int eval_n = 4;
    double eval_beta = 0.9921875;
    cmd_eval->add_option("--model", eval_model, "model file")->required();
    cmd_eval->add_option("--policy", eval_policy, "policy artifact")->required();
    cmd_eval->add_option("--N", eval_n, "population size")->required();
    cmd_eval->add_option("--criterion", eval_criterion, "avg | disc")
        ->check(CLI::IsMember({"avg", "disc"}));
    cmd_eval->add_option("--beta", eval_beta, "discount for --criterion disc");

    // flow-mc
    auto* cmd_flow = app.add_subcommand("flow-mc", "sampled joint measures vs the limit flow");
    std::string flow_model, flow_policy;
    int flow_n = 32, flow_t = 50;
    long flow_samples = 1000;
    double flow_jinf = std::numeric_limits<double>::quiet_NaN();
    cmd_flow->add_option("--model", flow_model, "model file")->required();
    cmd_flow->add_option("--policy", flow_policy, "policy artifact")->required();
    cmd_flow->add_option("--N", flow_n, "population size");
    cmd_flow->add_option("--T", flow_t, "horizon");
    cmd_flow->add_option("--samples", flow_samples, "trajectories");
    cmd_flow->add_option("--jinf", flow_jinf,
                         "reference limit value; reports the time-averaged cost against it");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif

    mfc::Budgets budgets;
    budgets.max_enumeration = max_states;

    const std::string command = app.get_subcommands().front()->get_name();
    Output output(out_dir, command);
    json& cfg = output.manifest["config"];
    cfg["out"] = out_dir;
    cfg["seed"] = seed;
    cfg["tol"] = tol;
    cfg["threads"] = threads;
    cfg["max_states"] = max_states;

    try {
        if (*cmd_check) {
            cfg["model"] = model_path;
            cfg["samples"] = lipschitz_samples;
            auto model = mfc::load_model_file(model_path);
            output.manifest["model_hash"] = model.source_hash;

            json result;
            result["model_hash"] = model.source_hash;
            result["states"] = model.num_states();
            result["actions"] = model.num_actions();
            auto cert = mfc::check_minorization(model);
            if (cert) {
                result["minorization"] = {{"pi", cert->pi},
                                          {"noise_atoms", cert->noise_atoms},
                                          {"mass", cert->mass},
                                          {"p_event", cert->p_event},
                                          {"exact", cert->exact},
                                          {"alpha_2", cert->alpha(2)},
                                          {"alpha_8", cert->alpha(8)}};
            } else {
                result["minorization"] = nullptr;
            }
            auto lip = mfc::estimate_lipschitz(model, lipschitz_samples, seed);
            result["lipschitz"] = {{"k_transition", lip.k_transition},
                                   {"k_cost", lip.k_cost},
                                   {"satisfies_contraction", lip.satisfies_contraction},
                                   {"probe_count", lip.probe_count}};
            output.write_json("result.json", result);
        } else if (*cmd_lift) {
            cfg["model"] = lift_model;
            cfg["N"] = lift_n;
            cfg["mc"] = mc_samples;
            auto model = mfc::load_model_file(lift_model);
            output.manifest["model_hash"] = model.source_hash;
            mfc::LiftOptions opts;
            opts.budgets = budgets;
            if (mc_samples > 0) {
                opts.monte_carlo = true;
                opts.samples = mc_samples;
                opts.seed = seed;
            }
            auto mdp = mfc::build_lifted_mdp(model, lift_n, opts);
            mfc::save_lifted_mdp(mdp, (output.dir / lift_out).string());
            json result;
            result["model_hash"] = mdp.model_hash;
            result["population"] = mdp.population;
            result["num_lifted_states"] = mdp.num_states();
            result["total_policies"] = mdp.total_policies();
            result["cache"] = lift_out;
            output.write_json("result.json", result);
        } else if (*cmd_avg) {
            cfg["mdp"] = avg_cache;
            cfg["method"] = avg_method;
            cfg["anchor"] = avg_anchor;
            auto mdp = load_cache_checked(avg_cache);
            output.manifest["model_hash"] = mdp.model_hash;
            json result;
            result["model_hash"] = mdp.model_hash;
            result["method"] = avg_method;
            if (avg_method == "oracle") {
                auto sol = mfc::solve_oracle(mdp, budgets);
                result["gain"] = sol.gain;
                result["start_dependent"] = sol.start_dependent;
                result["policies_evaluated"] = sol.policies_evaluated;
                result["per_start"] = sol.per_start;
                result["policy"] = policy_table(mdp, sol.policy);
                std::vector<std::vector<double>> rows;
                for (std::size_t s = 0; s < sol.per_start.size(); ++s)
                    rows.push_back({static_cast<double>(s), sol.per_start[s], sol.bias[s]});
                output.write_csv("per_start.csv", "state,average_cost,bias", rows);
            } else {
                auto sol = mfc::solve_rvi(mdp, avg_anchor, tol, avg_max_iter);
                result["gain"] = sol.gain;
                result["residual"] = sol.residual;
                result["iterations"] = sol.iterations;
                result["converged"] = sol.converged;
                result["contraction_estimate"] = sol.contraction_estimate;
                result["relative_values"] = sol.relative_values;
                result["policy"] = policy_table(mdp, sol.policy);
                std::vector<std::vector<double>> rows;
                for (std::size_t k = 0; k < sol.span_history.size(); ++k)
                    rows.push_back({static_cast<double>(k + 1), sol.span_history[k]});
                output.write_csv("span.csv", "iteration,span_of_step", rows);
            }
            output.write_json("result.json", result);
        } else if (*cmd_disc) {
            cfg["mdp"] = disc_cache;
            cfg["beta"] = disc_beta;
            auto mdp = load_cache_checked(disc_cache);
            output.manifest["model_hash"] = mdp.model_hash;
            auto sol = mfc::solve_discounted(mdp, disc_beta, tol);
            json result;
            result["model_hash"] = mdp.model_hash;
            result["beta"] = sol.beta;
            result["residual"] = sol.sup_residual;
            result["iterations"] = sol.iterations;
            result["converged"] = sol.converged;
            result["values"] = sol.values;
            result["policy"] = policy_table(mdp, sol.policy);
            std::vector<std::vector<double>> rows;
            for (std::size_t s = 0; s < sol.values.size(); ++s)
                rows.push_back({static_cast<double>(s), sol.values[s]});
            output.write_csv("values.csv", "state,discounted_value", rows);
            output.write_json("result.json", result);
        } else if (*cmd_vanish) {
            cfg["mdp"] = vanish_cache;
            cfg["kmax"] = vanish_kmax;
            auto mdp = load_cache_checked(vanish_cache);
            output.manifest["model_hash"] = mdp.model_hash;
            mfc::VanishingOptions opts;
            opts.k_max = vanish_kmax;
            opts.tol = tol;
            auto [avg, trace] = mfc::vanishing_discount(mdp, 0, opts);
            json result;
            result["model_hash"] = mdp.model_hash;
            result["gain"] = avg.gain;
            result["residual"] = avg.residual;
            result["stabilized"] = trace.stabilized;
            result["rungs"] = trace.betas.size();
            result["policy"] = policy_table(mdp, avg.policy);
            std::vector<std::vector<double>> rows;
            for (std::size_t k = 0; k < trace.betas.size(); ++k)
                rows.push_back({trace.betas[k], trace.j_estimates[k], trace.rung_residuals[k],
                                static_cast<double>(trace.policy_changes[k])});
            output.write_csv("trace.csv", "beta,j_estimate,rung_residual,policy_changes", rows);
            output.write_json("result.json", result);
        } else if (*cmd_mf) {
            cfg["model"] = mf_model;
            cfg["grid"] = mf_grid;
            cfg["mesh"] = mf_mesh;
            cfg["beta"] = mf_beta;
            cfg["avg"] = mf_avg;
            cfg["kmax"] = mf_kmax;
            auto model = mfc::load_model_file(mf_model);
            output.manifest["model_hash"] = model.source_hash;
            const int mesh = mf_mesh > 0 ? mf_mesh : mf_grid;
            mfc::GridMdp grid_mdp(model, mf_grid, mesh, budgets);
            json result;
            result["model_hash"] = model.source_hash;
            result["grid"] = mf_grid;
            result["mesh"] = mesh;
            result["max_projection_displacement"] = grid_mdp.max_projection_displacement();
            if (mf_avg) {
                mfc::VanishingOptions opts;
                opts.k_max = mf_kmax;
                opts.tol = tol;
                auto sol = mfc::solve_mf_average(grid_mdp, 0, opts);
                result["gain"] = sol.gain;
                result["residual"] = sol.residual;
                result["stabilized"] = sol.converged;
                mfc::save_symmetric_policy(sol.policy, (output.dir / "mf_policy.json").string());
                std::vector<std::vector<double>> rows;
                for (std::size_t k = 0; k < sol.trace.betas.size(); ++k)
                    rows.push_back({sol.trace.betas[k], sol.trace.j_estimates[k],
                                    sol.trace.rung_residuals[k]});
                output.write_csv("trace.csv", "beta,j_estimate,rung_residual", rows);
            } else {
                auto sol = mfc::solve_mf_discounted(grid_mdp, mf_beta, tol);
                result["beta"] = sol.beta;
                result["residual"] = sol.sup_residual;
                result["iterations"] = sol.iterations;
                result["converged"] = sol.converged;
                mfc::save_symmetric_policy(sol.policy, (output.dir / "mf_policy.json").string());
                std::vector<std::vector<double>> rows;
                for (int g = 0; g < grid_mdp.num_states(); ++g) {
                    std::vector<double> row{static_cast<double>(g)};
                    for (double p : grid_mdp.grid().points[g]) row.push_back(p);
                    row.push_back(sol.values[g]);
                    rows.push_back(std::move(row));
                }
                output.write_csv("values.csv", "grid_index,point...,value", rows);
            }
            result["policy_artifact"] = "mf_policy.json";
            output.write_json("result.json", result);
        } else if (*cmd_sweep) {
            cfg["model"] = sweep_model;
            cfg["Ns"] = sweep_ns;
            cfg["grid"] = sweep_grid;
            auto model = mfc::load_model_file(sweep_model);
            output.manifest["model_hash"] = model.source_hash;
            mfc::SweepOptions opts;
            opts.populations = sweep_ns;
            opts.grid_resolution = sweep_grid;
            opts.vanish.tol = tol;
            opts.budgets = budgets;
            auto sweep = mfc::value_convergence_sweep(model, opts);
            json result;
            result["model_hash"] = model.source_hash;
            result["j_inf"] = sweep.j_inf;
            result["note"] =
                "j is the optimality-equation constant and start-independent; "
                "the sweep therefore carries no starting measure";
            json entries = json::array();
            std::vector<std::vector<double>> rows;
            for (const auto& e : sweep.entries) {
                entries.push_back({{"population", e.population},
                                   {"j", e.j},
                                   {"method", e.method},
                                   {"ok", e.ok},
                                   {"error", e.error}});
                if (e.ok)
                    rows.push_back({static_cast<double>(e.population), e.j,
                                    std::abs(e.j - sweep.j_inf)});
            }
            result["entries"] = std::move(entries);
            output.write_csv("sweep.csv", "population,j,gap", rows);
            output.write_json("result.json", result);
        } else if (*cmd_eval) {
            cfg["model"] = eval_model;
            cfg["policy"] = eval_policy;
            cfg["N"] = eval_n;
            cfg["criterion"] = eval_criterion;
            cfg["beta"] = eval_beta;
            auto model = mfc::load_model_file(eval_model);
            output.manifest["model_hash"] = model.source_hash;
            auto policy = mfc::load_symmetric_policy(eval_policy);
            mfc::SymmetricEvalOptions opts;
            opts.criterion = eval_criterion == "avg" ? mfc::EvalCriterion::Average
                                                     : mfc::EvalCriterion::Discounted;
            opts.beta = eval_beta;
            opts.budgets = budgets;
            opts.mc_seed = seed;
            auto eval = mfc::evaluate_symmetric_on_finite(model, policy, eval_n, opts);
            json result;
            result["model_hash"] = model.source_hash;
            result["population"] = eval_n;
            result["criterion"] = eval_criterion;
            result["method"] = eval.method;
            result["values"] = eval.values;
            result["standard_errors"] = eval.standard_errors;
            std::vector<std::vector<double>> rows;
            for (std::size_t s = 0; s < eval.values.size(); ++s)
                rows.push_back({static_cast<double>(s), eval.values[s], eval.standard_errors[s]});
            output.write_csv("values.csv", "start,value,standard_error", rows);
            output.write_json("result.json", result);
        } else if (*cmd_flow) {
            cfg["model"] = flow_model;
            cfg["policy"] = flow_policy;
            cfg["N"] = flow_n;
            cfg["T"] = flow_t;
            cfg["samples"] = flow_samples;
            auto model = mfc::load_model_file(flow_model);
            output.manifest["model_hash"] = model.source_hash;
            auto policy = mfc::load_symmetric_policy(flow_policy);
            mfc::FlowMcOptions opts;
            opts.population = flow_n;
            opts.horizon = flow_t;
            opts.samples = flow_samples;
            opts.seed = seed;
            auto ens = mfc::flow_distribution_mc(model, policy, opts);
            json result;
            result["model_hash"] = model.source_hash;
            result["population"] = ens.population;
            result["horizon"] = ens.horizon;
            result["samples"] = ens.samples;
            result["seed"] = ens.seed;
            result["mean_cost"] = ens.mean_cost;
            result["stderr_cost"] = ens.stderr_cost;
            result["mean_w1"] = ens.mean_w1;
            if (!std::isnan(flow_jinf)) {
                cfg["jinf"] = flow_jinf;
                result["jinf"] = flow_jinf;
                result["cost_minus_jinf"] = ens.mean_cost - flow_jinf;
            }
            std::vector<std::vector<double>> rows;
            for (int t = 0; t < ens.horizon; ++t)
                rows.push_back({static_cast<double>(t), ens.mean_w1[t]});
            output.write_csv("flow.csv", "t,mean_w1_to_limit", rows);
            output.write_json("result.json", result);
        }
    } catch (const mfc::CapacityError& e) {
        json err{{"error", {{"code", "budget"}, {"message", e.what()}}}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        output.write_json("error.json", err);
        return kBudget;
    } catch (const mfc::ParseError& e) {
        json err{{"error", {{"code", "schema"}, {"message", e.what()}}}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        output.write_json("error.json", err);
        return kSchema;
    } catch (const mfc::FileError& e) {
        json err{{"error", {{"code", "file"}, {"message", e.what()}}}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        output.write_json("error.json", err);
        return kFile;
    } catch (const std::exception& e) {
        json err{{"error", {{"code", "internal"}, {"message", e.what()}}}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        output.write_json("error.json", err);
        return kOther;
    }

    output.finish();
    return kOk;
}
