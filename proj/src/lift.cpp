#include "mfc/lift.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "mfc/rng.hpp"

namespace mfc {

std::uint64_t LiftedMdp::total_policies() const {
    std::uint64_t total = 1;
    for (const auto& acts : actions) {
        const std::uint64_t k = std::max<std::uint64_t>(acts.size(), 1);
        if (total > (UINT64_MAX / 2) / k) return UINT64_MAX / 2;
        total *= k;
    }
    return total;
}

std::pair<std::vector<int>, std::vector<int>> representative_vector(
    const JointEmpiricalMeasure& theta) {
    std::vector<int> xs, us;
    xs.reserve(theta.population);
    us.reserve(theta.population);
    for (int x = 0; x < theta.num_states(); ++x)
        for (int u = 0; u < theta.num_actions; ++u)
            for (int c = 0; c < theta.count(x, u); ++c) {
                xs.push_back(x);
                us.push_back(u);
            }
    return {xs, us};
}

SparseRow exact_lifted_row(const AgentModel& model, std::vector<int> xs, std::vector<int> us,
                           const Vec& mu_probs) {
    const int n_agents = static_cast<int>(xs.size());
    const int nx = model.num_states();
    const int nw0 = model.common_noise.size();

    // Canonical agent order: permutations of the input produce bitwise
    // identical rows, which is the exchangeability of the lift.
    std::vector<int> order(n_agents);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::pair(xs[a], us[a]) < std::pair(xs[b], us[b]);
    });
    std::vector<int> sx(n_agents), su(n_agents);
    for (int i = 0; i < n_agents; ++i) {
        sx[i] = xs[order[i]];
        su[i] = us[order[i]];
    }

    // Agents are conditionally independent given the common noise, so each
    // atom contributes a product kernel, accumulated by a dynamic program
    // over partial count vectors.
    std::map<int, double> accum;  // lifted-state rank -> probability
    for (int w0 = 0; w0 < nw0; ++w0) {
        const double pw0 = model.common_noise.probs[w0];
        if (pw0 == 0.0) continue;
        std::map<std::vector<int>, double> dist;
        dist[std::vector<int>(nx, 0)] = 1.0;
        for (int i = 0; i < n_agents; ++i) {
            const Vec row = model.kernel_row(sx[i], su[i], mu_probs, w0);
            std::map<std::vector<int>, double> next;
            for (const auto& [counts, p] : dist) {
                for (int y = 0; y < nx; ++y) {
                    if (row[y] == 0.0) continue;
                    std::vector<int> c = counts;
                    ++c[y];
                    next[std::move(c)] += p * row[y];
                }
            }
            dist = std::move(next);
        }
        for (const auto& [counts, p] : dist)
            accum[static_cast<int>(rank_of_counts(counts, n_agents))] += pw0 * p;
    }

    return SparseRow(accum.begin(), accum.end());
}

SparseRow sampled_lifted_row(const AgentModel& model, const std::vector<int>& xs,
                             const std::vector<int>& us, const Vec& mu_probs, long samples,
                             std::uint64_t seed) {
    if (samples < 1) throw std::invalid_argument("sampled_lifted_row: samples must be >= 1");
    const int n_agents = static_cast<int>(xs.size());
    const int nx = model.num_states();
    const int nw0 = model.common_noise.size();

    // Cache rows for the distinct (x, u, w0) triples present.
    std::map<std::pair<int, int>, std::vector<Vec>> rows;
    for (int i = 0; i < n_agents; ++i) {
        const auto key = std::pair(xs[i], us[i]);
        if (rows.count(key)) continue;
        std::vector<Vec> per_atom(nw0);
        for (int w0 = 0; w0 < nw0; ++w0)
            per_atom[w0] = model.kernel_row(xs[i], us[i], mu_probs, w0);
        rows.emplace(key, std::move(per_atom));
    }

    Rng rng(seed);
    std::map<int, double> accum;
    std::vector<int> counts(nx);
    for (long s = 0; s < samples; ++s) {
        const int w0 = rng.sample(model.common_noise.probs);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n_agents; ++i)
            ++counts[rng.sample(rows.at(std::pair(xs[i], us[i]))[w0])];
        accum[static_cast<int>(rank_of_counts(counts, n_agents))] += 1.0;
    }
    SparseRow out;
    out.reserve(accum.size());
    for (const auto& [idx, c] : accum) out.emplace_back(idx, c / samples);
    return out;
}

LiftedMdp build_lifted_mdp(const AgentModel& model, int population, const LiftOptions& opts) {
    if (population < 1) throw std::invalid_argument("build_lifted_mdp: population must be >= 1");
    LiftedMdp mdp;
    mdp.population = population;
    mdp.num_agent_states = model.num_states();
    mdp.num_agent_actions = model.num_actions();
    mdp.model_hash = model.source_hash;
    mdp.states = enumerate_empirical(population, model.num_states(), opts.budgets);

    const int S = mdp.num_states();
    mdp.actions.resize(S);
    mdp.kernel.resize(S);
    mdp.cost.resize(S);

    std::uint64_t pair_count = 0;
    for (int s = 0; s < S; ++s) {
        mdp.actions[s] = admissible_actions(mdp.states[s], model.num_actions(), opts.budgets);
        pair_count += mdp.actions[s].size();
    }
    if (!opts.monte_carlo) {
        // DP work per row ~ population * |partial counts| * |X| * |W0|.
        const std::uint64_t per_row =
            static_cast<std::uint64_t>(population) *
            binomial(population + model.num_states() - 1, model.num_states() - 1) *
            model.num_states() * model.common_noise.size();
        if (pair_count * per_row > opts.max_exact_work)
            throw CapacityError("exact lift exceeds the work budget; use Monte Carlo mode",
                                pair_count * per_row);
    }

#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < S; ++s) {
        const Vec mu = mdp.states[s].probabilities();
        const int A = mdp.num_actions(s);
        mdp.kernel[s].resize(A);
        mdp.cost[s].assign(A, 0.0);
        for (int a = 0; a < A; ++a) {
            const auto& theta = mdp.actions[s][a];
            auto [xs, us] = representative_vector(theta);
            if (opts.monte_carlo) {
                const std::uint64_t stream = (static_cast<std::uint64_t>(s) << 20) | a;
                mdp.kernel[s][a] =
                    sampled_lifted_row(model, xs, us, mu, opts.samples, Rng::derive(opts.seed, stream));
            } else {
                mdp.kernel[s][a] = exact_lifted_row(model, xs, us, mu);
            }
            double k = 0.0;
            for (int x = 0; x < theta.num_states(); ++x)
                for (int u = 0; u < theta.num_actions; ++u)
                    if (theta.count(x, u) > 0)
                        k += static_cast<double>(theta.count(x, u)) / population *
                             model.cost(x, u, mu);
            mdp.cost[s][a] = k;
        }
    }
    return mdp;
}

void save_lifted_mdp(const LiftedMdp& mdp, const std::string& path) {
    nlohmann::json doc;
    doc["format"] = "mfc-lift-v1";
    doc["model_hash"] = mdp.model_hash;
    doc["population"] = mdp.population;
    doc["num_agent_states"] = mdp.num_agent_states;
    doc["num_agent_actions"] = mdp.num_agent_actions;
    nlohmann::json kernel = nlohmann::json::array();
    nlohmann::json cost = nlohmann::json::array();
    for (int s = 0; s < mdp.num_states(); ++s) {
        nlohmann::json krows = nlohmann::json::array();
        for (const auto& row : mdp.kernel[s]) {
            nlohmann::json entries = nlohmann::json::array();
            for (const auto& [idx, p] : row) entries.push_back({idx, p});
            krows.push_back(std::move(entries));
        }
        kernel.push_back(std::move(krows));
        cost.push_back(mdp.cost[s]);
    }
    doc["kernel"] = std::move(kernel);
    doc["cost"] = std::move(cost);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write lift cache: " + path);
    out << doc.dump();
}

LiftedMdp load_lifted_mdp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open lift cache: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ParseError(std::string("lift cache is not valid JSON: ") + e.what());
    }
    if (!doc.contains("format") || doc["format"] != "mfc-lift-v1")
        throw ParseError("lift cache: unknown format tag");

    LiftedMdp mdp;
    mdp.model_hash = doc.at("model_hash").get<std::string>();
    mdp.population = doc.at("population").get<int>();
    mdp.num_agent_states = doc.at("num_agent_states").get<int>();
    mdp.num_agent_actions = doc.at("num_agent_actions").get<int>();
    mdp.states = enumerate_empirical(mdp.population, mdp.num_agent_states);
    const int S = mdp.num_states();
    mdp.actions.resize(S);
    for (int s = 0; s < S; ++s)
        mdp.actions[s] = admissible_actions(mdp.states[s], mdp.num_agent_actions);

    const auto& kernel = doc.at("kernel");
    const auto& cost = doc.at("cost");
    if (static_cast<int>(kernel.size()) != S || static_cast<int>(cost.size()) != S)
        throw ParseError("lift cache: state count mismatch");
    mdp.kernel.resize(S);
    mdp.cost.resize(S);
    for (int s = 0; s < S; ++s) {
        const int A = mdp.num_actions(s);
        if (static_cast<int>(kernel[s].size()) != A || static_cast<int>(cost[s].size()) != A)
            throw ParseError("lift cache: action count mismatch at state " + std::to_string(s));
        mdp.kernel[s].resize(A);
        mdp.cost[s].resize(A);
        for (int a = 0; a < A; ++a) {
            for (const auto& e : kernel[s][a])
                mdp.kernel[s][a].emplace_back(e[0].get<int>(), e[1].get<double>());
            mdp.cost[s][a] = cost[s][a].get<double>();
        }
    }
    return mdp;
}

Mat joint_ground_metric(const AgentModel& model) {
    const int nx = model.num_states();
    const int nu = model.num_actions();
    Mat d(nx * nu, Vec(nx * nu, 0.0));
    for (int x = 0; x < nx; ++x)
        for (int u = 0; u < nu; ++u)
            for (int x2 = 0; x2 < nx; ++x2)
                for (int u2 = 0; u2 < nu; ++u2)
                    d[x * nu + u][x2 * nu + u2] = model.metric_x[x][x2] + model.metric_u[u][u2];
    return d;
}

long vector_state_index(const std::vector<int>& agent_states, int num_agent_states) {
    long idx = 0;
    for (int x : agent_states) idx = idx * num_agent_states + x;
    return idx;
}

std::vector<double> tv_marginal_contraction_probe(const AgentModel& model, int population,
                                                  const std::vector<int>& policy,
                                                  const Vec& initial_a, const Vec& initial_b,
                                                  int steps, const Budgets& budgets) {
    const int nx = model.num_states();
    const double vs = std::pow(static_cast<double>(nx), population);
    if (vs > static_cast<double>(budgets.max_vector_states))
        throw CapacityError("vector-state space too large for the contraction probe",
                            static_cast<std::uint64_t>(vs));
    const long V = static_cast<long>(vs);
    if (static_cast<long>(initial_a.size()) != V || static_cast<long>(initial_b.size()) != V)
        throw std::invalid_argument("tv probe: initial laws must live on the vector-state space");

    auto states = enumerate_empirical(population, nx, budgets);
    if (policy.size() != states.size())
        throw std::invalid_argument("tv probe: policy must assign an action per lifted state");

    // Dense vector-state transition matrix under canonically assigned agent
    // actions: agents sorted by state receive the action multiset of their
    // state's row in action order.
    Mat P(V, Vec(V, 0.0));
    std::vector<int> xs(population), us(population);
    for (long v = 0; v < V; ++v) {
        long rem = v;
        for (int i = population - 1; i >= 0; --i) {
            xs[i] = static_cast<int>(rem % nx);
            rem /= nx;
        }
        std::vector<int> counts(nx, 0);
        for (int x : xs) ++counts[x];
        const long s = rank_of_counts(counts, population);
        const auto acts = admissible_actions(states[s], model.num_actions(), budgets);
        const auto& theta = acts[policy[s]];

        std::vector<int> slot_order(population);
        std::iota(slot_order.begin(), slot_order.end(), 0);
        std::stable_sort(slot_order.begin(), slot_order.end(),
                         [&](int a, int b) { return xs[a] < xs[b]; });
        {
            int pos = 0;
            for (int x = 0; x < theta.num_states(); ++x)
                for (int u = 0; u < theta.num_actions; ++u)
                    for (int c = 0; c < theta.count(x, u); ++c) us[slot_order[pos++]] = u;
        }

        const Vec mu = states[s].probabilities();
        for (int w0 = 0; w0 < model.common_noise.size(); ++w0) {
            const double pw0 = model.common_noise.probs[w0];
            if (pw0 == 0.0) continue;
            std::vector<Vec> rows(population);
            for (int i = 0; i < population; ++i) rows[i] = model.kernel_row(xs[i], us[i], mu, w0);
            std::vector<int> ys(population, 0);
            while (true) {
                double p = pw0;
                for (int i = 0; i < population; ++i) p *= rows[i][ys[i]];
                if (p != 0.0) P[v][vector_state_index(ys, nx)] += p;
                int pos = population - 1;
                while (pos >= 0 && ++ys[pos] == nx) ys[pos--] = 0;
                if (pos < 0) break;
            }
        }
    }

    auto l1 = [V](const Vec& f, const Vec& g) {
        double d = 0.0;
        for (long v = 0; v < V; ++v) d += std::abs(f[v] - g[v]);
        return d;
    };

    Vec pa = initial_a, pb = initial_b;
    std::vector<double> distances;
    distances.push_back(l1(pa, pb));
    for (int t = 0; t < steps; ++t) {
        Vec na(V, 0.0), nb(V, 0.0);
        for (long v = 0; v < V; ++v) {
            if (pa[v] != 0.0)
                for (long w = 0; w < V; ++w) na[w] += pa[v] * P[v][w];
            if (pb[v] != 0.0)
                for (long w = 0; w < V; ++w) nb[w] += pb[v] * P[v][w];
        }
        pa = std::move(na);
        pb = std::move(nb);
        distances.push_back(l1(pa, pb));
    }
    return distances;
}

}  // namespace mfc
