#include "mfc/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfc {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    if (2 * k > n) k = n - k;
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

static void fill_compositions(int remaining, int slots, std::vector<int>& prefix,
                              std::vector<std::vector<int>>& out) {
    if (slots == 1) {
        prefix.push_back(remaining);
        out.push_back(prefix);
        prefix.pop_back();
        return;
    }
    for (int c = remaining; c >= 0; --c) {
        prefix.push_back(c);
        fill_compositions(remaining - c, slots - 1, prefix, out);
        prefix.pop_back();
    }
}

std::vector<EmpiricalMeasure> enumerate_empirical(int population, int num_states,
                                                  const Budgets& budgets) {
    if (population < 1 || num_states < 1)
        throw std::invalid_argument("enumerate_empirical: population and num_states must be >= 1");
    const std::uint64_t total = binomial(population + num_states - 1, num_states - 1);
    if (total > budgets.max_enumeration)
        throw CapacityError("enumerate_empirical exceeds the enumeration budget", total);

    std::vector<std::vector<int>> raw;
    raw.reserve(total);
    std::vector<int> prefix;
    fill_compositions(population, num_states, prefix, raw);

    std::vector<EmpiricalMeasure> out;
    out.reserve(raw.size());
    for (auto& c : raw) out.push_back({std::move(c), population});
    return out;
}

std::vector<JointEmpiricalMeasure> admissible_actions(const EmpiricalMeasure& mu, int num_actions,
                                                      const Budgets& budgets) {
    const int num_states = static_cast<int>(mu.counts.size());
    std::uint64_t total = 1;
    for (int x = 0; x < num_states; ++x) {
        total *= binomial(mu.counts[x] + num_actions - 1, num_actions - 1);
        if (total > budgets.max_enumeration)
            throw CapacityError("admissible_actions exceeds the enumeration budget", total);
    }

    // Per-state composition lists, then their cartesian product with state 0
    // most significant.
    std::vector<std::vector<std::vector<int>>> per_state(num_states);
    for (int x = 0; x < num_states; ++x) {
        std::vector<int> prefix;
        fill_compositions(mu.counts[x], num_actions, prefix, per_state[x]);
    }

    std::vector<JointEmpiricalMeasure> out;
    out.reserve(total);
    std::vector<int> choice(num_states, 0);
    while (true) {
        JointEmpiricalMeasure theta{std::vector<int>(num_states * num_actions, 0), num_actions,
                                    mu.population};
        for (int x = 0; x < num_states; ++x)
            for (int u = 0; u < num_actions; ++u)
                theta.count(x, u) = per_state[x][choice[x]][u];
        out.push_back(std::move(theta));

        int pos = num_states - 1;
        while (pos >= 0) {
            if (++choice[pos] < static_cast<int>(per_state[pos].size())) break;
            choice[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return out;
}

long rank_of_counts(const std::vector<int>& counts, int population) {
    // Counts are enumerated with the first coordinate decreasing; the rank is
    // the number of enumerated vectors preceding `counts`.
    const int k = static_cast<int>(counts.size());
    long rank = 0;
    int remaining = population;
    for (int i = 0; i + 1 < k; ++i) {
        if (counts[i] < 0 || counts[i] > remaining) return -1;
        // vectors whose i-th entry exceeds counts[i], given `remaining`
        for (int c = remaining; c > counts[i]; --c)
            rank += static_cast<long>(binomial(remaining - c + k - i - 2, k - i - 2));
        remaining -= counts[i];
    }
    if (counts[k - 1] != remaining) return -1;
    return rank;
}

double wasserstein1(const Vec& p, const Vec& q, const Mat& metric) {
    const std::size_t n = p.size();
    if (q.size() != n || metric.size() != n)
        throw std::invalid_argument("wasserstein1: dimension mismatch");
    for (const auto& row : metric)
        if (row.size() != n) throw std::invalid_argument("wasserstein1: dimension mismatch");

    // Net excess/deficit reduction: mass shared between p and q stays put at
    // zero cost because the ground cost is a metric.
    std::vector<int> sources, sinks;
    Vec supply(n, 0.0), demand(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double net = p[i] - q[i];
        if (net > 0) {
            supply[i] = net;
            sources.push_back(static_cast<int>(i));
        } else if (net < 0) {
            demand[i] = -net;
            sinks.push_back(static_cast<int>(i));
        }
    }
    if (sources.empty()) return 0.0;

    const int ns = static_cast<int>(sources.size());
    const int nt = static_cast<int>(sinks.size());
    Mat flow(ns, Vec(nt, 0.0));
    double cost = 0.0;
    double total_left = 0.0;
    for (int s = 0; s < ns; ++s) total_left += supply[sources[s]];
    const double dust = 1e-15 * total_left;

    // Successive shortest augmenting paths over the residual bipartite graph.
    // Nodes: 0..ns-1 sources, ns..ns+nt-1 sinks. Dijkstra on reduced costs
    // with node potentials; settling each node once keeps the parent
    // structure acyclic, and the potentials keep reduced costs nonnegative
    // up to round-off (clamped below).
    const int V = ns + nt;
    Vec potential(V, 0.0);
    int guard = 4 * V * V + 16;
    while (total_left > dust && guard-- > 0) {
        Vec dist(V, std::numeric_limits<double>::infinity());
        std::vector<int> parent(V, -1);
        std::vector<bool> settled(V, false);
        for (int s = 0; s < ns; ++s)
            if (supply[sources[s]] > dust) dist[s] = 0.0;
        for (int round = 0; round < V; ++round) {
            int u = -1;
            for (int v = 0; v < V; ++v)
                if (!settled[v] && std::isfinite(dist[v]) && (u < 0 || dist[v] < dist[u])) u = v;
            if (u < 0) break;
            settled[u] = true;
            if (u < ns) {
                for (int t = 0; t < nt; ++t) {
                    const double rc = std::max(
                        metric[sources[u]][sinks[t]] + potential[u] - potential[ns + t], 0.0);
                    if (dist[u] + rc < dist[ns + t]) {
                        dist[ns + t] = dist[u] + rc;
                        parent[ns + t] = u;
                    }
                }
            } else {
                const int t = u - ns;
                for (int s = 0; s < ns; ++s) {
                    if (flow[s][t] <= dust) continue;
                    const double rc =
                        std::max(-metric[sources[s]][sinks[t]] + potential[u] - potential[s], 0.0);
                    if (dist[u] + rc < dist[s]) {
                        dist[s] = dist[u] + rc;
                        parent[s] = u;
                    }
                }
            }
        }

        // Closest reachable sink with remaining demand.
        int best = -1;
        for (int t = 0; t < nt; ++t) {
            if (demand[sinks[t]] <= dust) continue;
            if (!std::isfinite(dist[ns + t])) continue;
            if (best < 0 || dist[ns + t] < dist[ns + best]) best = t;
        }
        if (best < 0) break;
        for (int v = 0; v < V; ++v)
            if (std::isfinite(dist[v])) potential[v] += std::min(dist[v], dist[ns + best]);

        // Walk parents to find the bottleneck, then augment. Forward arcs
        // (source -> sink) are uncapacitated; the path start's supply and the
        // flow on every backward arc cap the push.
        double push = demand[sinks[best]];
        for (int node = ns + best; parent[node] != -1; node = parent[node]) {
            const int prev = parent[node];
            if (node >= ns) {
                if (parent[prev] == -1) push = std::min(push, supply[sources[prev]]);
            } else {
                push = std::min(push, flow[node][prev - ns]);
            }
        }

        int node = ns + best;
        while (parent[node] != -1) {
            const int prev = parent[node];
            if (node >= ns) {
                flow[prev][node - ns] += push;
                cost += push * metric[sources[prev]][sinks[node - ns]];
            } else {
                flow[node][prev - ns] -= push;
                cost -= push * metric[sources[node]][sinks[prev - ns]];
            }
            node = prev;
        }
        supply[sources[node]] -= push;
        demand[sinks[best]] -= push;
        total_left -= push;
    }
    return cost;
}

std::pair<Vec, ConditionalKernel> disintegrate(const Vec& joint, int num_states, int num_actions) {
    if (static_cast<int>(joint.size()) != num_states * num_actions)
        throw std::invalid_argument("disintegrate: dimension mismatch");
    Vec marginal(num_states, 0.0);
    for (int x = 0; x < num_states; ++x)
        for (int u = 0; u < num_actions; ++u) marginal[x] += joint[x * num_actions + u];

    ConditionalKernel kernel;
    kernel.rows.assign(num_states, Vec(num_actions, 0.0));
    kernel.support_marks.assign(num_states, false);
    for (int x = 0; x < num_states; ++x) {
        if (marginal[x] > 0.0) {
            for (int u = 0; u < num_actions; ++u)
                kernel.rows[x][u] = joint[x * num_actions + u] / marginal[x];
        } else {
            std::fill(kernel.rows[x].begin(), kernel.rows[x].end(), 1.0 / num_actions);
            kernel.support_marks[x] = true;
        }
    }
    return {marginal, kernel};
}

void validate_metric(const Mat& metric, const std::string& name) {
    const std::size_t n = metric.size();
    for (const auto& row : metric)
        if (row.size() != n) throw ParseError(name + ": metric matrix is not square");
    for (std::size_t i = 0; i < n; ++i) {
        if (metric[i][i] != 0.0) throw ParseError(name + ": nonzero diagonal entry");
        for (std::size_t j = 0; j < n; ++j) {
            if (metric[i][j] < 0.0) throw ParseError(name + ": negative distance");
            if (i != j && metric[i][j] == 0.0)
                throw ParseError(name + ": zero distance between distinct points");
            if (metric[i][j] != metric[j][i]) throw ParseError(name + ": asymmetric distance");
            for (std::size_t k = 0; k < n; ++k)
                if (metric[i][j] > metric[i][k] + metric[k][j] + 1e-12)
                    throw ParseError(name + ": triangle inequality violated");
        }
    }
}

}  // namespace mfc
