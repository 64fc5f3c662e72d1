#include "mfc/chain.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

namespace mfc {

namespace {

constexpr double kEdgeTol = 1e-14;

/// Iterative Tarjan strongly-connected components. Returns per-state
/// component ids.
std::vector<int> strongly_connected_components(const Mat& P, int& num_components) {
    const int n = static_cast<int>(P.size());
    std::vector<int> index(n, -1), lowlink(n, 0), component(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    int next_index = 0;
    num_components = 0;

    struct Frame {
        int v;
        int next_child;
    };
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        std::vector<Frame> call_stack{{root, 0}};
        index[root] = lowlink[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call_stack.empty()) {
            auto& frame = call_stack.back();
            const int v = frame.v;
            bool descended = false;
            while (frame.next_child < n) {
                const int w = frame.next_child++;
                if (P[v][w] <= kEdgeTol) continue;
                if (index[w] == -1) {
                    index[w] = lowlink[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call_stack.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (on_stack[w]) lowlink[v] = std::min(lowlink[v], index[w]);
            }
            if (descended) continue;
            if (lowlink[v] == index[v]) {
                while (true) {
                    const int w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    component[w] = num_components;
                    if (w == v) break;
                }
                ++num_components;
            }
            call_stack.pop_back();
            if (!call_stack.empty()) {
                const int parent = call_stack.back().v;
                lowlink[parent] = std::min(lowlink[parent], lowlink[v]);
            }
        }
    }
    return component;
}

}  // namespace

ChainAnalysis analyze_chain(const Mat& P, const Vec& cost) {
    const int n = static_cast<int>(P.size());
    int num_components = 0;
    const auto component = strongly_connected_components(P, num_components);

    std::vector<bool> closed(num_components, true);
    for (int v = 0; v < n; ++v)
        for (int w = 0; w < n; ++w)
            if (P[v][w] > kEdgeTol && component[w] != component[v]) closed[component[v]] = false;

    ChainAnalysis out;
    out.gains.assign(n, 0.0);
    out.bias.assign(n, 0.0);

    int closed_count = 0;

    // Stationary distribution, gain, and bias per closed class.
    for (int c = 0; c < num_components; ++c) {
        if (!closed[c]) continue;
        ++closed_count;
        std::vector<int> members;
        for (int v = 0; v < n; ++v)
            if (component[v] == c) members.push_back(v);
        const int m = static_cast<int>(members.size());

        Eigen::MatrixXd A(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                A(i, j) = P[members[j]][members[i]] - (i == j ? 1.0 : 0.0);
        for (int j = 0; j < m; ++j) A(m - 1, j) = 1.0;  // normalization row
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
        b(m - 1) = 1.0;
        Eigen::VectorXd pi = A.fullPivLu().solve(b);

        double gain = 0.0;
        for (int i = 0; i < m; ++i) gain += pi(i) * cost[members[i]];
        for (int i = 0; i < m; ++i) out.gains[members[i]] = gain;

        // (I - P) h = c - gain, pinned by pi . h = 0.
        Eigen::MatrixXd B(m, m);
        Eigen::VectorXd d(m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j)
                B(i, j) = (i == j ? 1.0 : 0.0) - P[members[i]][members[j]];
            d(i) = cost[members[i]] - gain;
        }
        for (int j = 0; j < m; ++j) B(0, j) = pi(j);
        d(0) = 0.0;
        Eigen::VectorXd h = B.fullPivLu().solve(d);
        for (int i = 0; i < m; ++i) out.bias[members[i]] = h(i);
    }
    out.multichain = closed_count > 1;

    // Transient states: gains from absorption, bias from the one-step
    // recursion h = c - g + P h restricted to the transient block.
    std::vector<int> transient;
    for (int v = 0; v < n; ++v)
        if (!closed[component[v]]) transient.push_back(v);
    if (!transient.empty()) {
        const int t = static_cast<int>(transient.size());
        Eigen::MatrixXd IQ(t, t);
        Eigen::VectorXd rhs_gain(t), rhs_bias(t);
        for (int i = 0; i < t; ++i) {
            double gain_in = 0.0, bias_in = 0.0;
            for (int w = 0; w < n; ++w) {
                if (closed[component[w]]) {
                    gain_in += P[transient[i]][w] * out.gains[w];
                    bias_in += P[transient[i]][w] * out.bias[w];
                }
            }
            for (int j = 0; j < t; ++j)
                IQ(i, j) = (i == j ? 1.0 : 0.0) - P[transient[i]][transient[j]];
            rhs_gain(i) = gain_in;
            rhs_bias(i) = bias_in;
        }
        auto lu = IQ.fullPivLu();
        Eigen::VectorXd g = lu.solve(rhs_gain);
        for (int i = 0; i < t; ++i) out.gains[transient[i]] = g(i);
        for (int i = 0; i < t; ++i) rhs_bias(i) += cost[transient[i]] - g(i);
        Eigen::VectorXd h = lu.solve(rhs_bias);
        for (int i = 0; i < t; ++i) out.bias[transient[i]] = h(i);
    }
    return out;
}

}  // namespace mfc
