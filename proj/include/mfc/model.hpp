#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfc/common.hpp"
#include "mfc/measures.hpp"

namespace mfc {

/// Finite noise law. Values are the integer codes seen by deterministic
/// transition expressions; they default to 0..K-1.
struct NoiseLaw {
    std::vector<long> values;
    Vec probs;
    int size() const { return static_cast<int>(probs.size()); }
};

enum class TransitionFlavor { Tabular, Affine, Deterministic };

/// Validated agent-level model: finite state/action sets with metrics, finite
/// idiosyncratic and common noise, a transition rule, and a stage cost.
///
/// All three transition flavors are affine (or constant) in the mean-field
/// argument, so simplex-vertex checks of row properties are exact.
class AgentModel {
public:
    std::vector<std::string> state_labels;
    std::vector<std::string> action_labels;
    Mat metric_x;
    Mat metric_u;
    NoiseLaw idio_noise;
    NoiseLaw common_noise;

    TransitionFlavor flavor = TransitionFlavor::Tabular;
    std::string source_hash;  // digest of the canonical model document

    int num_states() const { return static_cast<int>(state_labels.size()); }
    int num_actions() const { return static_cast<int>(action_labels.size()); }

    /// Next-state distribution given (x, u, mu) and the common-noise atom,
    /// idiosyncratic noise integrated out.
    Vec kernel_row(int x, int u, const Vec& mu, int w0) const;

    /// Stage cost c(x, u, mu).
    double cost(int x, int u, const Vec& mu) const;

    bool has_cost_table() const { return !cost_table_.empty(); }
    bool has_w1_cost() const { return !w1_target_.empty(); }
    const Vec& w1_target() const { return w1_target_; }

    /// Affine-flavor vertex kernels: row at mu = delta_y (identical to the
    /// base row for the mu-independent flavors).
    Vec vertex_row(int y, int w0, int x, int u) const;

    friend AgentModel load_model(const nlohmann::json& doc);

private:
    // base_rows_[w0][x][u] for tabular / deterministic;
    // vertex_rows_[y][w0][x][u] for affine.
    std::vector<std::vector<Mat>> base_rows_;
    std::vector<std::vector<std::vector<Mat>>> vertex_rows_;
    Mat cost_table_;
    Vec w1_target_;
};

/// Parse and validate a model document. Throws ParseError naming the
/// offending field on any schema or stochasticity violation.
AgentModel load_model(const nlohmann::json& doc);
AgentModel load_model_file(const std::string& path);

/// Uniform lower bound certificate for the agent kernel over a positive-mass
/// common-noise event. alpha(N) is the induced span contraction factor of the
/// anchored average-cost operator on the N-agent lift.
struct MinorizationCertificate {
    Vec pi;
    std::vector<int> noise_atoms;  // indices into the common-noise support
    double mass = 0.0;             // pi(X)
    double p_event = 0.0;          // probability of the atom set
    bool exact = true;             // vertex check is exact for all shipped flavors
    double alpha(int population) const {
        return 1.0 - p_event * std::pow(mass, population);
    }
};

/// Search all nonempty common-noise atom subsets for the certificate
/// maximizing p_event * pi(X); empty result when that product is zero
/// everywhere. Minima over the mean-field argument are taken at simplex
/// vertices, which is exact because every rule flavor is affine in mu.
std::optional<MinorizationCertificate> check_minorization(const AgentModel& model);

/// Certified lower bounds on the kernel and cost Lipschitz constants, from
/// probed difference quotients (exact for affine rules, where the maximizing
/// pairs lie on simplex vertices).
struct LipschitzReport {
    double k_transition = 0.0;  // kernel W1 quotient bound
    double k_cost = 0.0;
    bool satisfies_contraction = false;  // 2 * k_transition < 1
    long probe_count = 0;
};

LipschitzReport estimate_lipschitz(const AgentModel& model, int samples, std::uint64_t seed,
                                   int grid_resolution = 3);

}  // namespace mfc
