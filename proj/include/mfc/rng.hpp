#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace mfc {

/// Deterministic 64-bit generator (splitmix64). Used everywhere randomness is
/// needed so that seeded runs are bit-reproducible across platforms; the
/// standard distributions are avoided because their output is
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    /// Index sampled from a probability vector (inverse CDF walk).
    int sample(const std::vector<double>& probs) {
        double u = next_double();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

    /// Random probability vector (normalized exponentials).
    std::vector<double> simplex_point(std::size_t n) {
        std::vector<double> p(n);
        double total = 0.0;
        for (auto& x : p) {
            double u = next_double();
            x = -std::log(1.0 - u);
            total += x;
        }
        for (auto& x : p) x /= total;
        return p;
    }

    /// Derive an independent stream, e.g. one per Monte Carlo trajectory.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
        Rng r(seed ^ (0xd1b54a32d192ed03ULL * (index + 1)));
        return r.next_u64();
    }

private:
    std::uint64_t state_;
};

}  // namespace mfc
