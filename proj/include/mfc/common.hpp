#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfc {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

/// Schema or content violation in a model document or artifact file.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Missing or unreadable/unwritable file.
class FileError : public std::runtime_error {
public:
    explicit FileError(const std::string& what) : std::runtime_error(what) {}
};

/// An enumeration or solve exceeds its configured budget. The message names
/// the offending count so callers can report it.
class CapacityError : public std::runtime_error {
public:
    CapacityError(const std::string& what, std::uint64_t count)
        : std::runtime_error(what + " (count " + std::to_string(count) + ")"), count(count) {}
    std::uint64_t count;
};

/// Enumeration and solver budgets, overridable from the CLI.
struct Budgets {
    std::uint64_t max_enumeration = 2'000'000;   // entries per enumeration call
    std::uint64_t max_oracle_policies = 1'000'000;
    std::uint64_t max_vector_states = 200'000;   // |X|^N for vector-state probes
};

inline double sup_norm(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double span(const Vec& v) {
    if (v.empty()) return 0.0;
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    return hi - lo;
}

inline double sup_diff(const Vec& a, const Vec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double span_diff(const Vec& a, const Vec& b) {
    Vec d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return span(d);
}

}  // namespace mfc
