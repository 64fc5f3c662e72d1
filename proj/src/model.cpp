#include "mfc/model.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <memory>

#include "mfc/rng.hpp"

namespace mfc {

namespace {

using nlohmann::json;

double parse_number(const json& j, const std::string& field) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0')
            throw ParseError(field + ": not a decimal number: '" + s + "'");
        return v;
    }
    throw ParseError(field + ": expected a number or decimal string");
}

Vec parse_vector(const json& j, const std::string& field) {
    if (!j.is_array()) throw ParseError(field + ": expected an array");
    Vec v;
    v.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        v.push_back(parse_number(j[i], field + "[" + std::to_string(i) + "]"));
    return v;
}

Mat parse_matrix(const json& j, const std::string& field) {
    if (!j.is_array()) throw ParseError(field + ": expected an array of rows");
    Mat m;
    m.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        m.push_back(parse_vector(j[i], field + "[" + std::to_string(i) + "]"));
    return m;
}

void require_stochastic(const Vec& row, const std::string& field) {
    double total = 0.0;
    for (double p : row) {
        if (p < 0.0) throw ParseError(field + ": negative probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ParseError(field + ": non-stochastic row (sum " + std::to_string(total) + ")");
}

// --- deterministic update expressions -------------------------------------
//
// Integer grammar over the variables x, u, w, w0 (state/action indices and
// noise values) with + - * %, min/max, and parentheses. The result is reduced
// modulo the state count.

struct ExprNode {
    enum Kind { Const, Var, Add, Sub, Mul, Mod, Neg, Min, Max } kind = Const;
    long value = 0;   // Const
    int var = 0;      // Var: 0=x 1=u 2=w 3=w0
    std::unique_ptr<ExprNode> lhs, rhs;

    long eval(long x, long u, long w, long w0) const {
        switch (kind) {
            case Const: return value;
            case Var: return var == 0 ? x : var == 1 ? u : var == 2 ? w : w0;
            case Add: return lhs->eval(x, u, w, w0) + rhs->eval(x, u, w, w0);
            case Sub: return lhs->eval(x, u, w, w0) - rhs->eval(x, u, w, w0);
            case Mul: return lhs->eval(x, u, w, w0) * rhs->eval(x, u, w, w0);
            case Mod: {
                const long b = rhs->eval(x, u, w, w0);
                if (b == 0) throw ParseError("transition.expr: modulo by zero");
                const long r = lhs->eval(x, u, w, w0) % b;
                return r < 0 ? r + std::abs(b) : r;
            }
            case Neg: return -lhs->eval(x, u, w, w0);
            case Min: return std::min(lhs->eval(x, u, w, w0), rhs->eval(x, u, w, w0));
            case Max: return std::max(lhs->eval(x, u, w, w0), rhs->eval(x, u, w, w0));
        }
        return 0;
    }
};

class ExprParser {
public:
    explicit ExprParser(const std::string& text) : text_(text) {}

    std::unique_ptr<ExprNode> parse() {
        auto node = parse_sum();
        skip_space();
        if (pos_ != text_.size()) fail("trailing characters");
        return node;
    }

private:
    [[noreturn]] void fail(const std::string& why) {
        throw ParseError("transition.expr: " + why + " at position " + std::to_string(pos_));
    }
    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::unique_ptr<ExprNode> make_binary(ExprNode::Kind kind, std::unique_ptr<ExprNode> lhs,
                                          std::unique_ptr<ExprNode> rhs) {
        auto n = std::make_unique<ExprNode>();
        n->kind = kind;
        n->lhs = std::move(lhs);
        n->rhs = std::move(rhs);
        return n;
    }

    std::unique_ptr<ExprNode> parse_sum() {
        auto node = parse_term();
        while (true) {
            if (eat('+'))
                node = make_binary(ExprNode::Add, std::move(node), parse_term());
            else if (eat('-'))
                node = make_binary(ExprNode::Sub, std::move(node), parse_term());
            else
                return node;
        }
    }

    std::unique_ptr<ExprNode> parse_term() {
        auto node = parse_unary();
        while (true) {
            if (eat('*'))
                node = make_binary(ExprNode::Mul, std::move(node), parse_unary());
            else if (eat('%'))
                node = make_binary(ExprNode::Mod, std::move(node), parse_unary());
            else
                return node;
        }
    }

    std::unique_ptr<ExprNode> parse_unary() {
        if (eat('-')) {
            auto n = std::make_unique<ExprNode>();
            n->kind = ExprNode::Neg;
            n->lhs = parse_unary();
            return n;
        }
        return parse_primary();
    }

    std::unique_ptr<ExprNode> parse_primary() {
        skip_space();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            long v = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                v = v * 10 + (text_[pos_++] - '0');
            auto n = std::make_unique<ExprNode>();
            n->kind = ExprNode::Const;
            n->value = v;
            return n;
        }
        if (c == '(') {
            ++pos_;
            auto inner = parse_sum();
            if (!eat(')')) fail("missing ')'");
            return inner;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::string ident;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ident.push_back(text_[pos_++]);
            if (ident == "min" || ident == "max") {
                if (!eat('(')) fail("expected '(' after " + ident);
                auto n = std::make_unique<ExprNode>();
                n->kind = ident == "min" ? ExprNode::Min : ExprNode::Max;
                n->lhs = parse_sum();
                if (!eat(',')) fail("expected ',' inside " + ident);
                n->rhs = parse_sum();
                if (!eat(')')) fail("missing ')' after " + ident);
                return n;
            }
            auto n = std::make_unique<ExprNode>();
            n->kind = ExprNode::Var;
            if (ident == "x")
                n->var = 0;
            else if (ident == "u")
                n->var = 1;
            else if (ident == "w")
                n->var = 2;
            else if (ident == "w0")
                n->var = 3;
            else
                fail("unknown identifier '" + ident + "'");
            return n;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

NoiseLaw parse_noise(const json& j, const std::string& field) {
    if (!j.is_object() || !j.contains("probs"))
        throw ParseError(field + ": expected an object with 'probs'");
    NoiseLaw law;
    law.probs = parse_vector(j.at("probs"), field + ".probs");
    if (law.probs.empty()) throw ParseError(field + ": empty support");
    require_stochastic(law.probs, field + ".probs");
    if (j.contains("values")) {
        for (const auto& v : j.at("values"))
            law.values.push_back(static_cast<long>(parse_number(v, field + ".values")));
        if (law.values.size() != law.probs.size())
            throw ParseError(field + ": values/probs length mismatch");
    } else {
        for (std::size_t i = 0; i < law.probs.size(); ++i)
            law.values.push_back(static_cast<long>(i));
    }
    return law;
}

Mat discrete_metric(int n) {
    Mat d(n, Vec(n, 1.0));
    for (int i = 0; i < n; ++i) d[i][i] = 0.0;
    return d;
}

}  // namespace

Vec AgentModel::kernel_row(int x, int u, const Vec& mu, int w0) const {
    if (flavor == TransitionFlavor::Affine) {
        const int n = num_states();
        Vec row(n, 0.0);
        for (int y = 0; y < n; ++y) {
            if (mu[y] == 0.0) continue;
            const Vec& v = vertex_rows_[y][w0][x][u];
            for (int t = 0; t < n; ++t) row[t] += mu[y] * v[t];
        }
        return row;
    }
    return base_rows_[w0][x][u];
}

Vec AgentModel::vertex_row(int y, int w0, int x, int u) const {
    if (flavor == TransitionFlavor::Affine) return vertex_rows_[y][w0][x][u];
    return base_rows_[w0][x][u];
}

double AgentModel::cost(int x, int u, const Vec& mu) const {
    double c = 0.0;
    if (!cost_table_.empty()) c += cost_table_[x][u];
    if (!w1_target_.empty()) c += wasserstein1(mu, w1_target_, metric_x);
    return c;
}

AgentModel load_model(const json& doc) {
    AgentModel m;
    if (!doc.is_object()) throw ParseError("model: expected a JSON object");
    for (const auto& field :
         {"states", "actions", "idio_noise", "common_noise", "transition", "cost"})
        if (!doc.contains(field))
            throw ParseError(std::string("model: missing section '") + field + "'");

    for (const auto& s : doc.at("states")) m.state_labels.push_back(s.get<std::string>());
    for (const auto& a : doc.at("actions")) m.action_labels.push_back(a.get<std::string>());
    if (m.state_labels.empty()) throw ParseError("states: empty");
    if (m.action_labels.empty()) throw ParseError("actions: empty");
    const int nx = m.num_states();
    const int nu = m.num_actions();

    m.metric_x = doc.contains("metric_x") ? parse_matrix(doc.at("metric_x"), "metric_x")
                                          : discrete_metric(nx);
    m.metric_u = doc.contains("metric_u") ? parse_matrix(doc.at("metric_u"), "metric_u")
                                          : discrete_metric(nu);
    if (static_cast<int>(m.metric_x.size()) != nx)
        throw ParseError("metric_x: size does not match the state count");
    if (static_cast<int>(m.metric_u.size()) != nu)
        throw ParseError("metric_u: size does not match the action count");
    validate_metric(m.metric_x, "metric_x");
    validate_metric(m.metric_u, "metric_u");

    m.idio_noise = parse_noise(doc.at("idio_noise"), "idio_noise");
    m.common_noise = parse_noise(doc.at("common_noise"), "common_noise");
    const int nw0 = m.common_noise.size();

    const json& tr = doc.at("transition");
    if (!tr.is_object() || !tr.contains("flavor"))
        throw ParseError("transition: expected an object with 'flavor'");
    const std::string flavor = tr.at("flavor").get<std::string>();

    auto parse_kernel_table = [&](const json& j, const std::string& field) {
        // [w0][x][u] -> probability row over next states
        if (!j.is_array() || static_cast<int>(j.size()) != nw0)
            throw ParseError(field + ": expected one block per common-noise atom");
        std::vector<std::vector<Mat>> table(nw0);
        for (int w0 = 0; w0 < nw0; ++w0) {
            const json& jx = j[w0];
            if (!jx.is_array() || static_cast<int>(jx.size()) != nx)
                throw ParseError(field + ": expected one block per state");
            table[w0].resize(nx);
            for (int x = 0; x < nx; ++x) {
                const json& ju = jx[x];
                if (!ju.is_array() || static_cast<int>(ju.size()) != nu)
                    throw ParseError(field + ": expected one row per action");
                table[w0][x].resize(nu);
                for (int u = 0; u < nu; ++u) {
                    const std::string rf = field + "[" + std::to_string(w0) + "][" +
                                           std::to_string(x) + "][" + std::to_string(u) + "]";
                    Vec row = parse_vector(ju[u], rf);
                    if (static_cast<int>(row.size()) != nx)
                        throw ParseError(rf + ": row length does not match the state count");
                    require_stochastic(row, rf);
                    table[w0][x][u] = std::move(row);
                }
            }
        }
        return table;
    };

    if (flavor == "tabular") {
        m.flavor = TransitionFlavor::Tabular;
        if (!tr.contains("rows")) throw ParseError("transition: tabular flavor requires 'rows'");
        m.base_rows_ = parse_kernel_table(tr.at("rows"), "transition.rows");
    } else if (flavor == "affine") {
        m.flavor = TransitionFlavor::Affine;
        if (!tr.contains("vertex_kernels"))
            throw ParseError("transition: affine flavor requires 'vertex_kernels'");
        const json& vk = tr.at("vertex_kernels");
        if (!vk.is_array() || static_cast<int>(vk.size()) != nx)
            throw ParseError("transition.vertex_kernels: expected one kernel per simplex vertex");
        m.vertex_rows_.resize(nx);
        for (int y = 0; y < nx; ++y)
            m.vertex_rows_[y] =
                parse_kernel_table(vk[y], "transition.vertex_kernels[" + std::to_string(y) + "]");
    } else if (flavor == "deterministic") {
        m.flavor = TransitionFlavor::Deterministic;
        if (!tr.contains("expr"))
            throw ParseError("transition: deterministic flavor requires 'expr'");
        const std::string text = tr.at("expr").get<std::string>();
        ExprParser parser(text);
        auto expr = parser.parse();
        // Tabulate; the expression is mu-independent by construction.
        m.base_rows_.assign(nw0, std::vector<Mat>(nx, Mat(nu, Vec(nx, 0.0))));
        for (int w0 = 0; w0 < nw0; ++w0)
            for (int x = 0; x < nx; ++x)
                for (int u = 0; u < nu; ++u)
                    for (int w = 0; w < m.idio_noise.size(); ++w) {
                        long next =
                            expr->eval(x, u, m.idio_noise.values[w], m.common_noise.values[w0]);
                        next %= nx;
                        if (next < 0) next += nx;
                        m.base_rows_[w0][x][u][next] += m.idio_noise.probs[w];
                    }
    } else {
        throw ParseError("transition.flavor: unknown flavor '" + flavor + "'");
    }

    const json& cost = doc.at("cost");
    if (!cost.is_object()) throw ParseError("cost: expected an object");
    if (cost.contains("table")) {
        m.cost_table_ = parse_matrix(cost.at("table"), "cost.table");
        if (static_cast<int>(m.cost_table_.size()) != nx)
            throw ParseError("cost.table: expected one row per state");
        for (const auto& row : m.cost_table_)
            if (static_cast<int>(row.size()) != nu)
                throw ParseError("cost.table: expected one entry per action");
    }
    if (cost.contains("w1_to")) {
        m.w1_target_ = parse_vector(cost.at("w1_to"), "cost.w1_to");
        if (static_cast<int>(m.w1_target_.size()) != nx)
            throw ParseError("cost.w1_to: target length does not match the state count");
        require_stochastic(m.w1_target_, "cost.w1_to");
    }
    if (m.cost_table_.empty() && m.w1_target_.empty())
        throw ParseError("cost: requires 'table' or 'w1_to' (or both)");

    m.source_hash = hex64(fnv1a(doc.dump()));
    return m;
}

AgentModel load_model_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw FileError("cannot open model file: " + path);
    std::string data;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) data.append(buf, got);
    std::fclose(f);
    json doc;
    try {
        doc = json::parse(data);
    } catch (const std::exception& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    return load_model(doc);
}

std::optional<MinorizationCertificate> check_minorization(const AgentModel& model) {
    const int nx = model.num_states();
    const int nu = model.num_actions();
    const int nw0 = model.common_noise.size();

    // Componentwise kernel minimum per common-noise atom; minima over the
    // mean-field argument are taken at simplex vertices (exact by affinity).
    Mat atom_min(nw0, Vec(nx, 1.0));
    for (int w0 = 0; w0 < nw0; ++w0)
        for (int y = 0; y < nx; ++y)
            for (int x = 0; x < nx; ++x)
                for (int u = 0; u < nu; ++u) {
                    const Vec row = model.vertex_row(y, w0, x, u);
                    for (int t = 0; t < nx; ++t)
                        atom_min[w0][t] = std::min(atom_min[w0][t], row[t]);
                }

    std::optional<MinorizationCertificate> best;
    for (unsigned mask = 1; mask < (1u << nw0); ++mask) {
        Vec pi(nx, 1.0);
        double p_event = 0.0;
        std::vector<int> atoms;
        for (int w0 = 0; w0 < nw0; ++w0) {
            if (!(mask & (1u << w0))) continue;
            atoms.push_back(w0);
            p_event += model.common_noise.probs[w0];
            for (int t = 0; t < nx; ++t) pi[t] = std::min(pi[t], atom_min[w0][t]);
        }
        double mass = 0.0;
        for (double p : pi) mass += p;
        const double score = p_event * mass;
        if (score <= 0.0) continue;
        if (!best || score > best->p_event * best->mass) {
            MinorizationCertificate cert;
            cert.pi = std::move(pi);
            cert.noise_atoms = std::move(atoms);
            cert.mass = mass;
            cert.p_event = p_event;
            best = std::move(cert);
        }
    }
    return best;
}

LipschitzReport estimate_lipschitz(const AgentModel& model, int samples, std::uint64_t seed,
                                   int grid_resolution) {
    if (samples < 1) throw std::invalid_argument("estimate_lipschitz: samples must be >= 1");
    const int nx = model.num_states();
    const int nu = model.num_actions();
    const int nw0 = model.common_noise.size();

    // Deterministic probe measures: the rational lattice (vertices included)
    // plus the cost target, then seeded random points.
    std::vector<Vec> probes;
    for (const auto& gm : enumerate_empirical(std::max(1, grid_resolution), nx))
        probes.push_back(gm.probabilities());
    if (model.has_w1_cost()) probes.push_back(model.w1_target());

    Rng rng(seed);
    LipschitzReport report;

    auto consider = [&](int x, int u, const Vec& mu, int x2, int u2, const Vec& mu2) {
        const double denom =
            model.metric_x[x][x2] + model.metric_u[u][u2] + wasserstein1(mu, mu2, model.metric_x);
        if (denom < 1e-15) return;
        for (int w0 = 0; w0 < nw0; ++w0) {
            const double num = wasserstein1(model.kernel_row(x, u, mu, w0),
                                            model.kernel_row(x2, u2, mu2, w0), model.metric_x);
            report.k_transition = std::max(report.k_transition, num / denom);
        }
        const double cnum = std::abs(model.cost(x, u, mu) - model.cost(x2, u2, mu2));
        report.k_cost = std::max(report.k_cost, cnum / denom);
        ++report.probe_count;
    };

    const long num_probes = static_cast<long>(probes.size()) * nx * nu;
    for (long a = 0; a < num_probes; ++a) {
        const int xa = static_cast<int>(a % nx);
        const int ua = static_cast<int>((a / nx) % nu);
        const Vec& mua = probes[a / (static_cast<long>(nx) * nu)];
        for (long b = a + 1; b < num_probes; ++b) {
            const int xb = static_cast<int>(b % nx);
            const int ub = static_cast<int>((b / nx) % nu);
            consider(xa, ua, mua, xb, ub, probes[b / (static_cast<long>(nx) * nu)]);
        }
    }
    for (int s = 0; s < samples; ++s) {
        const int xa = static_cast<int>(rng.next_below(nx));
        const int ua = static_cast<int>(rng.next_below(nu));
        const int xb = static_cast<int>(rng.next_below(nx));
        const int ub = static_cast<int>(rng.next_below(nu));
        consider(xa, ua, rng.simplex_point(nx), xb, ub, rng.simplex_point(nx));
    }

    report.satisfies_contraction = 2.0 * report.k_transition < 1.0;
    return report;
}

}  // namespace mfc
