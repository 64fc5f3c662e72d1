#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfc/model.hpp"
#include "mfc/rng.hpp"
#include "test_models.hpp"

using namespace mfc;
using nlohmann::json;

TEST_CASE("spread model loads with two states and actions") {
    auto model = load_model(fixtures::spread_model());
    CHECK(model.num_states() == 2);
    CHECK(model.num_actions() == 2);
    CHECK(model.source_hash.size() == 16);

    // action determines the next state regardless of crowd or noise
    for (int x = 0; x < 2; ++x)
        for (int u = 0; u < 2; ++u) {
            const Vec row = model.kernel_row(x, u, {0.5, 0.5}, 0);
            CHECK(row[u] == 1.0);
            CHECK(row[1 - u] == 0.0);
        }
    CHECK(model.cost(0, 0, {1.0, 0.0}) == doctest::Approx(0.5));
    CHECK(model.cost(0, 0, {0.5, 0.5}) == 0.0);
}

TEST_CASE("non-stochastic rows are rejected with the field name") {
    json doc = fixtures::constant_cost_model();
    doc["transition"]["rows"][0][1][0] = {0.5, 0.4};  // sums to 0.9
    try {
        load_model(doc);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string what = e.what();
        CHECK(what.find("transition.rows[0][1][0]") != std::string::npos);
        CHECK(what.find("non-stochastic") != std::string::npos);
    }
}

TEST_CASE("schema violations name the offending field") {
    json doc = fixtures::spread_model();
    doc.erase("cost");
    CHECK_THROWS_WITH_AS(load_model(doc), "model: missing section 'cost'", ParseError);

    json neg = fixtures::spread_model();
    neg["metric_x"][0][1] = "-1";
    CHECK_THROWS_AS(load_model(neg), ParseError);

    json badnoise = fixtures::spread_model();
    badnoise["idio_noise"]["probs"] = {"0.5", "0.4"};
    CHECK_THROWS_AS(load_model(badnoise), ParseError);
}

TEST_CASE("affine rows validated at vertices are stochastic on the whole simplex") {
    auto model = load_model(fixtures::lipschitz_model());
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const Vec mu = rng.simplex_point(2);
        for (int x = 0; x < 2; ++x)
            for (int u = 0; u < 2; ++u)
                for (int w0 = 0; w0 < 2; ++w0) {
                    const Vec row = model.kernel_row(x, u, mu, w0);
                    double total = 0.0;
                    for (double p : row) {
                        CHECK(p >= -1e-15);
                        total += p;
                    }
                    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
                }
    }
}

TEST_CASE("deterministic expressions parse and reduce modulo the state count") {
    json doc = fixtures::spread_model();
    doc["states"] = {"0", "1", "2"};
    doc["metric_x"] = {{"0", "1", "2"}, {"1", "0", "1"}, {"2", "1", "0"}};
    doc["cost"] = {{"w1_to", {"0.34", "0.33", "0.33"}}};
    doc["transition"]["expr"] = "(x + u + w) % 3";
    doc["idio_noise"] = {{"values", {0, 1}}, {"probs", {"0.25", "0.75"}}};
    auto model = load_model(doc);
    const Vec row = model.kernel_row(1, 1, {1.0, 0.0, 0.0}, 0);
    CHECK(row[2] == doctest::Approx(0.25));
    CHECK(row[0] == doctest::Approx(0.75));

    json bad = fixtures::spread_model();
    bad["transition"]["expr"] = "u + ";
    CHECK_THROWS_AS(load_model(bad), ParseError);
    bad["transition"]["expr"] = "q";
    CHECK_THROWS_AS(load_model(bad), ParseError);
}

TEST_CASE("minorization certificate on a hand-built two-atom model") {
    // Rows on the first atom dominate (0.1, 0.1); the second atom has exact
    // zeros, so the best event is the first atom alone.
    json doc = fixtures::constant_cost_model();
    doc["common_noise"] = {{"probs", {"0.3", "0.7"}}};
    doc["transition"]["rows"] = {
        {{{0.1, 0.9}, {0.9, 0.1}}, {{0.5, 0.5}, {0.1, 0.9}}},
        {{{1.0, 0.0}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}}},
    };
    auto model = load_model(doc);
    auto cert = check_minorization(model);
    REQUIRE(cert.has_value());
    CHECK(cert->noise_atoms == std::vector<int>{0});
    CHECK(cert->p_event == doctest::Approx(0.3));
    CHECK(cert->mass == doctest::Approx(0.2));
    CHECK(cert->alpha(2) == doctest::Approx(0.988));
    CHECK(cert->exact);
}

TEST_CASE("deterministic rows admit no certificate") {
    auto model = load_model(fixtures::spread_model());
    CHECK_FALSE(check_minorization(model).has_value());
}

TEST_CASE("resetting noise yields a full-mass certificate with constant alpha") {
    auto model = load_model(fixtures::resetting_model());
    auto cert = check_minorization(model);
    REQUIRE(cert.has_value());
    CHECK(cert->mass == doctest::Approx(1.0));
    CHECK(cert->p_event == doctest::Approx(0.5));
    for (int n = 1; n <= 16; ++n) CHECK(cert->alpha(n) == doctest::Approx(0.5));
}

TEST_CASE("certificates dominate the kernel componentwise") {
    for (const json& doc : {fixtures::certified_affine_model(), fixtures::resetting_model(),
                            fixtures::lipschitz_model()}) {
        auto model = load_model(doc);
        auto cert = check_minorization(model);
        REQUIRE(cert.has_value());
        for (int w0 : cert->noise_atoms)
            for (int y = 0; y < model.num_states(); ++y)
                for (int x = 0; x < model.num_states(); ++x)
                    for (int u = 0; u < model.num_actions(); ++u) {
                        const Vec row = model.vertex_row(y, w0, x, u);
                        for (int t = 0; t < model.num_states(); ++t)
                            CHECK(row[t] - cert->pi[t] >= -1e-12);
                    }
    }
}

TEST_CASE("alpha grows strictly with the population when the mass is partial") {
    auto model = load_model(fixtures::certified_affine_model());
    auto cert = check_minorization(model);
    REQUIRE(cert.has_value());
    CHECK(cert->mass < 1.0);
    for (int n = 1; n < 12; ++n) CHECK(cert->alpha(n + 1) > cert->alpha(n));
}

TEST_CASE("certified affine fixture pins the 0.925 two-agent factor") {
    auto model = load_model(fixtures::certified_affine_model());
    auto cert = check_minorization(model);
    REQUIRE(cert.has_value());
    CHECK(cert->p_event == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(cert->mass == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(cert->alpha(2) == doctest::Approx(0.925).epsilon(1e-12));
}

TEST_CASE("constant kernels have zero transition constant") {
    auto model = load_model(fixtures::constant_cost_model());
    auto report = estimate_lipschitz(model, 50, 3);
    CHECK(report.k_transition == 0.0);
    CHECK(report.k_cost == 0.0);
    CHECK(report.satisfies_contraction);
    CHECK(report.probe_count > 0);
}

TEST_CASE("transport costs report unit Lipschitz constant in the crowd") {
    auto model = load_model(fixtures::spread_model());
    auto report = estimate_lipschitz(model, 100, 4);
    CHECK(report.k_cost == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("affine models report the exact vertex-enumeration constant") {
    for (const json& doc : {fixtures::lipschitz_model(), fixtures::certified_affine_model()}) {
        auto model = load_model(doc);
        const double exact = fixtures::exact_affine_kernel_lipschitz(model);
        auto report = estimate_lipschitz(model, 200, 12);
        CHECK(report.k_transition <= exact + 1e-12);
        CHECK(report.k_transition >= 0.95 * exact);
    }
    auto lips = load_model(fixtures::lipschitz_model());
    CHECK(fixtures::exact_affine_kernel_lipschitz(lips) == doctest::Approx(0.30));
    CHECK(estimate_lipschitz(lips, 50, 1).satisfies_contraction);
}

TEST_CASE("the estimate is a running maximum of probed quotients") {
    auto model = load_model(fixtures::certified_affine_model());
    auto report = estimate_lipschitz(model, 200, 21);
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const int x = static_cast<int>(rng.next_below(2));
        const int u = static_cast<int>(rng.next_below(2));
        const int x2 = static_cast<int>(rng.next_below(2));
        const int u2 = static_cast<int>(rng.next_below(2));
        const Vec mu = rng.simplex_point(2);
        const Vec mu2 = rng.simplex_point(2);
        const double denom = model.metric_x[x][x2] + model.metric_u[u][u2] +
                             wasserstein1(mu, mu2, model.metric_x);
        if (denom < 1e-12) continue;
        for (int w0 = 0; w0 < 2; ++w0) {
            const double num = wasserstein1(model.kernel_row(x, u, mu, w0),
                                            model.kernel_row(x2, u2, mu2, w0), model.metric_x);
            CHECK(num / denom <= report.k_transition + 1e-12);
        }
        const double cnum = std::abs(model.cost(x, u, mu) - model.cost(x2, u2, mu2));
        CHECK(cnum / denom <= report.k_cost + 1e-12);
    }
}
