#include <cmath>
#include <random>
#include <sstream>

#include "cdm/errors.hpp"
#include "cdm/estimation.hpp"
#include "cdm/identification.hpp"
#include "cdm/simulate.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace cdm;

namespace {

std::map<std::vector<std::string>, double> cells(const FrequencyTable& t) {
    std::map<std::vector<std::string>, double> out;
    for (const auto& r : t.rows) out[r.values] += r.count;
    return out;
}

ParamMap published_estimates() {
    return {{"theta_X", 0.50},    {"theta_Y", 0.10},  {"theta_Z", 0.050},     {"theta_ZX", 0.90},
            {"theta_YZ", -0.043}, {"theta_YX", 0.79}, {"theta_YZX", -0.0019}, {"psi_m1", 1.0},
            {"psi_m2", 0.095},    {"psi_m2_Y*", 0.010}};
}

// Observed columns of `t` reordered to the oracle's column order.
std::vector<std::string> reorder(const FrequencyTable& t, const DesignGraph& g, const std::vector<std::string>& row) {
    std::vector<std::string> out;
    for (int c : oracle::columns(g)) out.push_back(row[static_cast<std::size_t>(t.column_index(g.id(c)))]);
    return out;
}

}  // namespace

TEST_CASE("uniform binaries split evenly") {
    const auto g = build_graph("population P\nnode A kind=causal info=observed\nnode B kind=causal info=observed\n"
                               "node C kind=causal info=observed\n");
    const auto model = linear_binary_model(g);
    const auto t = expected_frequencies(model, {{"theta_A", 0.5}, {"theta_B", 0.5}, {"theta_C", 0.5}}, 1000);
    CHECK(t.rows.size() == 8);
    for (const auto& r : t.rows) CHECK(r.count == 125.0);
}

TEST_CASE("expected frequencies match brute-force enumeration") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const auto g = oracle::random_design(rng);
        const auto model = linear_binary_model(g);
        const auto params = oracle::random_linear_params(model, rng);
        const auto t = expected_frequencies(model, model.param_map(params), 1000);
        CHECK(t.total() == doctest::Approx(1000));
        std::map<std::vector<std::string>, double> got;
        for (const auto& r : t.rows) got[reorder(t, g, r.values)] += r.count;
        const auto want = oracle::observed_distribution(model, params);
        for (const auto& [row, p] : want) REQUIRE(std::abs(got[row] - 1000 * p) <= 1e-9);
        for (const auto& [row, c] : got) REQUIRE((c == 0 || want.count(row)));
    }
}

TEST_CASE("fitted case-control model reproduces the table") {
    const auto g = oracle::load("fig1c.dsl");
    const auto model = saturated_binary_parametrization(g);
    const auto data = load_frequency_csv(oracle::fixture("table1.csv"));
    const auto r = fit_mle(model, factorize(model.graph()), data);
    const auto table = expected_frequencies(model, r.params, data.total());
    std::map<std::vector<std::string>, double> expected;
    for (const auto& row : table.rows) {
        std::vector<std::string> key;
        for (const auto& c : data.columns) key.push_back(row.values[static_cast<std::size_t>(table.column_index(c))]);
        expected[key] += row.count;
    }
    for (const auto& [row, n] : cells(data)) {
        CAPTURE(row[0] + row[1] + row[2]);
        CHECK(std::abs(expected.at(row) - n) <= 1.0);
    }
    // half of the selected are cases
    double cases = 0, selected = 0;
    for (const auto& [row, n] : expected)
        if (row[0] != "NA") {
            selected += n;
            if (row[2] == "1") cases += n;
        }
    CHECK(cases / selected == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("sampling is reproducible and thread-count independent") {
    const auto g = oracle::load("fig1c.dsl");
    const auto model = saturated_binary_parametrization(g);
    SimSpec s{&model, published_estimates(), 5000, 99, 1};
    const auto a = simulate_dataset(s);
    s.threads = 4;
    const auto b = simulate_dataset(s);
    CHECK(to_csv(a.table) == to_csv(b.table));
    CHECK(a.table.total() == 5000);
    s.seed = 100;
    CHECK(to_csv(simulate_dataset(s).table) != to_csv(a.table));
    CHECK(a.metadata.generator == "splitmix64-counter");
    CHECK(a.metadata.seed == 99);
    CHECK(a.metadata.n == 5000);
    CHECK(a.metadata.spec_hash == b.metadata.spec_hash);
    const auto js = metadata_json(a.metadata);
    CHECK(js.find("\"generator\": \"splitmix64-counter\"") != std::string::npos);

    for (std::uint64_t i = 0; i < 1000; ++i) {
        const double u = counter_uniform(7, i, 3);
        CHECK((u >= 0.0 && u < 1.0));
        CHECK(u == counter_uniform(7, i, 3));
    }
}

TEST_CASE("simple random sample rows are all present or all missing") {
    const auto g = oracle::load("fig1b.dsl");
    const auto model = saturated_binary_parametrization(g);
    std::mt19937_64 rng(4);
    const auto pm = model.param_map(oracle::random_linear_params(model, rng));
    const auto t = simulate_dataset({&model, pm, 1000, 5, 0}).table;
    for (const auto& r : t.rows) {
        int na = 0;
        for (const auto& v : r.values) na += v == kMissing;
        CHECK((na == 0 || na == static_cast<int>(r.values.size())));
    }
}

TEST_CASE("sampled rows respect the measurement rule") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 60; ++trial) {
        const auto g = oracle::random_design(rng);
        const auto model = linear_binary_model(g);
        const auto params = oracle::random_linear_params(model, rng);
        const auto support = oracle::observed_distribution(model, params);
        const auto t = simulate_dataset({&model, model.param_map(params), 300, static_cast<std::uint64_t>(trial), 2}).table;
        CHECK(t.total() == 300);
        for (const auto& r : t.rows) REQUIRE(support.count(reorder(t, g, r.values)));
    }
}

TEST_CASE("sample means agree with expected frequencies") {
    const auto g = oracle::load("fig1c.dsl");
    const auto model = saturated_binary_parametrization(g);
    ParamMap p = published_estimates();
    p["psi_m2"] = 0.3;
    p["psi_m2_Y*"] = 0.4;
    const double n = 400;
    const auto expected = cells(expected_frequencies(model, p, n));
    std::map<std::vector<std::string>, double> sum;
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s)
        for (const auto& [row, c] : cells(simulate_dataset({&model, p, 400, static_cast<std::uint64_t>(s), 1}).table))
            sum[row] += c;
    for (const auto& [row, e] : expected) {
        const double q = e / n;
        const double sd = std::sqrt(n * q * (1 - q) / seeds);
        CHECK(std::abs(sum[row] / seeds - e) <= 4 * sd + 1e-12);
    }
}

TEST_CASE("interventional distributions follow the truncated product") {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 100; ++trial) {
        const auto g = oracle::random_design(rng);
        const auto model = linear_binary_model(g);
        const auto params = oracle::random_linear_params(model, rng);
        const auto pm = model.param_map(params);
        const auto causal = g.ids(g.nodes_of_kind(NodeKind::Causal));
        const std::string target = causal[static_cast<std::size_t>(trial) % causal.size()];
        const int value = trial % 2;
        const auto t = interventional_distribution(model, pm, {{target, std::to_string(value)}});
        REQUIRE(t.vars == causal);
        for (const auto& [key, p] : oracle::marginal(model, params, causal, {{target, value}}))
            REQUIRE(std::abs(t.at(key) - p) <= 1e-12);

        const auto none = interventional_distribution(model, pm, {});
        const auto obs = design_joint(model, pm, causal);
        for (std::size_t k = 0; k < none.p.size(); ++k) REQUIRE(std::abs(none.p[k] - obs.p[k]) <= 1e-12);
    }
}

TEST_CASE("truncated product agrees with the identified estimand") {
    const auto g = oracle::load("fig1a.dsl");
    const auto expr = identify(g, {"X"}, {"Y"}).expr;
    const auto cg = causal_projection(g);
    std::mt19937_64 rng(6);
    for (int draw = 0; draw < 25; ++draw) {
        const auto model = oracle::random_table_model(cg, rng);
        const auto v = evaluate_expr(expr, design_joint(model, {}, {"X", "Y", "Z"}));
        for (int x = 0; x < 2; ++x) {
            const auto t = interventional_distribution(model, {}, {{"X", std::to_string(x)}}, {"Y"});
            std::vector<int> cell(2);
            cell[static_cast<std::size_t>(v.var_index("X"))] = x;
            for (int y = 0; y < 2; ++y) {
                cell[static_cast<std::size_t>(v.var_index("Y"))] = y;
                REQUIRE(std::abs(t.p[static_cast<std::size_t>(y)] - v.at(cell)) <= 1e-9);
            }
        }
    }
}

TEST_CASE("interventions on simple models") {
    // a source without influence on Y leaves Y alone
    const auto g = build_graph("population P\nnode A kind=causal info=observed\nnode Y kind=causal info=observed\n");
    const auto m = linear_binary_model(g);
    const ParamMap q{{"theta_A", 0.3}, {"theta_Y", 0.6}};
    CHECK(interventional_distribution(m, q, {{"A", "1"}}, {"Y"}).p[1] == doctest::Approx(0.6));
    CHECK_THROWS_AS(interventional_distribution(m, q, {{"Q", "1"}}), UnknownNode);
}

TEST_CASE("state cap") {
    const auto model = saturated_binary_parametrization(oracle::load("morgam.dsl"));
    std::mt19937_64 rng(1);
    const auto pm = model.param_map(oracle::random_linear_params(model, rng));
    CHECK_THROWS_AS(expected_frequencies(model, pm, 10, 16), StateSpaceTooLarge);
    CHECK_THROWS_AS(interventional_distribution(model, pm, {}, {}, 16), StateSpaceTooLarge);
    CHECK(expected_frequencies(model, pm, 10).total() == doctest::Approx(10));
}
