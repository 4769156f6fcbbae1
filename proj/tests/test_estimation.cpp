#include <cmath>
#include <random>
#include <sstream>

#include "cdm/errors.hpp"
#include "cdm/estimation.hpp"
#include "cdm/identification.hpp"
#include "doctest.h"
#include "oracle.hpp"
#include "stats.hpp"

using namespace cdm;

namespace {

FrequencyTable csv(const std::string& text) {
    std::istringstream in(text);
    return read_frequency_csv(in);
}

ParamMap published_estimates() {
    return {{"theta_X", 0.50},    {"theta_Y", 0.10},  {"theta_Z", 0.050},     {"theta_ZX", 0.90},
            {"theta_YZ", -0.043}, {"theta_YX", 0.79}, {"theta_YZX", -0.0019}, {"psi_m1", 1.0},
            {"psi_m2", 0.095},    {"psi_m2_Y*", 0.010}};
}

struct Golden {
    DesignGraph g = oracle::load("fig1c.dsl");
    DiscreteModel model = saturated_binary_parametrization(g);
    FrequencyTable data = load_frequency_csv(oracle::fixture("table1.csv"));
};

}  // namespace

TEST_CASE("binomial proportion") {
    const auto g = build_graph("population P\nnode X kind=causal info=observed\n");
    const auto model = saturated_binary_parametrization(g);
    const auto r = fit_mle(model, factorize(g), csv("X,count\n1,30\n0,70\n"));
    CHECK(r.params.at("theta_X") == doctest::Approx(0.30).epsilon(1e-7));
    CHECK(r.converged);
    CHECK(r.loglik == doctest::Approx(30 * std::log(0.3) + 70 * std::log(0.7)));
}

TEST_CASE("case-control fit") {
    Golden t;
    const auto r = fit_mle(t.model, factorize(t.model.graph()), t.data);
    REQUIRE(r.converged);
    CHECK(r.max_gradient <= 1e-4);
    for (const auto& [name, want] : published_estimates()) {
        CAPTURE(name);
        CHECK(std::abs(r.params.at(name) - want) <= 0.005);
    }
    CHECK(r.fixed == std::vector<std::string>{"psi_m1"});
    CHECK(std::abs(r.derived.at("theta_Y_prime") - 0.48) <= 0.005 * (1 + 1e-9));

    const auto eff = causal_effects(t.g, t.model, r.params, {parse_do("do(X=1)"), parse_do("do(X=0)")});
    CHECK(std::abs(eff.at("P(Y=1|do(X=1))") - 0.456) <= 0.002);
    CHECK(std::abs(eff.at("P(Y=1|do(X=0))") - 0.495) <= 0.002);
    CHECK(eff.at("P(Y=1|do(X=1))") == doctest::Approx(causal_effect_plugin(r.params, {{"X", "1"}})).epsilon(1e-9));
    CHECK(eff.at("P(Y=1|do(X=0))") == doctest::Approx(causal_effect_plugin(r.params, {{"X", "0"}})).epsilon(1e-9));
    CHECK(fit_json(r).find("\"theta_Y_prime\"") != std::string::npos);
}

TEST_CASE("fit is deterministic and monotone in the number of starts") {
    Golden t;
    const auto f = factorize(t.model.graph());
    FitOptions o;
    o.seed = 11;
    double last = -INFINITY;
    for (int starts : {1, 2, 4}) {
        o.multistart = starts;
        const double ll = fit_mle(t.model, f, t.data, o).loglik;
        CHECK(ll >= last);
        last = ll;
    }
    o.multistart = 3;
    o.threads = 1;
    const auto a = fit_mle(t.model, f, t.data, o);
    o.threads = 3;
    const auto b = fit_mle(t.model, f, t.data, o);
    CHECK(a.params == b.params);
    CHECK(a.loglik == b.loglik);
}

TEST_CASE("refit on exact expectations recovers the generator") {
    Golden t;
    ParamMap truth = published_estimates();
    truth["psi_m2"] = 0.2;
    truth["psi_m2_Y*"] = 0.3;
    const auto data = expected_frequencies(t.model, truth, 20000);
    const auto r = fit_mle(t.model, factorize(t.model.graph()), data);
    REQUIRE(r.converged);
    for (const auto& [name, want] : truth) {
        CAPTURE(name);
        CHECK(std::abs(r.params.at(name) - want) <= 1e-4);
    }
}

TEST_CASE("simulated case-control data recovers the generator within three standard errors") {
    Golden t;
    const ParamMap truth = published_estimates();
    SimSpec s;
    s.model = &t.model;
    s.params = truth;
    s.n = 20000;
    s.seed = 2024;
    const auto data = simulate_dataset(s).table;
    const auto f = marginalize(factorize(t.model.graph()), t.model.graph());
    const auto r = fit_mle(t.model, f, data);
    REQUIRE(r.converged);

    const CompiledLikelihood lik(t.model, f, data);
    std::vector<int> free;
    for (int i = 0; i < static_cast<int>(t.model.param_names().size()); ++i)
        if (t.model.param_names()[static_cast<std::size_t>(i)] != "psi_m1") free.push_back(i);
    const auto se = oracle::standard_errors(lik, t.model.param_vector(r.params), free);
    const int k = static_cast<int>(free.size());
    for (int a = 0; a < k; ++a) {
        const auto& name = t.model.param_names()[static_cast<std::size_t>(free[a])];
        CAPTURE(name);
        CHECK(std::abs(r.params.at(name) - truth.at(name)) <= 3 * se[static_cast<std::size_t>(a)]);
    }
}

TEST_CASE("plug-in effects equal the evaluated front-door estimand") {
    const auto g = oracle::load("fig1a.dsl");
    const auto model = saturated_binary_parametrization(g);
    const auto expr = identify(g, {"X"}, {"Y"}).expr;
    std::mt19937_64 rng(17);
    for (int draw = 0; draw < 100; ++draw) {
        const auto params = oracle::random_linear_params(model, rng);
        const auto pm = model.param_map(params);
        ProbabilityTable joint({"X", "Y", "Z"}, {{"0", "1"}, {"0", "1"}, {"0", "1"}});
        for (const auto& [key, p] : oracle::marginal(model, params, {"X", "Y", "Z"})) joint.p[joint.index(key)] += p;
        const auto v = evaluate_expr(expr, joint);
        const int xi = v.var_index("X"), yi = v.var_index("Y");
        REQUIRE(xi >= 0);
        REQUIRE(yi >= 0);
        for (int x = 0; x < 2; ++x) {
            std::vector<int> cell(2);
            cell[static_cast<std::size_t>(xi)] = x;
            cell[static_cast<std::size_t>(yi)] = 1;
            REQUIRE(std::abs(v.at(cell) - causal_effect_plugin(pm, {{"X", std::to_string(x)}})) <= 1e-12);
        }
    }
}

TEST_CASE("plug-in special cases and errors") {
    ParamMap p{{"theta_X", 0.3}, {"theta_Z", 0.2}, {"theta_ZX", 0.0}, {"theta_Y", 0.4},
               {"theta_YX", 0.0}, {"theta_YZ", 0.0}, {"theta_YZX", 0.0}};
    CHECK(causal_effect_plugin(p, {{"X", "1"}}) == doctest::Approx(0.4));
    CHECK(causal_effect_plugin(p, {{"X", "0"}}) == doctest::Approx(0.4));
    auto missing = p;
    missing.erase("theta_ZX");
    CHECK_THROWS_AS(causal_effect_plugin(missing, {{"X", "1"}}), WrongModelFamily);
    CHECK_THROWS_AS(causal_effect_plugin(p, {{"Z", "1"}}), WrongModelFamily);
    CHECK_THROWS_AS(causal_effect_plugin(p, {{"X", "2"}}), WrongModelFamily);
}

TEST_CASE("shared selection is rejected") {
    const auto g = oracle::load("nestedcc.dsl");
    const auto f = factorize(g);
    CHECK(f.shared_selection);
    const auto model = linear_binary_model(g);
    CHECK_THROWS_AS(fit_mle(model, f, csv("X*,Y*,Z*,count\n1,1,1,1\n")), SharedSelectionUnsupported);
}

TEST_CASE("do parsing") {
    CHECK(parse_do("do(X=1)") == DoAssignment{{"X", "1"}});
    CHECK(parse_do(" do( X = 1 , Z=0 ) ") == DoAssignment{{"X", "1"}, {"Z", "0"}});
    CHECK_THROWS_AS(parse_do("X=1"), ParseError);
    CHECK_THROWS_AS(parse_do("do(X)"), ParseError);
    CHECK_THROWS_AS(parse_do("do(X=1,)"), ParseError);
}

TEST_CASE("effects reject non-identifiable and unknown queries") {
    const auto g = build_graph("population P\nnode U kind=causal info=unobserved\nnode X kind=causal info=observed\n"
                               "node Y kind=causal info=observed\nedge U -> X\nedge U -> Y\nedge X -> Y\n");
    const auto model = saturated_binary_parametrization(g);
    std::mt19937_64 rng(1);
    const auto pm = model.param_map(oracle::random_linear_params(model, rng));
    CHECK_THROWS_AS(causal_effects(g, model, pm, {parse_do("do(X=1)")}), NotIdentifiable);
    CHECK_THROWS_AS(causal_effects(g, model, pm, {parse_do("do(Q=1)")}), UnknownNode);
}
