#include <algorithm>
#include <cmath>
#include <random>

#include "cdm/errors.hpp"
#include "cdm/expr.hpp"
#include "cdm/identification.hpp"
#include "cdm/separation.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace cdm;

namespace {

// Population joint of `ids` as a ProbabilityTable, from the oracle.
ProbabilityTable joint_table(const DiscreteModel& m, const std::vector<double>& params,
                             const std::vector<std::string>& ids) {
    std::vector<std::vector<std::string>> labels;
    for (const auto& id : ids) labels.push_back(m.labels(m.graph().index(id)));
    ProbabilityTable t(ids, labels);
    for (const auto& [key, p] : oracle::marginal(m, params, ids)) t.p[t.index(key)] += p;
    return t;
}

// P(outcome = value | do(treat = tv)) from the oracle, for every assignment
// of treatment and outcome variables, compared against the expression.
void check_effect(const DiscreteModel& m, const std::vector<double>& params, const LatentGraph& lg,
                  const std::vector<std::string>& treat, const std::vector<std::string>& outcome,
                  const ProbExpr& expr, double tol) {
    const ProbabilityTable value = evaluate_expr(expr, joint_table(m, params, lg.nodes));
    const std::size_t nt = treat.size();
    std::vector<int> tdigit(nt, 0);
    for (;;) {
        std::map<std::string, int> fixed;
        for (std::size_t k = 0; k < nt; ++k) fixed[treat[k]] = tdigit[k];
        for (const auto& [ykey, p] : oracle::marginal(m, params, outcome, fixed)) {
            std::vector<int> cell(value.vars.size(), 0);
            for (std::size_t k = 0; k < value.vars.size(); ++k) {
                auto t = std::find(treat.begin(), treat.end(), value.vars[k]);
                auto y = std::find(outcome.begin(), outcome.end(), value.vars[k]);
                if (t != treat.end()) cell[k] = tdigit[static_cast<std::size_t>(t - treat.begin())];
                if (y != outcome.end()) cell[k] = ykey[static_cast<std::size_t>(y - outcome.begin())];
            }
            REQUIRE(std::abs(value.at(cell) - p) <= tol);
        }
        std::size_t k = 0;
        while (k < nt && ++tdigit[k] == 2) tdigit[k++] = 0;
        if (k == nt) break;
    }
}

}  // namespace

TEST_CASE("latent projection") {
    const auto lg = latent_project(oracle::load("fig1a.dsl"));
    CHECK(lg.nodes == std::vector<std::string>{"X", "Y", "Z"});
    CHECK(lg.directed_edges() == std::vector<std::pair<std::string, std::string>>{{"X", "Z"}, {"Z", "Y"}});
    CHECK(lg.bidirected_edges() == std::vector<std::pair<std::string, std::string>>{{"X", "Y"}});

    const auto fan = build_graph("population P\nnode U kind=causal info=unobserved\nnode A kind=causal info=observed\n"
                                 "node B kind=causal info=observed\nnode C kind=causal info=observed\n"
                                 "edge U -> A\nedge U -> B\nedge U -> C\n");
    CHECK(latent_project(fan).bidirected_edges() ==
          std::vector<std::pair<std::string, std::string>>{{"A", "B"}, {"A", "C"}, {"B", "C"}});

    const auto plain = build_graph("population P\nnode A kind=causal info=observed\nnode B kind=causal info=observed\n"
                                   "edge A -> B\n");
    CHECK(latent_project(plain).bidirected_edges().empty());
    CHECK(latent_project(plain).directed_edges().size() == 1);

    // a latent chain contracts to a directed edge
    const auto chain = build_graph("population P\nnode A kind=causal info=observed\nnode L kind=causal info=unobserved\n"
                                   "node B kind=causal info=observed\nedge A -> L\nedge L -> B\n");
    CHECK(latent_project(chain).directed_edges() == std::vector<std::pair<std::string, std::string>>{{"A", "B"}});
}

TEST_CASE("front-door estimand") {
    const auto g = oracle::load("fig1a.dsl");
    const auto r = identify(g, {"X"}, {"Y"});
    REQUIRE(r.identifiable);
    CHECK(render(r.expr) == "sum_z P(z|X=x) * sum_x' P(y|X=x',Z=z) * P(X=x')");
    CHECK(frontdoor_admissible(g, {"X"}, {"Y"}, {"Z"}));
    CHECK_FALSE(backdoor_admissible(g, {"X"}, {"Y"}, {}));

    const auto cg = causal_projection(g);
    std::mt19937_64 rng(1);
    const auto lg = latent_project(g);
    for (int draw = 0; draw < 25; ++draw) {
        const auto m = oracle::random_table_model(cg, rng);
        check_effect(m, {}, lg, {"X"}, {"Y"}, r.expr, 1e-9);
    }
    CHECK(result_json(r).find("\"identifiable\": true") != std::string::npos);
}

TEST_CASE("MORGAM identification") {
    const auto g = oracle::load("morgam.dsl");
    const auto z = identify(g, {"Z"}, {"Y"});
    REQUIRE(z.identifiable);
    CHECK(render(z.expr) == "P(y|Z=z)");
    const auto x = identify(g, {"X"}, {"Y"});
    REQUIRE(x.identifiable);
    CHECK(render(x.expr) == "sum_{z,y0} P(y|Z=z,Y0=y0,X=x) * P(z,y0)");
    CHECK(backdoor_admissible(g, {"X"}, {"Y"}, {"Z", "Y0"}));

    const auto cg = causal_projection(g);
    const auto lg = latent_project(g);
    std::mt19937_64 rng(2);
    for (int draw = 0; draw < 10; ++draw) {
        const auto m = oracle::random_table_model(cg, rng);
        check_effect(m, {}, lg, {"X"}, {"Y"}, x.expr, 1e-9);
        check_effect(m, {}, lg, {"Z"}, {"Y"}, z.expr, 1e-9);
    }
}

TEST_CASE("MORGAM joint intervention reduces to conditioning") {
    // do(Z), do(Y0), do(X) on Y: rule 2 three times
    const auto cg = causal_projection(oracle::load("morgam.dsl"));
    CHECK(rule_applicable(2, cg, {"Y0", "X"}, {"Y"}, {"Z"}, {}));
    CHECK(rule_applicable(2, cg, {"X"}, {"Y"}, {"Y0"}, {"Z"}));
    CHECK(rule_applicable(2, cg, {}, {"Y"}, {"X"}, {"Z", "Y0"}));
    const auto r = identify(cg, {"Z", "Y0", "X"}, {"Y"});
    REQUIRE(r.identifiable);
    CHECK(render(r.expr) == "P(y|Z=z,Y0=y0,X=x)");
}

TEST_CASE("bow graph is not identifiable") {
    const auto g = build_graph("population P\nnode U kind=causal info=unobserved\nnode X kind=causal info=observed\n"
                               "node Y kind=causal info=observed\nedge U -> X\nedge U -> Y\nedge X -> Y\n");
    const auto r = identify(g, {"X"}, {"Y"});
    CHECK_FALSE(r.identifiable);
    CHECK(r.hedge.f == std::vector<std::string>{"X", "Y"});
    CHECK(r.hedge.f_prime == std::vector<std::string>{"Y"});

    // two models with the same observed joint and different effects
    const auto cg = causal_projection(g);
    TableCpt u{{{0.5, 0.5}}};
    // rows: parents of X = (U); parents of Y = (U, X) with U slowest
    DiscreteModel causal(cg, {{"U", u}, {"X", TableCpt{{{0.5, 0.5}, {0.5, 0.5}}}},
                              {"Y", TableCpt{{{1, 0}, {0, 1}, {1, 0}, {0, 1}}}}});
    DiscreteModel confounded(cg, {{"U", u}, {"X", TableCpt{{{1, 0}, {0, 1}}}},
                                  {"Y", TableCpt{{{1, 0}, {1, 0}, {0, 1}, {0, 1}}}}});
    CHECK(oracle::marginal(causal, {}, {"X", "Y"}) == oracle::marginal(confounded, {}, {"X", "Y"}));
    const double a = oracle::marginal(causal, {}, {"Y"}, {{"X", 1}})[{1}];
    const double b = oracle::marginal(confounded, {}, {"Y"}, {{"X", 1}})[{1}];
    CHECK(a == doctest::Approx(1.0));
    CHECK(b == doctest::Approx(0.5));
    CHECK(result_json(r).find("F_prime") != std::string::npos);
}

TEST_CASE("rule checks on the front-door graph") {
    const auto cg = causal_projection(oracle::load("fig1a.dsl"));
    CHECK(rule_applicable(2, cg, {}, {"Z"}, {"X"}, {}));
    // oracle: cut edges out of Z, test Y _||_ Z | X
    const Dag d = oracle::cut(cg.dag(), {}, {cg.index("Z")});
    const bool want = oracle::dsep_paths(d, {cg.index("Y")}, {cg.index("Z")}, {cg.index("X")});
    CHECK(rule_applicable(2, cg, {}, {"Y"}, {"Z"}, {"X"}) == want);
    CHECK(want);
    CHECK(rule_applicable(1, cg, {"X"}, {"Y"}, {}, {}));
    CHECK_THROWS_AS(rule_applicable(1, cg, {"X"}, {"X"}, {"Z"}, {}), OverlappingSets);
    CHECK_THROWS_AS(rule_applicable(1, cg, {"X"}, {"Q"}, {"Z"}, {}), UnknownNode);
    CHECK_THROWS_AS(rule_applicable(1, oracle::load("fig1c.dsl"), {"X"}, {"Y*"}, {"Z"}, {}), InvalidQuery);
}

TEST_CASE("identify is sound on random graphs with latents") {
    std::mt19937_64 rng(23);
    int identified = 0, hedges = 0;
    for (int trial = 0; trial < 150; ++trial) {
        const int n = 3 + trial % 3;
        GraphSpec s;
        s.population = "P";
        s.nodes.push_back({"P", NodeKind::Selection, InfoAttr::DeterminedKnown, {}, {}, false});
        std::vector<std::string> ids, observed;
        for (int i = 0; i < n; ++i) {
            ids.push_back("V" + std::to_string(i));
            const bool latent = i < 2 && oracle::uniform(rng, 0, 1) < 0.5;
            s.nodes.push_back({ids.back(), NodeKind::Causal, latent ? InfoAttr::NotObserved : InfoAttr::Observed,
                               {}, {}, false});
            if (!latent) observed.push_back(ids.back());
            for (int j = 0; j < i; ++j)
                if (oracle::uniform(rng, 0, 1) < 0.5) s.edges.emplace_back(ids[j], ids[i]);
        }
        if (observed.size() < 2) continue;
        const DesignGraph g = DesignGraph::checked(s);
        std::shuffle(observed.begin(), observed.end(), rng);
        const std::vector<std::string> treat{observed[0]};
        std::vector<std::string> outcome{observed[1]};
        if (observed.size() > 2 && trial % 2) outcome.push_back(observed[2]);
        const auto r = identify(g, treat, outcome);
        if (!r.identifiable) {
            ++hedges;
            CHECK_FALSE(r.hedge.f.empty());
            continue;
        }
        ++identified;
        const auto lg = latent_project(g);
        const auto m = oracle::random_table_model(causal_projection(g), rng);
        check_effect(m, {}, lg, treat, outcome, r.expr, 1e-9);
    }
    CHECK(identified > 50);
    CHECK(hedges > 0);
}

TEST_CASE("identify does not depend on node names") {
    const auto a = build_graph("population P\nnode U kind=causal info=unobserved\nnode X kind=causal info=observed\n"
                               "node Z kind=causal info=observed\nnode Y kind=causal info=observed\n"
                               "edge U -> X\nedge U -> Y\nedge X -> Z\nedge Z -> Y\n");
    const auto b = build_graph("population P\nnode L kind=causal info=unobserved\nnode A kind=causal info=observed\n"
                               "node M kind=causal info=observed\nnode B kind=causal info=observed\n"
                               "edge L -> A\nedge L -> B\nedge A -> M\nedge M -> B\n");
    const auto ra = identify(a, {"X"}, {"Y"});
    const auto rb = identify(b, {"A"}, {"B"});
    REQUIRE(rb.identifiable);
    CHECK(render(rb.expr) == "sum_m P(m|A=a) * sum_a' P(b|A=a',M=m) * P(A=a')");
    CHECK(render(ra.expr).size() == render(rb.expr).size());
}

TEST_CASE("adjustment expressions agree with identify") {
    const auto g = oracle::load("morgam.dsl");
    const auto lg = latent_project(g);
    const auto order = topological_ids(lg);
    const auto bd = backdoor_expression({"X"}, {"Y"}, {"Z", "Y0"}, order);
    CHECK(render(bd) == render(identify(g, {"X"}, {"Y"}).expr));
    const auto a = oracle::load("fig1a.dsl");
    const auto fd = frontdoor_expression({"X"}, {"Y"}, {"Z"}, topological_ids(latent_project(a)));
    CHECK(render(fd) == render(identify(a, {"X"}, {"Y"}).expr));
}

TEST_CASE("expression evaluation errors") {
    ProbabilityTable t({"X", "Y"}, {{"0", "1"}, {"0", "1"}});
    t.p = {0.5, 0.5, 0.0, 0.0};
    const auto e = prob({{"Y", "y"}}, {{"X", "x"}});
    CHECK_THROWS_AS(evaluate_expr(e, t), ZeroConditioningEvent);
    CHECK_THROWS_AS(evaluate_expr(prob({{"W", "w"}}, {}), t), UnboundVariable);
    const auto one = evaluate_expr(constant(1.0), t);
    REQUIRE(one.p.size() == 1);
    CHECK(one.p[0] == 1.0);
}
