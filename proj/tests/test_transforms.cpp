#include <algorithm>
#include <random>
#include <set>

#include "cdm/errors.hpp"
#include "cdm/likelihood.hpp"
#include "cdm/separation.hpp"
#include "cdm/transforms.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace cdm;

namespace {

// Missingness-graph collapse straight from the definition, by depth-first
// path search on the original graph.
std::set<Edge> collapse_oracle(const DesignGraph& g, std::set<std::string>& nodes) {
    nodes.clear();
    for (const auto& n : g.nodes())
        if (n.kind != NodeKind::Selection) nodes.insert(n.id);
    for (const auto& n : g.nodes())
        if (n.kind == NodeKind::Data)
            for (const auto& p : g.parents(n.id))
                if (g.node(p).kind == NodeKind::Selection) nodes.insert(p);
    std::set<Edge> edges;
    for (const auto& e : g.edges())
        if (nodes.count(e.first) && nodes.count(e.second)) edges.insert(e);
    for (const auto& x : g.nodes()) {
        if (x.kind != NodeKind::Causal) continue;
        std::set<std::string> seen;
        std::vector<std::string> stack{x.id};
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            for (const auto& c : g.children(v)) {
                if (!seen.insert(c).second) continue;
                stack.push_back(c);
                if (g.node(c).kind == NodeKind::Selection && nodes.count(c)) edges.emplace(x.id, c);
            }
        }
    }
    return edges;
}

std::set<std::string> node_ids(const DesignGraph& g) {
    std::set<std::string> out;
    for (const auto& n : g.nodes()) out.insert(n.id);
    return out;
}

std::set<Edge> edge_set(const DesignGraph& g) {
    const auto e = g.edges();
    return {e.begin(), e.end()};
}

}  // namespace

TEST_CASE("missingness collapse matches the path-search oracle") {
    for (const char* name : {"fig1a.dsl", "fig1b.dsl", "fig1c.dsl", "morgam.dsl", "trial.dsl", "nestedcc.dsl"}) {
        CAPTURE(name);
        const auto g = oracle::load(name);
        std::set<std::string> nodes;
        const auto want = collapse_oracle(g, nodes);
        const auto h = collapse_missingness(g);
        CHECK(node_ids(h) == nodes);
        CHECK(edge_set(h) == want);
    }
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        const auto g = oracle::random_design(rng);
        std::set<std::string> nodes;
        const auto want = collapse_oracle(g, nodes);
        const auto h = collapse_missingness(g);
        REQUIRE(node_ids(h) == nodes);
        REQUIRE(edge_set(h) == want);
    }
}

TEST_CASE("missingness collapse examples") {
    const auto m = collapse_missingness(oracle::load("morgam.dsl"));
    for (const auto& [a, b] : std::vector<Edge>{{"Y0", "M1"}, {"X", "M1"}, {"Y", "M2"}, {"X", "M2"}, {"Y0", "M2"}})
        CHECK(m.has_edge(a, b));
    CHECK(m.contains("M1"));
    CHECK(m.contains("M2"));
    CHECK_FALSE(m.contains("M0"));
    CHECK_FALSE(m.contains("m1"));
    CHECK_FALSE(m.contains("m2"));

    // only the population node and its edges go
    const auto b = oracle::load("fig1b.dsl");
    std::set<Edge> kept;
    for (const auto& e : b.edges())
        if (e.first != "mΩ") kept.insert(e);
    CHECK(edge_set(collapse_missingness(b)) == kept);

    const auto c = collapse_missingness(oracle::load("fig1c.dsl"));
    CHECK(c.has_edge("Y", "m2"));
    CHECK(c.contains("m1"));
    CHECK(c.contains("m2"));
}

TEST_CASE("selection diagram collapse") {
    const auto two = build_graph("population P\nnode A kind=causal info=observed\nnode X kind=causal info=observed\n"
                                 "node Y kind=causal info=observed\nnode W kind=causal info=observed\n"
                                 "edge A -> X\nedge X -> Y\nedge W -> A\n");
    const auto h = collapse_selection_diagram(two, {"A"});
    CHECK(h.has_edge("A", "X"));
    CHECK(h.has_edge("X", "Y"));
    CHECK_FALSE(h.has_edge("W", "A"));
    CHECK(h.size() == 4);

    const auto g = oracle::load("morgam.dsl");
    const auto none = collapse_selection_diagram(g, {});
    CHECK(none.edges() == causal_projection(g).edges());
    CHECK(none.size() == static_cast<int>(g.nodes_of_kind(NodeKind::Causal).size()));

    std::mt19937_64 rng(8);
    for (int i = 0; i < 100; ++i) {
        const auto d = oracle::random_design(rng);
        const auto causal = d.ids(d.nodes_of_kind(NodeKind::Causal));
        std::vector<std::string> s;
        for (const auto& c : causal)
            if (oracle::uniform(rng, 0, 1) < 0.4) s.push_back(c);
        const auto out = collapse_selection_diagram(d, s);
        CHECK(out.size() == static_cast<int>(causal.size()));
        for (const auto& e : out.edges()) {
            CHECK(d.has_edge(e.first, e.second));
            CHECK(std::find(s.begin(), s.end(), e.second) == s.end());
        }
    }
    CHECK_THROWS_AS(collapse_selection_diagram(g, {"Q"}), SNotInGraph);
    CHECK_THROWS_AS(collapse_selection_diagram(g, {"M1"}), SNotInGraph);
}

TEST_CASE("missingness classes") {
    const auto b = classify_missingness(oracle::load("fig1b.dsl"), "Y");
    CHECK(b.cls == MissingnessClass::EverywhereMCAR);
    CHECK(b.witness == std::vector<std::string>{"Y", "Y*", "m1"});

    const auto m = classify_missingness(oracle::load("morgam.dsl"), "X");
    CHECK(m.cls == MissingnessClass::MNAR);
    CHECK(m.selection == "M1");
    CHECK(m.witness == std::vector<std::string>{"X", "M1"});

    const auto c = classify_missingness(oracle::load("fig1c.dsl"), "X");
    CHECK(c.cls == MissingnessClass::Other);
    CHECK(c.selection == "m2");
    CHECK(c.witness.front() == "X");
    CHECK(c.witness.back() == "m2");
    CHECK(std::find(c.witness.begin(), c.witness.end(), "X*") == c.witness.end());

    // Y in fig1c is sampled on its own value
    CHECK(classify_missingness(oracle::load("fig1c.dsl"), "Y").cls == MissingnessClass::EverywhereMCAR);

    const auto a = oracle::load("fig1a.dsl");
    CHECK_THROWS_AS(classify_missingness(a, "X"), NoDataNode);
    CHECK_THROWS_AS(classify_missingness(oracle::load("fig1b.dsl"), "Y*"), NoDataNode);
}

TEST_CASE("MCAR implies exact independence of a variable and its selection") {
    std::mt19937_64 rng(13);
    int mcar = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = oracle::random_design(rng);
        const auto model = linear_binary_model(g);
        for (int v : g.nodes_of_kind(NodeKind::Causal)) {
            if (!g.data_node_of(v)) continue;
            const auto r = classify_missingness(g, g.id(v));
            if (r.cls != MissingnessClass::EverywhereMCAR || g.population() == r.selection) continue;
            ++mcar;
            for (int draw = 0; draw < 3; ++draw) {
                const auto params = model.param_map(oracle::random_linear_params(model, rng));
                CHECK(exact_ci(model, params, {{g.id(v)}, {r.selection}, {}}, 1e-9));
            }
        }
    }
    CHECK(mcar > 20);
}

TEST_CASE("ignorable selection factors") {
    const auto c = ignorable_selection_terms(oracle::load("fig1c.dsl"));
    CHECK(c.at("m1"));
    CHECK_FALSE(c.at("m2"));
    CHECK_FALSE(ignorable_selection_terms(oracle::load("morgam.dsl")).at("M1"));
    for (const auto& [id, ok] : ignorable_selection_terms(oracle::load("fig1b.dsl"))) {
        CAPTURE(id);
        CHECK(ok);
    }
}

TEST_CASE("dropping an ignorable factor shifts the log-likelihood by a constant") {
    const auto g = oracle::load("fig1c.dsl");
    const auto model = saturated_binary_parametrization(g);
    const auto data = load_frequency_csv(oracle::fixture("table1.csv"));
    auto without = [&](const std::string& sel) {
        Factorization f = factorize(model.graph());
        for (auto& s : f.strata)
            s.factors.erase(std::remove_if(s.factors.begin(), s.factors.end(),
                                           [&](const Factor& x) { return x.target == sel; }),
                            s.factors.end());
        return marginalize(f, model.graph());
    };
    const auto full = marginalize(factorize(model.graph()), model.graph());
    const auto no_m1 = without("m1");

    std::mt19937_64 rng(3);
    const auto psi = oracle::random_linear_params(model, rng);
    std::vector<double> m1_shift;
    for (int draw = 0; draw < 20; ++draw) {
        auto p = oracle::random_linear_params(model, rng);
        for (std::size_t k = 0; k < p.size(); ++k)
            if (model.param_names()[k].rfind("psi_", 0) == 0) p[k] = psi[k];
        const auto pm = model.param_map(p);
        const double l = loglik(model, full, data, pm);
        m1_shift.push_back(l - loglik(model, no_m1, data, pm));
    }
    const auto [lo1, hi1] = std::minmax_element(m1_shift.begin(), m1_shift.end());
    CHECK(*hi1 - *lo1 < 1e-8);
}
