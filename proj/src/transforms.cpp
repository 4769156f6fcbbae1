#include "cdm/transforms.hpp"

#include <algorithm>
#include <queue>
#include <set>

#include "cdm/errors.hpp"
#include "cdm/likelihood.hpp"

namespace cdm {

DesignGraph collapse_missingness(const DesignGraph& g) {
    const int n = g.size();
    Mask keep(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        const NodeKind k = g.kind(i);
        if (k == NodeKind::Causal || k == NodeKind::Data) keep[static_cast<std::size_t>(i)] = 1;
    }
    for (int d : g.nodes_of_kind(NodeKind::Data))
        if (auto m = g.measuring_selection(d)) keep[static_cast<std::size_t>(*m)] = 1;

    GraphSpec s;
    s.name = g.name();
    if (auto pop = g.population_index(); pop && keep[static_cast<std::size_t>(*pop)]) s.population = g.population();
    for (int i = 0; i < n; ++i)
        if (keep[static_cast<std::size_t>(i)]) s.nodes.push_back(g.node(i));
    std::set<Edge> edges;
    for (const auto& e : g.edges())
        if (keep[static_cast<std::size_t>(g.index(e.first))] && keep[static_cast<std::size_t>(g.index(e.second))])
            edges.insert(e);
    for (int x : g.nodes_of_kind(NodeKind::Causal)) {
        const Mask desc = descendant_mask(g.dag(), make_mask(n, {x}));
        for (int m : g.nodes_of_kind(NodeKind::Selection))
            if (keep[static_cast<std::size_t>(m)] && desc[static_cast<std::size_t>(m)]) edges.emplace(g.id(x), g.id(m));
    }
    s.edges.assign(edges.begin(), edges.end());
    return DesignGraph(std::move(s));
}

DesignGraph collapse_selection_diagram(const DesignGraph& g, const std::vector<std::string>& s) {
    std::set<std::string> in_s;
    for (const auto& id : s) {
        if (!g.contains(id) || g.node(id).kind != NodeKind::Causal)
            throw SNotInGraph("'" + id + "' is not a causal node of the graph");
        in_s.insert(id);
    }
    GraphSpec out;
    out.name = g.name();
    for (int i : g.nodes_of_kind(NodeKind::Causal)) out.nodes.push_back(g.node(i));
    for (const auto& [from, to] : g.edges())
        if (g.node(from).kind == NodeKind::Causal && g.node(to).kind == NodeKind::Causal && !in_s.count(to))
            out.edges.emplace_back(from, to);
    return DesignGraph(std::move(out));
}

std::string_view to_string(MissingnessClass c) {
    switch (c) {
        case MissingnessClass::EverywhereMCAR: return "MCAR";
        case MissingnessClass::MNAR: return "MNAR";
        case MissingnessClass::Other: return "Other";
    }
    return "?";
}

namespace {

// Shortest directed path from `from` to `to` whose interior avoids data nodes.
std::vector<int> directed_path(const DesignGraph& g, int from, int to) {
    std::vector<int> prev(static_cast<std::size_t>(g.size()), -2);
    std::queue<int> q;
    q.push(from);
    prev[static_cast<std::size_t>(from)] = -1;
    while (!q.empty()) {
        const int v = q.front();
        q.pop();
        if (v == to) break;
        if (v != from && g.kind(v) == NodeKind::Data) continue;
        for (int c : g.dag().children[static_cast<std::size_t>(v)]) {
            if (prev[static_cast<std::size_t>(c)] != -2) continue;
            prev[static_cast<std::size_t>(c)] = v;
            q.push(c);
        }
    }
    if (prev[static_cast<std::size_t>(to)] == -2) return {};
    std::vector<int> path;
    for (int v = to; v != -1; v = prev[static_cast<std::size_t>(v)]) path.push_back(v);
    std::reverse(path.begin(), path.end());
    return path;
}

// Shortest path between `from` and `to` that is open given the empty set
// (no colliders), in the graph without node `removed`.
std::vector<int> open_path(const DesignGraph& g, int from, int to, int removed) {
    const int n = g.size();
    // state: node * 2 + dir, dir 0 = arrived moving up (from a child), 1 = moving down
    std::vector<int> prev(static_cast<std::size_t>(2 * n), -2);
    std::queue<int> q;
    q.push(2 * from);
    prev[static_cast<std::size_t>(2 * from)] = -1;
    int hit = -1;
    while (!q.empty()) {
        const int st = q.front();
        q.pop();
        const int v = st / 2, dir = st % 2;
        if (v == to) {
            hit = st;
            break;
        }
        auto push = [&](int node, int d) {
            if (node == removed) return;
            const int next = 2 * node + d;
            if (prev[static_cast<std::size_t>(next)] != -2) return;
            prev[static_cast<std::size_t>(next)] = st;
            q.push(next);
        };
        if (dir == 0)
            for (int p : g.dag().parents[static_cast<std::size_t>(v)]) push(p, 0);
        for (int c : g.dag().children[static_cast<std::size_t>(v)]) push(c, 1);
    }
    if (hit < 0) return {};
    std::vector<int> path;
    for (int st = hit; st != -1; st = prev[static_cast<std::size_t>(st)]) path.push_back(st / 2);
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace

MissingnessReport classify_missingness(const DesignGraph& g, const std::string& v) {
    const int x = g.index(v);
    if (g.kind(x) != NodeKind::Causal) throw NoDataNode("'" + v + "' is not a causal node");
    auto d = g.data_node_of(x);
    if (!d) throw NoDataNode("'" + v + "' has no data node");
    auto m = g.measuring_selection(*d);
    if (!m) throw NoDataNode("data node of '" + v + "' has no selection parent");

    MissingnessReport r;
    r.selection = g.id(*m);
    auto path = open_path(g, x, *m, *d);
    if (path.empty()) {
        r.cls = MissingnessClass::EverywhereMCAR;
        r.witness = {v, g.id(*d), g.id(*m)};
        return r;
    }
    if (auto dp = directed_path(g, x, *m); !dp.empty()) {
        r.cls = MissingnessClass::MNAR;
        r.witness = g.ids(dp);
        return r;
    }
    r.cls = MissingnessClass::Other;
    r.witness = g.ids(path);
    return r;
}

std::map<std::string, bool> ignorable_selection_terms(const DesignGraph& g) {
    const Factorization f = marginalize(factorize(g), g);
    std::map<std::string, bool> out;
    const auto pop = g.population_index();
    for (int s : g.nodes_of_kind(NodeKind::Selection))
        if (!(pop && *pop == s)) out[g.id(s)] = true;

    for (const auto& st : f.strata) {
        std::set<std::string> unobserved(st.marginalized.begin(), st.marginalized.end());
        // causal variables whose factor sits inside a sum scope
        std::set<std::string> in_scope;
        for (const auto& sc : st.scopes)
            for (int i : sc.factors) in_scope.insert(st.factors[static_cast<std::size_t>(i)].target);
        for (const auto& fac : st.factors) {
            if (fac.fixed_value < 0) continue;
            for (const auto& p : fac.conditioning) {
                const int pi = g.index(p);
                if (g.kind(pi) == NodeKind::Causal && unobserved.count(p)) out[fac.target] = false;
                if (g.kind(pi) == NodeKind::Data) {
                    const std::string c = g.id(*g.measured_causal(pi));
                    if (in_scope.count(c)) out[fac.target] = false;
                }
            }
        }
    }
    return out;
}

}  // namespace cdm
