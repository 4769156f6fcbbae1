#include "cdm/identification.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

#include "cdm/errors.hpp"
#include "cdm/separation.hpp"

namespace cdm {

int LatentGraph::index(const std::string& id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
    if (it == nodes.end() || *it != id) throw UnknownNode("unknown observed causal node '" + id + "'");
    return static_cast<int>(it - nodes.begin());
}

bool LatentGraph::has_bidirected(int a, int b) const {
    const auto& adj = bidirected[static_cast<std::size_t>(a)];
    return std::binary_search(adj.begin(), adj.end(), b);
}

std::vector<std::pair<std::string, std::string>> LatentGraph::directed_edges() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (int a = 0; a < size(); ++a)
        for (int b : directed.children[static_cast<std::size_t>(a)])
            out.emplace_back(nodes[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)]);
    return out;
}

std::vector<std::pair<std::string, std::string>> LatentGraph::bidirected_edges() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (int a = 0; a < size(); ++a)
        for (int b : bidirected[static_cast<std::size_t>(a)])
            if (a < b) out.emplace_back(nodes[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)]);
    return out;
}

LatentGraph latent_project(const DesignGraph& g) {
    const int n = g.size();
    std::vector<int> local(static_cast<std::size_t>(n), -1);
    LatentGraph out;
    for (int i = 0; i < n; ++i) {
        if (g.kind(i) != NodeKind::Causal || is_latent(g, i)) continue;
        local[static_cast<std::size_t>(i)] = static_cast<int>(out.nodes.size());
        out.nodes.push_back(g.id(i));
    }
    const int m = out.size();
    out.directed = Dag(static_cast<std::size_t>(m));
    out.bidirected.assign(static_cast<std::size_t>(m), {});

    // For every observed node: observed parents through latent chains, and
    // the latents that reach it that way.
    std::vector<std::set<int>> sources(static_cast<std::size_t>(m));
    for (int v = 0; v < n; ++v) {
        const int lv = local[static_cast<std::size_t>(v)];
        if (lv < 0) continue;
        std::vector<int> stack(g.dag().parents[static_cast<std::size_t>(v)]);
        std::set<int> seen;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            if (!seen.insert(p).second || g.kind(p) != NodeKind::Causal) continue;
            if (local[static_cast<std::size_t>(p)] >= 0) {
                out.directed.add_edge(local[static_cast<std::size_t>(p)], lv);
            } else {
                sources[static_cast<std::size_t>(lv)].insert(p);
                for (int q : g.dag().parents[static_cast<std::size_t>(p)]) stack.push_back(q);
            }
        }
    }
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) {
            const auto& sa = sources[static_cast<std::size_t>(a)];
            const auto& sb = sources[static_cast<std::size_t>(b)];
            if (std::any_of(sa.begin(), sa.end(), [&](int u) { return sb.count(u) > 0; })) {
                out.bidirected[static_cast<std::size_t>(a)].push_back(b);
                out.bidirected[static_cast<std::size_t>(b)].push_back(a);
            }
        }
    for (auto& adj : out.bidirected) std::sort(adj.begin(), adj.end());
    return out;
}

std::vector<std::string> topological_ids(const LatentGraph& g) {
    std::vector<std::string> out;
    for (int i : topological_order(g.directed)) out.push_back(g.nodes[static_cast<std::size_t>(i)]);
    return out;
}

// ---------------------------------------------------------------------------
// do-calculus rules and adjustment criteria

namespace {

std::vector<int> concat(std::vector<int> a, const std::vector<int>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void check_sets(const DesignGraph& g, const std::vector<std::vector<int>>& sets) {
    std::set<int> seen;
    for (const auto& s : sets)
        for (int v : s) {
            if (g.kind(v) != NodeKind::Causal) throw InvalidQuery("'" + g.id(v) + "' is not a causal node");
            if (!seen.insert(v).second) throw OverlappingSets("node '" + g.id(v) + "' appears in two sets");
        }
}

}  // namespace

bool rule_applicable(int rule, const Dag& dag, const std::vector<int>& x, const std::vector<int>& y,
                     const std::vector<int>& z, const std::vector<int>& w) {
    if (y.empty() || z.empty()) return true;
    const int n = dag.size();
    const Dag gx = remove_incoming(dag, make_mask(n, x));
    const std::vector<int> given = concat(x, w);
    switch (rule) {
        case 1: return d_separated(gx, y, z, given);
        case 2: return d_separated(remove_outgoing(gx, make_mask(n, z)), y, z, given);
        case 3: {
            const Mask anc_w = ancestor_mask(gx, make_mask(n, w));
            std::vector<int> zw;
            for (int v : z)
                if (!anc_w[static_cast<std::size_t>(v)]) zw.push_back(v);
            return d_separated(remove_incoming(gx, make_mask(n, zw)), y, z, given);
        }
        default: throw InvalidQuery("do-calculus rule must be 1, 2 or 3");
    }
}

bool rule_applicable(int rule, const DesignGraph& g, const std::vector<std::string>& x,
                     const std::vector<std::string>& y, const std::vector<std::string>& z,
                     const std::vector<std::string>& w) {
    if (rule < 1 || rule > 3) throw InvalidQuery("do-calculus rule must be 1, 2 or 3");
    const auto xi = g.indices(x), yi = g.indices(y), zi = g.indices(z), wi = g.indices(w);
    check_sets(g, {xi, yi, zi, wi});
    return rule_applicable(rule, g.dag(), xi, yi, zi, wi);
}

bool backdoor_admissible(const DesignGraph& g, const std::vector<std::string>& x, const std::vector<std::string>& y,
                         const std::vector<std::string>& z) {
    const auto xi = g.indices(x), yi = g.indices(y), zi = g.indices(z);
    check_sets(g, {xi, yi, zi});
    const int n = g.size();
    const Mask desc = descendant_mask(g.dag(), make_mask(n, xi));
    for (int v : zi)
        if (desc[static_cast<std::size_t>(v)]) return false;
    return d_separated(remove_outgoing(g.dag(), make_mask(n, xi)), xi, yi, zi);
}

bool frontdoor_admissible(const DesignGraph& g, const std::vector<std::string>& x, const std::vector<std::string>& y,
                          const std::vector<std::string>& z) {
    const auto xi = g.indices(x), yi = g.indices(y), zi = g.indices(z);
    check_sets(g, {xi, yi, zi});
    const int n = g.size();
    const Mask in_z = make_mask(n, zi), in_y = make_mask(n, yi);

    // every directed path from X to Y meets Z
    std::vector<int> stack(xi);
    Mask seen(static_cast<std::size_t>(n), 0);
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        if (seen[static_cast<std::size_t>(v)]) continue;
        seen[static_cast<std::size_t>(v)] = 1;
        if (in_y[static_cast<std::size_t>(v)]) return false;
        for (int c : g.dag().children[static_cast<std::size_t>(v)])
            if (!in_z[static_cast<std::size_t>(c)]) stack.push_back(c);
    }
    if (!d_separated(remove_outgoing(g.dag(), make_mask(n, xi)), xi, zi, {})) return false;
    return d_separated(remove_outgoing(g.dag(), in_z), zi, yi, xi);
}

ProbExpr backdoor_expression(const std::vector<std::string>& x, const std::vector<std::string>& y,
                             const std::vector<std::string>& z, const std::vector<std::string>& order) {
    std::vector<Binding> given = bindings(x);
    const auto bz = bindings(z);
    given.insert(given.end(), bz.begin(), bz.end());
    ProbExpr body = z.empty() ? prob(bindings(y), given) : product({prob(bindings(y), given), prob(bz)});
    return canonicalize(sum(bz, body), order);
}

ProbExpr frontdoor_expression(const std::vector<std::string>& x, const std::vector<std::string>& y,
                              const std::vector<std::string>& z, const std::vector<std::string>& order) {
    const auto bx = bindings(x), by = bindings(y), bz = bindings(z);
    std::vector<Binding> xz = bx;
    xz.insert(xz.end(), bz.begin(), bz.end());
    ProbExpr inner = sum(bx, product({prob(by, xz), prob(bx)}));
    return canonicalize(sum(bz, product({prob(bz, bx), inner})), order);
}

// ---------------------------------------------------------------------------
// identification

namespace {

using NodeSet = std::set<int>;

struct HedgeFound {
    NodeSet f, f_prime;
};

struct Dist {
    bool base = true;
    ProbExpr joint;  // over the current vertex set when not base
};

class IdEngine {
public:
    explicit IdEngine(const LatentGraph& g) : g_(g) {
        const auto order = topological_order(g.directed);
        pos_.assign(order.size(), 0);
        for (std::size_t k = 0; k < order.size(); ++k) pos_[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
    }

    ProbExpr id(const NodeSet& y, const NodeSet& x, const Dist& p, const NodeSet& v) {
        // 1
        if (x.empty()) {
            if (p.base) return prob(bind(y));
            return sum(bind(minus(v, y)), p.joint);
        }
        // 2
        const NodeSet an = ancestors(y, v, {});
        if (an != v) return id(y, intersect(x, an), marginal(p, an, v), an);
        // 3
        const NodeSet w = minus(minus(v, x), ancestors(y, v, x));
        if (!w.empty()) return id(y, unite(x, w), p, v);
        // 4
        const auto comps = components(minus(v, x));
        if (comps.size() > 1) {
            std::vector<ProbExpr> factors;
            for (const auto& s : comps) factors.push_back(id(s, minus(v, s), p, v));
            return sum(bind(minus(v, unite(y, x))), product(std::move(factors)));
        }
        const NodeSet s = comps.front();
        const auto full = components(v);
        // 5
        if (full.size() == 1) throw HedgeFound{v, s};
        // 6
        if (std::find(full.begin(), full.end(), s) != full.end())
            return sum(bind(minus(s, y)), chain(p, s, v));
        // 7
        for (const auto& sp : full) {
            if (!std::includes(sp.begin(), sp.end(), s.begin(), s.end())) continue;
            return id(y, intersect(x, sp), Dist{false, chain(p, sp, v)}, sp);
        }
        throw HedgeFound{v, s};  // unreachable for a well-formed graph
    }

    std::vector<std::string> ids(const NodeSet& s) const { return ids(ordered(s)); }

private:
    const LatentGraph& g_;
    std::vector<int> pos_;

    std::vector<int> ordered(const NodeSet& s) const {
        std::vector<int> out(s.begin(), s.end());
        std::sort(out.begin(), out.end(), [&](int a, int b) { return pos_[static_cast<std::size_t>(a)] < pos_[static_cast<std::size_t>(b)]; });
        return out;
    }
    std::vector<std::string> ids(const std::vector<int>& s) const {
        std::vector<std::string> out;
        for (int i : s) out.push_back(g_.nodes[static_cast<std::size_t>(i)]);
        return out;
    }
    std::vector<Binding> bind(const NodeSet& s) const { return bindings(ids(ordered(s))); }

    static NodeSet minus(const NodeSet& a, const NodeSet& b) {
        NodeSet out;
        std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
        return out;
    }
    static NodeSet intersect(const NodeSet& a, const NodeSet& b) {
        NodeSet out;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
        return out;
    }
    static NodeSet unite(NodeSet a, const NodeSet& b) {
        a.insert(b.begin(), b.end());
        return a;
    }

    // Ancestors of `y` within G[v], ignoring edges into `cut`.
    NodeSet ancestors(const NodeSet& y, const NodeSet& v, const NodeSet& cut) const {
        NodeSet out;
        std::vector<int> stack(y.begin(), y.end());
        while (!stack.empty()) {
            const int a = stack.back();
            stack.pop_back();
            if (!out.insert(a).second || cut.count(a)) continue;
            for (int p : g_.directed.parents[static_cast<std::size_t>(a)])
                if (v.count(p)) stack.push_back(p);
        }
        return out;
    }

    std::vector<NodeSet> components(const NodeSet& v) const {
        std::vector<NodeSet> out;
        NodeSet done;
        for (int s : v) {
            if (done.count(s)) continue;
            NodeSet comp;
            std::vector<int> stack = {s};
            while (!stack.empty()) {
                const int a = stack.back();
                stack.pop_back();
                if (!comp.insert(a).second) continue;
                for (int b : g_.bidirected[static_cast<std::size_t>(a)])
                    if (v.count(b)) stack.push_back(b);
            }
            done.insert(comp.begin(), comp.end());
            out.push_back(std::move(comp));
        }
        return out;
    }

    Dist marginal(const Dist& p, const NodeSet& keep, const NodeSet& v) const {
        if (p.base) return p;
        return Dist{false, sum(bind(minus(v, keep)), p.joint)};
    }

    ProbExpr conditional(const Dist& p, int target, const NodeSet& v) const {
        NodeSet preds;
        for (int u : v)
            if (pos_[static_cast<std::size_t>(u)] < pos_[static_cast<std::size_t>(target)]) preds.insert(u);
        if (p.base) return prob(bind({target}), bind(preds));
        NodeSet with = preds;
        with.insert(target);
        return fraction(sum(bind(minus(v, with)), p.joint), sum(bind(minus(v, preds)), p.joint));
    }

    ProbExpr chain(const Dist& p, const NodeSet& s, const NodeSet& v) const {
        std::vector<ProbExpr> factors;
        for (int t : ordered(s)) factors.push_back(conditional(p, t, v));
        return product(std::move(factors));
    }
};

NodeSet to_set(const LatentGraph& g, const std::vector<std::string>& ids) {
    NodeSet out;
    for (const auto& id : ids) out.insert(g.index(id));
    return out;
}

}  // namespace

IdentifyResult identify(const LatentGraph& g, const std::vector<std::string>& treat,
                        const std::vector<std::string>& outcome) {
    const NodeSet x = to_set(g, treat), y = to_set(g, outcome);
    if (x.empty() || y.empty()) throw InvalidQuery("treatment and outcome must be non-empty");
    for (int v : x)
        if (y.count(v)) throw OverlappingSets("'" + g.nodes[static_cast<std::size_t>(v)] + "' is both treatment and outcome");
    NodeSet all;
    for (int i = 0; i < g.size(); ++i) all.insert(i);

    IdEngine engine(g);
    IdentifyResult r;
    try {
        r.expr = canonicalize(engine.id(y, x, Dist{}, all), topological_ids(g));
        r.identifiable = true;
    } catch (const HedgeFound& h) {
        r.hedge.f = engine.ids(h.f);
        r.hedge.f_prime = engine.ids(h.f_prime);
        std::sort(r.hedge.f.begin(), r.hedge.f.end());
        std::sort(r.hedge.f_prime.begin(), r.hedge.f_prime.end());
    }
    return r;
}

IdentifyResult identify(const DesignGraph& g, const std::vector<std::string>& treat,
                        const std::vector<std::string>& outcome) {
    return identify(latent_project(causal_projection(g)), treat, outcome);
}

std::string result_json(const IdentifyResult& r) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["identifiable"] = r.identifiable;
    if (r.identifiable) {
        j["estimand"] = render(r.expr);
        j["expr"] = nlohmann::ordered_json::parse(to_json(r.expr));
    } else {
        j["hedge"] = {{"F", r.hedge.f}, {"F_prime", r.hedge.f_prime}};
    }
    return j.dump(2);
}

}  // namespace cdm
