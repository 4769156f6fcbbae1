#include "cdm/graph.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace cdm {

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Causal: return "causal";
        case NodeKind::Selection: return "selection";
        case NodeKind::Data: return "data";
    }
    return "?";
}

std::string_view to_string(InfoAttr info) {
    switch (info) {
        case InfoAttr::Observed: return "observed";
        case InfoAttr::NotObserved: return "unobserved";
        case InfoAttr::DeterminedKnown: return "det-known";
        case InfoAttr::DeterminedUnknown: return "det-unknown";
    }
    return "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view text) {
    if (text == "causal") return NodeKind::Causal;
    if (text == "selection") return NodeKind::Selection;
    if (text == "data") return NodeKind::Data;
    return std::nullopt;
}

std::optional<InfoAttr> parse_info_attr(std::string_view text) {
    if (text == "observed") return InfoAttr::Observed;
    if (text == "unobserved") return InfoAttr::NotObserved;
    if (text == "det-known") return InfoAttr::DeterminedKnown;
    if (text == "det-unknown") return InfoAttr::DeterminedUnknown;
    return std::nullopt;
}

bool ValidationReport::has_rule(std::string_view rule) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.rule == rule; });
}

std::string ValidationReport::to_string() const {
    std::ostringstream out;
    for (const auto& v : violations) {
        out << v.rule << ": " << v.message;
        if (!v.ids.empty()) {
            out << " [";
            for (std::size_t i = 0; i < v.ids.size(); ++i) out << (i ? ", " : "") << v.ids[i];
            out << "]";
        }
        out << "\n";
    }
    return out.str();
}

ValidationError::ValidationError(ValidationReport report)
    : Error("ValidationError", "invalid causal model with design:\n" + report.to_string()),
      report_(std::move(report)) {}

// ---------------------------------------------------------------------------
// Dag

bool Dag::has_edge(int from, int to) const {
    const auto& ch = children[static_cast<std::size_t>(from)];
    return std::binary_search(ch.begin(), ch.end(), to);
}

void Dag::add_edge(int from, int to) {
    auto& ch = children[static_cast<std::size_t>(from)];
    auto it = std::lower_bound(ch.begin(), ch.end(), to);
    if (it != ch.end() && *it == to) return;
    ch.insert(it, to);
    auto& pa = parents[static_cast<std::size_t>(to)];
    pa.insert(std::lower_bound(pa.begin(), pa.end(), from), from);
}

void Dag::remove_edge(int from, int to) {
    auto& ch = children[static_cast<std::size_t>(from)];
    ch.erase(std::remove(ch.begin(), ch.end(), to), ch.end());
    auto& pa = parents[static_cast<std::size_t>(to)];
    pa.erase(std::remove(pa.begin(), pa.end(), from), pa.end());
}

Mask make_mask(int n, const std::vector<int>& members) {
    Mask m(static_cast<std::size_t>(n), 0);
    for (int v : members) m[static_cast<std::size_t>(v)] = 1;
    return m;
}

std::vector<int> mask_members(const Mask& mask) {
    std::vector<int> out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out.push_back(static_cast<int>(i));
    return out;
}

namespace {

Mask closure(const std::vector<std::vector<int>>& next, const Mask& seeds) {
    Mask seen = seeds;
    std::vector<int> stack = mask_members(seeds);
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : next[static_cast<std::size_t>(v)]) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                stack.push_back(w);
            }
        }
    }
    return seen;
}

}  // namespace

Mask ancestor_mask(const Dag& dag, const Mask& seeds) { return closure(dag.parents, seeds); }
Mask descendant_mask(const Dag& dag, const Mask& seeds) { return closure(dag.children, seeds); }

std::vector<int> topological_order(const Dag& dag) {
    const int n = dag.size();
    std::vector<int> indeg(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) indeg[static_cast<std::size_t>(v)] = static_cast<int>(dag.parents[static_cast<std::size_t>(v)].size());
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (int v = 0; v < n; ++v)
        if (indeg[static_cast<std::size_t>(v)] == 0) ready.push(v);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    while (!ready.empty()) {
        int v = ready.top();
        ready.pop();
        order.push_back(v);
        for (int w : dag.children[static_cast<std::size_t>(v)])
            if (--indeg[static_cast<std::size_t>(w)] == 0) ready.push(w);
    }
    if (static_cast<int>(order.size()) != n) return {};
    return order;
}

bool has_cycle(const Dag& dag) { return dag.size() > 0 && topological_order(dag).empty(); }

Dag remove_incoming(const Dag& dag, const Mask& targets) {
    Dag out = dag;
    for (int v = 0; v < dag.size(); ++v) {
        if (!targets[static_cast<std::size_t>(v)]) continue;
        for (int p : dag.parents[static_cast<std::size_t>(v)]) out.remove_edge(p, v);
    }
    return out;
}

Dag remove_outgoing(const Dag& dag, const Mask& sources) {
    Dag out = dag;
    for (int v = 0; v < dag.size(); ++v) {
        if (!sources[static_cast<std::size_t>(v)]) continue;
        for (int c : dag.children[static_cast<std::size_t>(v)]) out.remove_edge(v, c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// validate

ValidationReport validate(const GraphSpec& spec) {
    std::vector<Violation> out;

    std::map<std::string, const Node*> by_id;
    std::set<std::string> duplicates;
    for (const auto& n : spec.nodes) {
        if (!by_id.emplace(n.id, &n).second) duplicates.insert(n.id);
    }
    for (const auto& id : duplicates)
        out.push_back({"duplicate-node", {id}, "node id declared more than once"});

    std::map<std::string, std::vector<std::string>> parents;
    std::map<std::string, std::vector<std::string>> children;
    std::set<Edge> edges;
    for (const auto& e : spec.edges) {
        const bool known = by_id.count(e.first) && by_id.count(e.second);
        if (!known) {
            out.push_back({"unknown-endpoint", {e.first, e.second},
                           "edge " + e.first + " -> " + e.second + " references an undeclared node"});
            continue;
        }
        if (!edges.insert(e).second) continue;
        parents[e.second].push_back(e.first);
        children[e.first].push_back(e.second);
    }

    // Acyclicity: Kahn over the known-endpoint edges.
    {
        std::map<std::string, int> indeg;
        for (const auto& [id, _] : by_id) indeg[id] = 0;
        for (const auto& e : edges) ++indeg[e.second];
        std::vector<std::string> ready;
        for (const auto& [id, d] : indeg)
            if (d == 0) ready.push_back(id);
        std::size_t visited = 0;
        while (!ready.empty()) {
            std::string v = ready.back();
            ready.pop_back();
            ++visited;
            for (const auto& w : children[v])
                if (--indeg[w] == 0) ready.push_back(w);
        }
        if (visited != by_id.size()) {
            std::vector<std::string> cyclic;
            for (const auto& [id, d] : indeg)
                if (d > 0) cyclic.push_back(id);
            out.push_back({"acyclicity", cyclic, "edge set contains a directed cycle"});
        }
    }

    auto kind_of = [&](const std::string& id) { return by_id.at(id)->kind; };

    auto reach = [&](const std::string& start, const std::map<std::string, std::vector<std::string>>& next) {
        std::set<std::string> seen{start};
        std::vector<std::string> stack{start};
        while (!stack.empty()) {
            std::string v = stack.back();
            stack.pop_back();
            auto it = next.find(v);
            if (it == next.end()) continue;
            for (const auto& w : it->second)
                if (seen.insert(w).second) stack.push_back(w);
        }
        return seen;
    };

    // Data nodes.
    std::map<std::string, std::vector<std::string>> data_of_causal;
    for (const auto& [id, node] : by_id) {
        if (node->kind != NodeKind::Data) continue;
        if (node->info != InfoAttr::Observed)
            out.push_back({"data-node-info", {id}, "data nodes are always observed"});
        const auto& pa = parents[id];
        int causal = 0;
        int selection = 0;
        for (const auto& p : pa) {
            if (kind_of(p) == NodeKind::Causal) ++causal;
            else if (kind_of(p) == NodeKind::Selection) ++selection;
        }
        if (pa.size() != 2 || causal != 1 || selection != 1) {
            out.push_back({"data-node-parents", {id},
                           "data node must have exactly two parents: one causal node and one selection node"});
        } else {
            for (const auto& p : pa)
                if (kind_of(p) == NodeKind::Causal) data_of_causal[p].push_back(id);
        }
    }
    for (const auto& [causal, data] : data_of_causal) {
        if (data.size() > 1) {
            std::vector<std::string> ids{causal};
            ids.insert(ids.end(), data.begin(), data.end());
            out.push_back({"data-node-sharing", ids, "causal node is the parent of more than one data node"});
        }
    }

    // Population node.
    {
        const bool declared = spec.population && by_id.count(*spec.population) &&
                               kind_of(*spec.population) == NodeKind::Selection;
        if (!declared) {
            std::vector<std::string> ids;
            if (spec.population) ids.push_back(*spec.population);
            out.push_back({"population-node", ids, "no unique population node"});
        } else {
            const std::string& pop = *spec.population;
            auto anc = reach(pop, parents);
            for (const auto& a : anc) {
                if (a != pop && kind_of(a) == NodeKind::Selection) {
                    out.push_back({"population-node", {pop, a}, "population node has a selection-node ancestor"});
                }
            }
            auto desc = reach(pop, children);
            for (const auto& [id, node] : by_id) {
                if (node->kind == NodeKind::Selection && !desc.count(id)) {
                    out.push_back({"population-node", {id}, "selection node is not a descendant of the population node"});
                }
            }
        }
    }

    for (const auto& [id, node] : by_id) {
        if (node->shared_selection && node->kind != NodeKind::Selection)
            out.push_back({"shared-selection-kind", {id}, "shared selection flag on a non-selection node"});
    }

    std::stable_sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
        if (a.rule != b.rule) return a.rule < b.rule;
        return a.ids < b.ids;
    });
    return ValidationReport{std::move(out)};
}

// ---------------------------------------------------------------------------
// DesignGraph

DesignGraph::DesignGraph(GraphSpec spec)
    : name_(std::move(spec.name)), population_(std::move(spec.population)), nodes_(std::move(spec.nodes)) {
    std::sort(nodes_.begin(), nodes_.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!index_.emplace(nodes_[i].id, static_cast<int>(i)).second) {
            ValidationReport report;
            report.violations.push_back({"duplicate-node", {nodes_[i].id}, "node id declared more than once"});
            throw ValidationError(std::move(report));
        }
    }
    dag_ = Dag(nodes_.size());
    for (const auto& [from, to] : spec.edges) {
        auto a = index_.find(from);
        auto b = index_.find(to);
        if (a == index_.end() || b == index_.end()) {
            ValidationReport report;
            report.violations.push_back({"unknown-endpoint", {from, to},
                                         "edge " + from + " -> " + to + " references an undeclared node"});
            throw ValidationError(std::move(report));
        }
        dag_.add_edge(a->second, b->second);
    }
    if (population_ && !index_.count(*population_)) population_.reset();

    stages_.assign(nodes_.size(), 0);
    auto order = topological_order(dag_);
    if (order.empty() && !nodes_.empty()) {
        for (std::size_t i = 0; i < nodes_.size(); ++i) stages_[i] = nodes_[i].stage.value_or(0);
    } else {
        for (int v : order) {
            const auto& n = nodes_[static_cast<std::size_t>(v)];
            int s = 0;
            for (int p : dag_.parents[static_cast<std::size_t>(v)]) s = std::max(s, stages_[static_cast<std::size_t>(p)]);
            if (population_ && n.id == *population_) s = 0;
            stages_[static_cast<std::size_t>(v)] = n.stage.value_or(s);
        }
    }
}

DesignGraph DesignGraph::checked(GraphSpec spec) {
    auto report = validate(spec);
    if (!report.ok()) throw ValidationError(std::move(report));
    return DesignGraph(std::move(spec));
}

std::optional<int> DesignGraph::population_index() const {
    if (!population_) return std::nullopt;
    return index(*population_);
}

bool DesignGraph::contains(std::string_view id) const { return index_.count(std::string(id)) > 0; }

int DesignGraph::index(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw UnknownNode("unknown node '" + std::string(id) + "'");
    return it->second;
}

std::vector<int> DesignGraph::indices(const std::vector<std::string>& ids) const {
    std::vector<int> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(index(id));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::string> DesignGraph::ids(const std::vector<int>& indices) const {
    std::vector<std::string> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(id(i));
    return out;
}

bool DesignGraph::has_edge(std::string_view from, std::string_view to) const {
    return dag_.has_edge(index(from), index(to));
}

std::vector<Edge> DesignGraph::edges() const {
    std::vector<Edge> out;
    for (int v = 0; v < size(); ++v)
        for (int c : dag_.children[static_cast<std::size_t>(v)]) out.emplace_back(id(v), id(c));
    return out;
}

std::vector<std::string> DesignGraph::parents(std::string_view id) const {
    return ids(dag_.parents[static_cast<std::size_t>(index(id))]);
}

std::vector<std::string> DesignGraph::children(std::string_view id) const {
    return ids(dag_.children[static_cast<std::size_t>(index(id))]);
}

std::vector<int> DesignGraph::nodes_of_kind(NodeKind kind) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (nodes_[static_cast<std::size_t>(i)].kind == kind) out.push_back(i);
    return out;
}

std::optional<int> DesignGraph::data_node_of(int causal) const {
    for (int c : dag_.children[static_cast<std::size_t>(causal)])
        if (kind(c) == NodeKind::Data) return c;
    return std::nullopt;
}

std::optional<int> DesignGraph::measured_causal(int data) const {
    for (int p : dag_.parents[static_cast<std::size_t>(data)])
        if (kind(p) == NodeKind::Causal) return p;
    return std::nullopt;
}

std::optional<int> DesignGraph::measuring_selection(int data) const {
    for (int p : dag_.parents[static_cast<std::size_t>(data)])
        if (kind(p) == NodeKind::Selection) return p;
    return std::nullopt;
}

GraphSpec DesignGraph::spec() const {
    GraphSpec s;
    s.name = name_;
    s.population = population_;
    s.nodes = nodes_;
    s.edges = edges();
    return s;
}

DesignGraph DesignGraph::with_dag(const Dag& dag) const {
    DesignGraph out = *this;
    out.dag_ = dag;
    return out;
}

// ---------------------------------------------------------------------------
// free functions

std::vector<std::string> ancestors(const DesignGraph& g, const std::vector<std::string>& ids) {
    return g.ids(mask_members(ancestor_mask(g.dag(), make_mask(g.size(), g.indices(ids)))));
}

std::vector<std::string> descendants(const DesignGraph& g, const std::vector<std::string>& ids) {
    return g.ids(mask_members(descendant_mask(g.dag(), make_mask(g.size(), g.indices(ids)))));
}

DesignGraph surgery_remove_incoming(const DesignGraph& g, const std::vector<std::string>& ids) {
    return g.with_dag(remove_incoming(g.dag(), make_mask(g.size(), g.indices(ids))));
}

DesignGraph surgery_remove_outgoing(const DesignGraph& g, const std::vector<std::string>& ids) {
    return g.with_dag(remove_outgoing(g.dag(), make_mask(g.size(), g.indices(ids))));
}

bool is_latent(const DesignGraph& g, int i) {
    const Node& n = g.node(i);
    if (n.kind != NodeKind::Causal) return false;
    if (g.data_node_of(i)) return false;
    return n.info == InfoAttr::NotObserved || n.info == InfoAttr::DeterminedUnknown;
}

DesignGraph causal_projection(const DesignGraph& g) {
    GraphSpec s;
    s.name = g.name();
    for (int i : g.nodes_of_kind(NodeKind::Causal)) {
        Node n = g.node(i);
        if (g.data_node_of(i)) n.info = InfoAttr::Observed;
        s.nodes.push_back(std::move(n));
    }
    for (const auto& [from, to] : g.edges()) {
        if (g.node(from).kind == NodeKind::Causal && g.node(to).kind == NodeKind::Causal) s.edges.emplace_back(from, to);
    }
    return DesignGraph(std::move(s));
}

}  // namespace cdm
