#include "cdm/render.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace cdm {

std::string glyph_shape(InfoAttr info) {
    switch (info) {
        case InfoAttr::Observed:
        case InfoAttr::NotObserved: return "circle";
        case InfoAttr::DeterminedKnown:
        case InfoAttr::DeterminedUnknown: return "diamond";
    }
    return "circle";
}

bool glyph_filled(InfoAttr info) { return info == InfoAttr::Observed || info == InfoAttr::DeterminedKnown; }

std::map<std::string, NodePlacement> render_layout(const DesignGraph& g) {
    const auto order = topological_order(g.dag());
    std::vector<double> x(static_cast<std::size_t>(g.size()), 0.0);
    for (int v : order) {
        double best = 0.0;
        bool causal_parent = false;
        for (int p : g.dag().parents[static_cast<std::size_t>(v)]) {
            const bool both_causal = g.kind(v) == NodeKind::Causal && g.kind(p) == NodeKind::Causal;
            if (g.kind(v) == NodeKind::Causal && !both_causal) continue;
            const double cand = both_causal ? x[static_cast<std::size_t>(p)] + 1.0 : x[static_cast<std::size_t>(p)];
            if (!causal_parent || cand > best) best = cand;
            causal_parent = true;
        }
        if (g.kind(v) != NodeKind::Causal && causal_parent && !(g.population_index() && *g.population_index() == v))
            best += 0.5;
        x[static_cast<std::size_t>(v)] = best;
    }
    // non-causal nodes step right until their slot is free
    std::set<std::pair<double, int>> taken;
    for (int i : g.nodes_of_kind(NodeKind::Causal)) taken.emplace(x[static_cast<std::size_t>(i)], g.stage(i));
    for (int i = 0; i < g.size(); ++i) {
        if (g.kind(i) == NodeKind::Causal) continue;
        auto& xi = x[static_cast<std::size_t>(i)];
        while (taken.count({xi, g.stage(i)})) xi += 0.5;
        taken.emplace(xi, g.stage(i));
    }
    std::map<std::string, NodePlacement> out;
    for (int i = 0; i < g.size(); ++i) {
        const Node& n = g.node(i);
        out[n.id] = {x[static_cast<std::size_t>(i)], g.stage(i), glyph_shape(n.info), glyph_filled(n.info)};
    }
    return out;
}

namespace {

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string to_dot(const DesignGraph& g) {
    const auto layout = render_layout(g);
    std::ostringstream os;
    os << "digraph " << quoted(g.name()) << " {\n";
    os << "  node [fixedsize=true, width=0.45, fontsize=10];\n";
    for (const auto& n : g.nodes()) {
        const auto& p = layout.at(n.id);
        os << "  " << quoted(n.id) << " [shape=" << p.shape << ", style=" << (p.filled ? "filled" : "solid")
           << (p.filled ? ", fillcolor=gray80" : "") << ", pos=\"" << p.x * 1.5 << "," << -p.y * 1.5 << "!\"];\n";
    }
    for (const auto& [a, b] : g.edges()) os << "  " << quoted(a) << " -> " << quoted(b) << ";\n";
    os << "}\n";
    return os.str();
}

}  // namespace cdm
