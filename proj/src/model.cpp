#include "cdm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cdm/errors.hpp"

namespace cdm {

namespace {

const std::vector<std::string> kBinary = {"0", "1"};

const std::vector<std::string>& node_labels(const Node& n) { return n.domain ? *n.domain : kBinary; }

bool all_single_char(const std::string& target, const std::vector<std::string>& subset) {
    if (target.size() != 1) return false;
    return std::all_of(subset.begin(), subset.end(), [](const std::string& s) { return s.size() == 1; });
}

}  // namespace

std::string coefficient_name(const std::string& prefix, const std::string& target,
                             const std::vector<std::string>& subset) {
    std::string name = prefix + "_" + target;
    const bool compact = all_single_char(target, subset);
    for (const auto& s : subset) name += compact ? s : "_" + s;
    return name;
}

DiscreteModel::DiscreteModel(DesignGraph graph, std::map<std::string, Cpt> cpts)
    : graph_(std::make_shared<const DesignGraph>(std::move(graph))) {
    const DesignGraph& g = *graph_;
    node_to_variable_.assign(static_cast<std::size_t>(g.size()), -1);
    const auto pop = g.population_index();
    std::vector<int> order = topological_order(g.dag());
    if (order.empty() && g.size() > 0) throw ModelError("model graph is cyclic");

    std::map<std::string, int> param_slot;
    for (int i : order) {
        const Node& n = g.node(i);
        if (n.kind == NodeKind::Data) continue;
        if (pop && *pop == i) continue;

        ModelVariable v;
        v.node = i;
        v.id = n.id;
        v.kind = n.kind;
        v.labels = n.kind == NodeKind::Selection ? kBinary : node_labels(n);
        for (int p : g.dag().parents[static_cast<std::size_t>(i)]) {
            if (n.kind == NodeKind::Selection && g.kind(p) == NodeKind::Selection)
                v.gate_parents.push_back(p);
            else
                v.table_parents.push_back(p);
        }
        for (int p : v.table_parents) v.parent_radix.push_back(value_count(p));

        auto it = cpts.find(n.id);
        if (it == cpts.end()) throw ModelError("no table given for '" + n.id + "'");
        v.cpt = it->second;

        std::size_t configs = 1;
        for (int r : v.parent_radix) configs *= static_cast<std::size_t>(r);

        if (auto* t = std::get_if<TableCpt>(&v.cpt)) {
            if (t->rows.size() != configs) throw ModelError("table of '" + n.id + "' has wrong row count");
            for (const auto& row : t->rows)
                if (row.size() != v.labels.size()) throw ModelError("table of '" + n.id + "' has wrong row width");
        } else {
            auto& lin = std::get<LinearBinaryCpt>(v.cpt);
            if (v.labels.size() != 2) throw NonBinaryVariable("'" + n.id + "' is not binary");
            for (std::size_t k = 0; k < v.table_parents.size(); ++k) {
                const int p = v.table_parents[k];
                const bool ok = g.kind(p) == NodeKind::Data ? v.parent_radix[k] == 3 : v.parent_radix[k] == 2;
                if (!ok) throw NonBinaryVariable("parent '" + g.id(p) + "' of '" + n.id + "' is not binary");
            }
            if (lin.coefficients.size() != (std::size_t{1} << v.table_parents.size()))
                throw ModelError("linear table of '" + n.id + "' needs one coefficient per parent subset");
            for (const auto& c : lin.coefficients) {
                auto [slot, fresh] = param_slot.emplace(c, static_cast<int>(param_names_.size()));
                if (fresh) param_names_.push_back(c);
                v.coefficient_index.push_back(slot->second);
            }
        }
        node_to_variable_[static_cast<std::size_t>(i)] = static_cast<int>(variables_.size());
        variables_.push_back(std::move(v));
    }
}

const ModelVariable& DiscreteModel::variable(const std::string& id) const {
    const ModelVariable* v = variable_of_node(graph_->index(id));
    if (!v) throw UnknownNode("'" + id + "' is not a model variable");
    return *v;
}

const ModelVariable* DiscreteModel::variable_of_node(int node) const {
    const int k = node_to_variable_.at(static_cast<std::size_t>(node));
    return k < 0 ? nullptr : &variables_[static_cast<std::size_t>(k)];
}

int DiscreteModel::value_count(int node) const {
    const Node& n = graph_->node(node);
    switch (n.kind) {
        case NodeKind::Selection: return 2;
        case NodeKind::Causal: return static_cast<int>(node_labels(n).size());
        case NodeKind::Data: {
            auto c = graph_->measured_causal(node);
            return (c ? static_cast<int>(node_labels(graph_->node(*c)).size()) : 2) + 1;
        }
    }
    return 2;
}

const std::vector<std::string>& DiscreteModel::labels(int node) const {
    const Node& n = graph_->node(node);
    if (n.kind == NodeKind::Selection) return kBinary;
    if (n.kind == NodeKind::Data) {
        auto c = graph_->measured_causal(node);
        return c ? node_labels(graph_->node(*c)) : kBinary;
    }
    return node_labels(n);
}

std::vector<double> DiscreteModel::param_vector(const ParamMap& params) const {
    std::vector<double> out;
    out.reserve(param_names_.size());
    for (const auto& name : param_names_) {
        auto it = params.find(name);
        if (it == params.end()) throw ModelError("missing parameter '" + name + "'");
        out.push_back(it->second);
    }
    return out;
}

ParamMap DiscreteModel::param_map(const std::vector<double>& values) const {
    ParamMap out;
    for (std::size_t i = 0; i < param_names_.size(); ++i) out[param_names_[i]] = values.at(i);
    return out;
}

namespace {

std::size_t row_of(const ModelVariable& v, const std::vector<int>& state) {
    std::size_t row = 0;
    for (std::size_t k = 0; k < v.table_parents.size(); ++k)
        row = row * static_cast<std::size_t>(v.parent_radix[k]) +
              static_cast<std::size_t>(state[static_cast<std::size_t>(v.table_parents[k])]);
    return row;
}

// Missing data parents count as 0 in the linear form.
double linear_p1(const ModelVariable& v, unsigned present, const std::vector<double>& params) {
    double p = 0.0;
    for (std::size_t mask = 0; mask < v.coefficient_index.size(); ++mask)
        if ((mask & present) == mask) p += params[static_cast<std::size_t>(v.coefficient_index[mask])];
    return p;
}

unsigned present_mask(const ModelVariable& v, const std::vector<int>& state) {
    unsigned present = 0;
    for (std::size_t k = 0; k < v.table_parents.size(); ++k)
        if (state[static_cast<std::size_t>(v.table_parents[k])] == 1) present |= 1u << k;
    return present;
}

}  // namespace

double DiscreteModel::prob(const ModelVariable& v, int value, const std::vector<int>& state,
                           const std::vector<double>& params) const {
    for (int gp : v.gate_parents)
        if (state[static_cast<std::size_t>(gp)] == 0) return value == 0 ? 1.0 : 0.0;
    if (const auto* t = std::get_if<TableCpt>(&v.cpt)) return t->rows[row_of(v, state)][static_cast<std::size_t>(value)];
    const double p1 = linear_p1(v, present_mask(v, state), params);
    return value == 1 ? p1 : 1.0 - p1;
}

std::vector<double> DiscreteModel::implied_probabilities(const std::vector<double>& params) const {
    std::vector<double> out;
    for (const auto& v : variables_) {
        if (!std::holds_alternative<LinearBinaryCpt>(v.cpt)) continue;
        const unsigned full = (1u << v.table_parents.size()) - 1;
        // Only the pattern of ones matters, so every subset covers all configurations.
        for (unsigned present = 0; present <= full; ++present) out.push_back(linear_p1(v, present, params));
    }
    return out;
}

bool DiscreteModel::valid(const std::vector<double>& params, double slack) const {
    for (double p : implied_probabilities(params))
        if (!(p >= -slack && p <= 1.0 + slack)) return false;
    for (const auto& v : variables_) {
        const auto* t = std::get_if<TableCpt>(&v.cpt);
        if (!t) continue;
        for (const auto& row : t->rows) {
            double sum = 0.0;
            for (double p : row) {
                if (!(p >= -slack && p <= 1.0 + slack)) return false;
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9 + slack) return false;
        }
    }
    return true;
}

double DiscreteModel::state_count() const {
    double n = 1.0;
    for (const auto& v : variables_) n *= static_cast<double>(v.labels.size());
    return n;
}

bool DiscreteModel::has_shared_selection() const {
    for (const auto& n : graph_->nodes())
        if (n.shared_selection) return true;
    return false;
}

// ---------------------------------------------------------------------------

DiscreteModel linear_binary_model(const DesignGraph& g) {
    std::vector<int> order = topological_order(g.dag());
    std::vector<int> rank(static_cast<std::size_t>(g.size()), 0);
    for (std::size_t k = 0; k < order.size(); ++k) rank[static_cast<std::size_t>(order[k])] = static_cast<int>(k);

    const auto pop = g.population_index();
    std::map<std::string, Cpt> cpts;
    for (int i = 0; i < g.size(); ++i) {
        const Node& n = g.node(i);
        if (n.kind == NodeKind::Data || (pop && *pop == i)) continue;
        if (n.kind == NodeKind::Causal && node_labels(n).size() != 2)
            throw NonBinaryVariable("'" + n.id + "' is not binary");
        std::vector<int> table;
        for (int p : g.dag().parents[static_cast<std::size_t>(i)])
            if (!(n.kind == NodeKind::Selection && g.kind(p) == NodeKind::Selection)) table.push_back(p);
        const std::string prefix = n.kind == NodeKind::Causal ? "theta" : "psi";
        LinearBinaryCpt lin;
        for (unsigned mask = 0; mask < (1u << table.size()); ++mask) {
            std::vector<int> subset;
            for (std::size_t k = 0; k < table.size(); ++k)
                if (mask & (1u << k)) subset.push_back(table[k]);
            std::sort(subset.begin(), subset.end(),
                      [&](int a, int b) { return rank[static_cast<std::size_t>(a)] > rank[static_cast<std::size_t>(b)]; });
            lin.coefficients.push_back(coefficient_name(prefix, n.id, g.ids(subset)));
        }
        cpts.emplace(n.id, std::move(lin));
    }
    return DiscreteModel(g, std::move(cpts));
}

DesignGraph observable_design(const DesignGraph& g) {
    const int n = g.size();
    Mask latent(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) latent[static_cast<std::size_t>(i)] = is_latent(g, i);

    for (int i = 0; i < n; ++i) {
        if (!latent[static_cast<std::size_t>(i)]) continue;
        for (int c : g.dag().children[static_cast<std::size_t>(i)])
            if (g.kind(c) != NodeKind::Causal)
                throw UnsupportedDesign("latent '" + g.id(i) + "' has a non-causal child '" + g.id(c) + "'");
    }

    // Causal parents through latent-only chains, and the latent roots above each node.
    std::vector<std::set<int>> dir_parents(static_cast<std::size_t>(n)), latent_sources(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
        if (g.kind(v) != NodeKind::Causal || latent[static_cast<std::size_t>(v)]) continue;
        std::vector<int> stack(g.dag().parents[static_cast<std::size_t>(v)]);
        std::set<int> seen;
        while (!stack.empty()) {
            int p = stack.back();
            stack.pop_back();
            if (!seen.insert(p).second) continue;
            if (g.kind(p) != NodeKind::Causal) continue;
            if (latent[static_cast<std::size_t>(p)]) {
                latent_sources[static_cast<std::size_t>(v)].insert(p);
                for (int q : g.dag().parents[static_cast<std::size_t>(p)]) stack.push_back(q);
            } else {
                dir_parents[static_cast<std::size_t>(v)].insert(p);
            }
        }
    }
    auto confounded = [&](int a, int b) {
        const auto& la = latent_sources[static_cast<std::size_t>(a)];
        const auto& lb = latent_sources[static_cast<std::size_t>(b)];
        return std::any_of(la.begin(), la.end(), [&](int u) { return lb.count(u) > 0; });
    };

    std::vector<int> order;
    for (int v : topological_order(g.dag()))
        if (g.kind(v) == NodeKind::Causal && !latent[static_cast<std::size_t>(v)]) order.push_back(v);

    GraphSpec s;
    s.name = g.name();
    s.population = g.population();
    for (int i = 0; i < n; ++i)
        if (!latent[static_cast<std::size_t>(i)]) s.nodes.push_back(g.node(i));
    for (const auto& [from, to] : g.edges()) {
        const int a = g.index(from), b = g.index(to);
        if (latent[static_cast<std::size_t>(a)] || latent[static_cast<std::size_t>(b)]) continue;
        if (g.kind(a) == NodeKind::Causal && g.kind(b) == NodeKind::Causal) continue;
        s.edges.emplace_back(from, to);
    }
    for (std::size_t k = 0; k < order.size(); ++k) {
        const int v = order[k];
        // c-component of v among v and its predecessors
        std::set<int> comp = {v};
        std::vector<int> frontier = {v};
        while (!frontier.empty()) {
            int a = frontier.back();
            frontier.pop_back();
            for (std::size_t j = 0; j < k; ++j) {
                const int b = order[j];
                if (!comp.count(b) && confounded(a, b)) {
                    comp.insert(b);
                    frontier.push_back(b);
                }
            }
        }
        std::set<int> pa;
        for (int c : comp) {
            if (c != v) pa.insert(c);
            for (int p : dir_parents[static_cast<std::size_t>(c)]) pa.insert(p);
        }
        pa.erase(v);
        for (int p : pa) s.edges.emplace_back(g.id(p), g.id(v));
    }
    return DesignGraph(std::move(s));
}

DiscreteModel saturated_binary_parametrization(const DesignGraph& g) {
    return linear_binary_model(observable_design(g));
}

}  // namespace cdm
