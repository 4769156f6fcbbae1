#include "cdm/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cdm/errors.hpp"

namespace cdm {

std::string Stratum::label() const {
    std::string out = "{";
    for (std::size_t i = 0; i < pattern.size(); ++i)
        out += (i ? "," : "") + pattern[i].first + "=" + std::to_string(pattern[i].second);
    return out + "}";
}

namespace {

std::vector<int> topo_rank(const DesignGraph& g) {
    std::vector<int> rank(static_cast<std::size_t>(g.size()), 0);
    const auto order = topological_order(g.dag());
    for (std::size_t k = 0; k < order.size(); ++k) rank[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
    return rank;
}

bool is_determined(const Node& n) {
    return n.info == InfoAttr::DeterminedKnown || n.info == InfoAttr::DeterminedUnknown;
}

// Node holding the value of causal `v` in a stratum, or -1 when unavailable.
int value_holder(const DesignGraph& g, int v, const std::vector<int>& state) {
    if (auto d = g.data_node_of(v)) return column_available(g, *d, state) ? *d : -1;
    const Node& n = g.node(v);
    if (n.info == InfoAttr::Observed || n.info == InfoAttr::DeterminedKnown)
        return column_available(g, v, state) ? v : -1;
    return -1;
}

}  // namespace

Factorization factorize(const DesignGraph& g) {
    const auto rank = topo_rank(g);
    const auto pop = g.population_index();
    std::vector<int> order = topological_order(g.dag());

    std::vector<int> sel;
    for (int i : order)
        if (g.kind(i) == NodeKind::Selection && !(pop && *pop == i)) sel.push_back(i);

    Factorization f;
    f.graph = g.name();
    for (const auto& n : g.nodes()) f.shared_selection = f.shared_selection || n.shared_selection;

    // Enumerate nesting-consistent assignments.
    std::vector<std::vector<int>> states;
    std::vector<int> state(static_cast<std::size_t>(g.size()), -1);
    if (pop) state[static_cast<std::size_t>(*pop)] = 1;
    std::function<void(std::size_t)> rec = [&](std::size_t k) {
        if (k == sel.size()) {
            states.push_back(state);
            return;
        }
        const int s = sel[k];
        bool gated = false;
        for (int p : g.dag().parents[static_cast<std::size_t>(s)])
            if (g.kind(p) == NodeKind::Selection && state[static_cast<std::size_t>(p)] == 0) gated = true;
        for (int v : {1, 0}) {
            if (gated && v == 1) continue;
            state[static_cast<std::size_t>(s)] = v;
            rec(k + 1);
        }
    };
    rec(0);
    auto ones = [&](const std::vector<int>& st) {
        int n = 0;
        for (int s : sel) n += st[static_cast<std::size_t>(s)] == 1;
        return n;
    };
    std::stable_sort(states.begin(), states.end(),
                     [&](const std::vector<int>& a, const std::vector<int>& b) { return ones(a) > ones(b); });

    for (const auto& st : states) {
        Stratum s;
        s.selection = st;
        std::vector<int> zeros, deepest;
        for (int n : sel) {
            const int v = st[static_cast<std::size_t>(n)];
            if (v == 0) {
                bool outer = true;
                for (int p : g.dag().parents[static_cast<std::size_t>(n)])
                    if (g.kind(p) == NodeKind::Selection && st[static_cast<std::size_t>(p)] == 0) outer = false;
                if (outer) zeros.push_back(n);
            } else {
                bool inner = true;
                for (int c : g.dag().children[static_cast<std::size_t>(n)])
                    if (g.kind(c) == NodeKind::Selection && st[static_cast<std::size_t>(c)] == 1) inner = false;
                if (inner) deepest.push_back(n);
            }
        }
        auto later_first = [&](int a, int b) { return rank[static_cast<std::size_t>(a)] > rank[static_cast<std::size_t>(b)]; };
        std::sort(zeros.begin(), zeros.end(), later_first);
        std::sort(deepest.begin(), deepest.end(), later_first);
        for (int n : zeros) s.pattern.emplace_back(g.id(n), 0);
        for (int n : deepest) s.pattern.emplace_back(g.id(n), 1);

        for (int i : order) {
            const Node& n = g.node(i);
            if (n.kind == NodeKind::Data || (pop && *pop == i)) continue;
            Factor fac;
            fac.node = i;
            fac.target = n.id;
            if (n.kind == NodeKind::Selection) {
                bool gated = false;
                for (int p : g.dag().parents[static_cast<std::size_t>(i)])
                    if (g.kind(p) == NodeKind::Selection && st[static_cast<std::size_t>(p)] == 0) gated = true;
                if (gated) continue;
                fac.family = ParamFamily::Psi;
                fac.fixed_value = st[static_cast<std::size_t>(i)];
            } else {
                fac.family = is_determined(n) ? ParamFamily::Psi : ParamFamily::Theta;
                const int h = value_holder(g, i, st);
                if (h >= 0) fac.substitution[n.id] = g.id(h);
                else s.marginalized.push_back(n.id);
            }
            std::vector<int> parents = g.dag().parents[static_cast<std::size_t>(i)];
            std::sort(parents.begin(), parents.end(), [&](int a, int b) { return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)]; });
            for (int p : parents) {
                fac.conditioning.push_back(g.id(p));
                std::string shown = g.id(p);
                if (g.kind(p) == NodeKind::Causal) {
                    const int h = value_holder(g, p, st);
                    if (h >= 0) fac.substitution[g.id(p)] = g.id(h);
                    if (h >= 0 && h != p) shown += "=" + g.id(h);
                } else if (g.kind(p) == NodeKind::Selection && !(pop && *pop == p)) {
                    shown += "=" + std::to_string(st[static_cast<std::size_t>(p)]);
                }
                fac.shown_given.push_back(std::move(shown));
            }
            if (fac.fixed_value >= 0) fac.shown_target = n.id + "=" + std::to_string(fac.fixed_value);
            else if (auto it = fac.substitution.find(n.id); it != fac.substitution.end()) fac.shown_target = it->second;
            else fac.shown_target = n.id;
            s.factors.push_back(std::move(fac));
        }
        f.strata.push_back(std::move(s));
    }
    return f;
}

Factorization marginalize(const Factorization& in, const DesignGraph& g) {
    Factorization f = in;
    f.marginalized = true;
    const auto rank = topo_rank(g);
    for (auto& s : f.strata) {
        s.scopes.clear();
        s.dropped.clear();
        std::set<std::string> open(s.marginalized.begin(), s.marginalized.end());

        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& v : std::vector<std::string>(open.begin(), open.end())) {
                const bool needed = std::any_of(s.factors.begin(), s.factors.end(), [&](const Factor& fac) {
                    return std::find(fac.conditioning.begin(), fac.conditioning.end(), v) != fac.conditioning.end();
                });
                if (needed) continue;
                s.factors.erase(std::remove_if(s.factors.begin(), s.factors.end(),
                                               [&](const Factor& fac) { return fac.target == v; }),
                                s.factors.end());
                open.erase(v);
                s.dropped.push_back(v);
                changed = true;
            }
        }

        // connected components of the remaining unobserved variables
        std::map<std::string, std::string> parent;
        for (const auto& v : open) parent[v] = v;
        std::function<std::string(const std::string&)> find = [&](const std::string& v) {
            return parent[v] == v ? v : parent[v] = find(parent[v]);
        };
        auto involved = [&](const Factor& fac) {
            std::vector<std::string> out;
            if (open.count(fac.target)) out.push_back(fac.target);
            for (const auto& c : fac.conditioning)
                if (open.count(c)) out.push_back(c);
            return out;
        };
        for (const auto& fac : s.factors) {
            auto vs = involved(fac);
            for (std::size_t k = 1; k < vs.size(); ++k) parent[find(vs[k])] = find(vs[0]);
        }
        std::map<std::string, SumScope> scopes;
        for (const auto& v : open) scopes[find(v)].vars.push_back(v);
        for (std::size_t i = 0; i < s.factors.size(); ++i) {
            auto vs = involved(s.factors[i]);
            if (!vs.empty()) scopes[find(vs[0])].factors.push_back(static_cast<int>(i));
        }
        auto by_rank = [&](const std::string& a, const std::string& b) {
            return rank[static_cast<std::size_t>(g.index(a))] < rank[static_cast<std::size_t>(g.index(b))];
        };
        for (auto& [root, scope] : scopes) {
            std::sort(scope.vars.begin(), scope.vars.end(), by_rank);
            s.scopes.push_back(std::move(scope));
        }
        std::sort(s.scopes.begin(), s.scopes.end(),
                  [](const SumScope& a, const SumScope& b) { return a.factors.front() < b.factors.front(); });
        std::sort(s.dropped.begin(), s.dropped.end(), by_rank);
    }
    return f;
}

// ---------------------------------------------------------------------------
// rendering

namespace {

std::string factor_text(const Factor& fac) {
    std::string out = "p";
    auto sub = fac.substitution.find(fac.target);
    if (sub != fac.substitution.end() && sub->second != fac.target) out += "_" + fac.target;
    out += "(" + fac.shown_target + "|";
    for (const auto& c : fac.shown_given) out += c + ",";
    out += fac.family == ParamFamily::Theta ? "θ)" : "ψ)";
    return out;
}

}  // namespace

std::string render_text(const Factorization& f) {
    std::ostringstream out;
    for (const auto& s : f.strata) {
        out << s.label() << ":";
        std::vector<int> scope_of(s.factors.size(), -1);
        for (std::size_t k = 0; k < s.scopes.size(); ++k)
            for (int i : s.scopes[k].factors) scope_of[static_cast<std::size_t>(i)] = static_cast<int>(k);
        std::vector<char> printed(s.scopes.size(), 0);
        bool first = true;
        auto sep = [&]() {
            out << (first ? " " : " * ");
            first = false;
        };
        for (std::size_t i = 0; i < s.factors.size(); ++i) {
            const int k = scope_of[i];
            if (k < 0) {
                sep();
                out << factor_text(s.factors[i]);
                continue;
            }
            if (printed[static_cast<std::size_t>(k)]) continue;
            printed[static_cast<std::size_t>(k)] = 1;
            const auto& scope = s.scopes[static_cast<std::size_t>(k)];
            sep();
            out << "sum_{";
            for (std::size_t v = 0; v < scope.vars.size(); ++v) out << (v ? "," : "") << scope.vars[v];
            out << "} [";
            for (std::size_t j = 0; j < scope.factors.size(); ++j)
                out << (j ? " * " : " ") << factor_text(s.factors[static_cast<std::size_t>(scope.factors[j])]);
            out << " ]";
        }
        if (first) out << " 1";
        if (!f.marginalized && !s.marginalized.empty()) {
            out << "   unobserved: ";
            for (std::size_t v = 0; v < s.marginalized.size(); ++v) out << (v ? "," : "") << s.marginalized[v];
        }
        out << "\n";
    }
    return out.str();
}

std::string render_json(const Factorization& f) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["graph"] = f.graph;
    j["marginalized"] = f.marginalized;
    j["shared_selection"] = f.shared_selection;
    auto strata = nlohmann::ordered_json::array();
    for (const auto& s : f.strata) {
        nlohmann::ordered_json js;
        js["label"] = s.label();
        auto pattern = nlohmann::ordered_json::array();
        for (const auto& [id, v] : s.pattern) pattern.push_back({{"node", id}, {"value", v}});
        js["pattern"] = pattern;
        auto factors = nlohmann::ordered_json::array();
        for (const auto& fac : s.factors) {
            nlohmann::ordered_json jf;
            jf["target"] = fac.target;
            jf["given"] = fac.conditioning;
            jf["family"] = fac.family == ParamFamily::Theta ? "theta" : "psi";
            if (fac.fixed_value >= 0) jf["value"] = fac.fixed_value;
            jf["substitution"] = fac.substitution;
            factors.push_back(jf);
        }
        js["factors"] = factors;
        js["unobserved"] = s.marginalized;
        if (f.marginalized) {
            auto scopes = nlohmann::ordered_json::array();
            for (const auto& sc : s.scopes) scopes.push_back({{"vars", sc.vars}, {"factors", sc.factors}});
            js["scopes"] = scopes;
            js["dropped"] = s.dropped;
        }
        strata.push_back(js);
    }
    j["strata"] = strata;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// likelihood

CompiledLikelihood::CompiledLikelihood(const DiscreteModel& model, const Factorization& f, const FrequencyTable& data)
    : model_(model), f_(f) {
    const DesignGraph& g = model.graph();
    if (f.shared_selection)
        throw SharedSelectionUnsupported("unsupported shared selection: the likelihood does not factor over individuals");
    if (f.graph != g.name()) throw ModelError("factorization and model describe different graphs");
    for (const auto& s : f.strata)
        if (s.selection.size() != static_cast<std::size_t>(g.size()))
            throw ModelError("factorization and model describe different graphs");
    if (!f_.marginalized) f_ = marginalize(f_, g);

    const std::vector<int> observable = observable_columns(g);
    std::vector<int> col_node;
    for (const auto& c : data.columns) {
        if (!g.contains(c)) throw DataMismatch("column '" + c + "' is not a node of the graph");
        const int i = g.index(c);
        const bool ok = g.kind(i) == NodeKind::Selection ||
                        std::find(observable.begin(), observable.end(), i) != observable.end();
        if (!ok) throw DataMismatch("column '" + c + "' is not observable");
        col_node.push_back(i);
    }
    for (int i : observable)
        if (std::find(col_node.begin(), col_node.end(), i) == col_node.end())
            throw DataMismatch("data has no column for '" + g.id(i) + "'");

    const int n = g.size();
    for (const auto& r : data.rows) {
        if (r.values.size() != data.columns.size()) throw DataMismatch("row width differs from the header");
        Row row;
        row.count = r.count;
        for (std::size_t k = 0; k < r.values.size(); ++k)
            row.text += (k ? "," : "") + data.columns[k] + "=" + r.values[k];

        // value index per node, -1 missing
        std::vector<int> value(static_cast<std::size_t>(n), -1);
        for (std::size_t k = 0; k < r.values.size(); ++k) {
            const int node = col_node[k];
            if (r.values[k] == kMissing) continue;
            const auto& labels = model.labels(node);
            auto it = std::find(labels.begin(), labels.end(), r.values[k]);
            if (it == labels.end())
                throw DataMismatch("value '" + r.values[k] + "' is not in the domain of '" + g.id(node) + "'");
            value[static_cast<std::size_t>(node)] = static_cast<int>(it - labels.begin());
        }

        for (std::size_t si = 0; si < f_.strata.size(); ++si) {
            const Stratum& s = f_.strata[si];
            bool match = true;
            for (std::size_t k = 0; k < col_node.size() && match; ++k) {
                const int node = col_node[k];
                const int v = value[static_cast<std::size_t>(node)];
                if (g.kind(node) == NodeKind::Selection) {
                    if (v >= 0 && v != s.selection[static_cast<std::size_t>(node)]) match = false;
                } else if (column_available(g, node, s.selection) != (v >= 0)) {
                    match = false;
                }
            }
            if (!match) continue;

            Prepared p;
            p.stratum = static_cast<int>(si);
            p.state.assign(static_cast<std::size_t>(n), -1);
            for (int i = 0; i < n; ++i) {
                if (g.kind(i) == NodeKind::Selection) p.state[static_cast<std::size_t>(i)] = s.selection[static_cast<std::size_t>(i)];
            }
            for (int i = 0; i < n; ++i) {
                if (g.kind(i) == NodeKind::Data) {
                    const int c = *g.measured_causal(i);
                    const bool avail = column_available(g, i, s.selection);
                    p.state[static_cast<std::size_t>(i)] = avail ? value[static_cast<std::size_t>(i)] : model.value_count(i) - 1;
                    if (avail) p.state[static_cast<std::size_t>(c)] = value[static_cast<std::size_t>(i)];
                } else if (g.kind(i) == NodeKind::Causal && value[static_cast<std::size_t>(i)] >= 0) {
                    p.state[static_cast<std::size_t>(i)] = value[static_cast<std::size_t>(i)];
                }
            }
            row.strata.push_back(std::move(p));
        }
        if (row.strata.empty() && row.count > 0) throw RowMatchesNoStratum("row " + row.text + " matches no selection stratum");
        rows_.push_back(std::move(row));
    }
}

double CompiledLikelihood::stratum_probability(const Prepared& p, const std::vector<double>& params) const {
    const Stratum& s = f_.strata[static_cast<std::size_t>(p.stratum)];
    std::vector<int> state = p.state;
    std::vector<char> in_scope(s.factors.size(), 0);
    for (const auto& sc : s.scopes)
        for (int i : sc.factors) in_scope[static_cast<std::size_t>(i)] = 1;

    auto factor_prob = [&](const Factor& fac) {
        const ModelVariable* v = model_.variable_of_node(fac.node);
        const int value = fac.fixed_value >= 0 ? fac.fixed_value : state[static_cast<std::size_t>(fac.node)];
        return model_.prob(*v, value, state, params);
    };

    double prob = 1.0;
    for (std::size_t i = 0; i < s.factors.size(); ++i)
        if (!in_scope[i]) prob *= factor_prob(s.factors[i]);
    if (prob == 0.0) return 0.0;

    const DesignGraph& g = model_.graph();
    for (const auto& sc : s.scopes) {
        std::vector<int> nodes;
        for (const auto& id : sc.vars) nodes.push_back(g.index(id));
        std::function<double(std::size_t)> rec = [&](std::size_t k) -> double {
            if (k == nodes.size()) {
                double q = 1.0;
                for (int i : sc.factors) q *= factor_prob(s.factors[static_cast<std::size_t>(i)]);
                return q;
            }
            double total = 0.0;
            const int node = nodes[k];
            const int dom = static_cast<int>(model_.labels(node).size());
            for (int v = 0; v < dom; ++v) {
                state[static_cast<std::size_t>(node)] = v;
                total += rec(k + 1);
            }
            return total;
        };
        prob *= rec(0);
    }
    return prob;
}

double CompiledLikelihood::row_probability(std::size_t row, const std::vector<double>& params) const {
    double p = 0.0;
    for (const auto& prep : rows_.at(row).strata) p += stratum_probability(prep, params);
    return p;
}

double CompiledLikelihood::operator()(const std::vector<double>& params) const {
    double ll = 0.0;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        if (rows_[r].count <= 0.0) continue;
        const double p = row_probability(r, params);
        if (!(p > 0.0) || !std::isfinite(p)) return -std::numeric_limits<double>::infinity();
        ll += rows_[r].count * std::log(p);
    }
    return ll;
}

double CompiledLikelihood::checked(const std::vector<double>& params) const {
    double ll = 0.0;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        if (rows_[r].count <= 0.0) continue;
        const double p = row_probability(r, params);
        if (!(p > 0.0) || !std::isfinite(p))
            throw NonfiniteLogLik("row " + rows_[r].text + " has probability " + std::to_string(p));
        ll += rows_[r].count * std::log(p);
    }
    return ll;
}

std::vector<std::vector<int>> CompiledLikelihood::matches() const {
    std::vector<std::vector<int>> out;
    for (const auto& r : rows_) {
        std::vector<int> m;
        for (const auto& p : r.strata) m.push_back(p.stratum);
        out.push_back(std::move(m));
    }
    return out;
}

double loglik(const DiscreteModel& model, const Factorization& f, const FrequencyTable& data, const ParamMap& params) {
    return CompiledLikelihood(model, f, data).checked(model.param_vector(params));
}

}  // namespace cdm
