#include "cdm/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cdm/errors.hpp"

namespace cdm {

std::string default_symbol(const std::string& var) {
    std::string s = var;
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

ProbExpr prob(std::vector<Binding> outcome, std::vector<Binding> given, std::vector<Binding> intervened) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Prob;
    n->outcome = std::move(outcome);
    n->given = std::move(given);
    n->intervened = std::move(intervened);
    return n;
}

ProbExpr sum(std::vector<Binding> bound, ProbExpr body) {
    if (bound.empty()) return body;
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Sum;
    n->bound = std::move(bound);
    n->children = {std::move(body)};
    return n;
}

ProbExpr product(std::vector<ProbExpr> factors) {
    if (factors.size() == 1) return factors.front();
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Product;
    n->children = std::move(factors);
    return n;
}

ProbExpr fraction(ProbExpr num, ProbExpr den) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Fraction;
    n->children = {std::move(num), std::move(den)};
    return n;
}

ProbExpr constant(double value) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Const;
    n->value = value;
    return n;
}

std::vector<Binding> bindings(const std::vector<std::string>& vars) {
    std::vector<Binding> out;
    for (const auto& v : vars) out.push_back({v, default_symbol(v)});
    return out;
}

// ---------------------------------------------------------------------------
// rendering

namespace {

std::string term(const Binding& b) { return b.var + "=" + b.sym; }

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void render_to(const ProbExpr& e, std::ostringstream& out) {
    switch (e->kind) {
        case ExprKind::Const: out << format_number(e->value); return;
        case ExprKind::Prob: {
            out << "P(";
            for (std::size_t i = 0; i < e->outcome.size(); ++i) {
                const auto& b = e->outcome[i];
                out << (i ? "," : "") << (b.sym == default_symbol(b.var) ? b.sym : term(b));
            }
            if (!e->given.empty() || !e->intervened.empty()) {
                out << "|";
                bool first = true;
                for (const auto& b : e->given) {
                    out << (first ? "" : ",") << term(b);
                    first = false;
                }
                if (!e->intervened.empty()) {
                    out << (first ? "" : ",") << "do(";
                    for (std::size_t i = 0; i < e->intervened.size(); ++i) out << (i ? "," : "") << term(e->intervened[i]);
                    out << ")";
                }
            }
            out << ")";
            return;
        }
        case ExprKind::Sum: {
            out << "sum_";
            if (e->bound.size() == 1) {
                out << e->bound[0].sym;
            } else {
                out << "{";
                for (std::size_t i = 0; i < e->bound.size(); ++i) out << (i ? "," : "") << e->bound[i].sym;
                out << "}";
            }
            out << " ";
            render_to(e->children[0], out);
            return;
        }
        case ExprKind::Product:
            for (std::size_t i = 0; i < e->children.size(); ++i) {
                const auto& f = e->children[i];
                const bool wrap = f->kind == ExprKind::Fraction ||
                                  (f->kind == ExprKind::Sum && i + 1 < e->children.size()) ||
                                  f->kind == ExprKind::Product;
                if (i) out << " * ";
                if (wrap) out << "(";
                render_to(f, out);
                if (wrap) out << ")";
            }
            return;
        case ExprKind::Fraction:
            out << "(";
            render_to(e->children[0], out);
            out << ") / (";
            render_to(e->children[1], out);
            out << ")";
            return;
    }
}

nlohmann::ordered_json bindings_json(const std::vector<Binding>& bs) {
    auto a = nlohmann::ordered_json::array();
    for (const auto& b : bs) a.push_back({{"var", b.var}, {"sym", b.sym}});
    return a;
}

nlohmann::ordered_json json_of(const ProbExpr& e) {
    nlohmann::ordered_json j;
    switch (e->kind) {
        case ExprKind::Const:
            j["type"] = "const";
            j["value"] = e->value;
            break;
        case ExprKind::Prob:
            j["type"] = "prob";
            j["outcome"] = bindings_json(e->outcome);
            j["given"] = bindings_json(e->given);
            j["do"] = bindings_json(e->intervened);
            break;
        case ExprKind::Sum:
            j["type"] = "sum";
            j["bind"] = bindings_json(e->bound);
            j["body"] = json_of(e->children[0]);
            break;
        case ExprKind::Product: {
            j["type"] = "product";
            auto a = nlohmann::ordered_json::array();
            for (const auto& c : e->children) a.push_back(json_of(c));
            j["factors"] = a;
            break;
        }
        case ExprKind::Fraction:
            j["type"] = "fraction";
            j["num"] = json_of(e->children[0]);
            j["den"] = json_of(e->children[1]);
            break;
    }
    return j;
}

}  // namespace

std::string render(const ProbExpr& e) {
    std::ostringstream out;
    render_to(e, out);
    return out.str();
}

std::string to_json(const ProbExpr& e) { return json_of(e).dump(); }

// ---------------------------------------------------------------------------
// symbols

namespace {

void for_each_term(const ExprNode& e, const std::function<void(const Binding&)>& f) {
    for (const auto* list : {&e.outcome, &e.given, &e.intervened})
        for (const auto& b : *list) f(b);
}

void collect_free(const ProbExpr& e, std::set<std::string>& bound, std::vector<Binding>& out) {
    if (e->kind == ExprKind::Prob) {
        for_each_term(*e, [&](const Binding& b) {
            if (bound.count(b.sym)) return;
            for (const auto& o : out)
                if (o.sym == b.sym) return;
            out.push_back(b);
        });
        return;
    }
    if (e->kind == ExprKind::Sum) {
        std::vector<std::string> added;
        for (const auto& b : e->bound)
            if (bound.insert(b.sym).second) added.push_back(b.sym);
        collect_free(e->children[0], bound, out);
        for (const auto& s : added) bound.erase(s);
        return;
    }
    for (const auto& c : e->children) collect_free(c, bound, out);
}

void all_symbols(const ProbExpr& e, std::set<std::string>& out) {
    for_each_term(*e, [&](const Binding& b) { out.insert(b.sym); });
    for (const auto& b : e->bound) out.insert(b.sym);
    for (const auto& c : e->children) all_symbols(c, out);
}

ProbExpr substitute(const ProbExpr& e, const std::string& from, const std::string& to) {
    auto n = std::make_shared<ExprNode>(*e);
    if (e->kind == ExprKind::Sum) {
        for (const auto& b : e->bound)
            if (b.sym == from) return e;  // shadowed
    }
    for (auto* list : {&n->outcome, &n->given, &n->intervened})
        for (auto& b : *list)
            if (b.sym == from) b.sym = to;
    for (auto& c : n->children) c = substitute(c, from, to);
    return n;
}

ProbExpr rename_in(const ProbExpr& e, std::set<std::string>& scope) {
    if (e->kind == ExprKind::Prob || e->kind == ExprKind::Const) return e;
    auto n = std::make_shared<ExprNode>(*e);
    if (e->kind == ExprKind::Sum) {
        std::set<std::string> used;
        all_symbols(e->children[0], used);
        ProbExpr body = e->children[0];
        std::vector<std::string> added;
        for (auto& b : n->bound) {
            if (scope.count(b.sym)) {
                std::string fresh = b.sym + "'";
                while (scope.count(fresh) || used.count(fresh)) fresh += "'";
                body = substitute(body, b.sym, fresh);
                b.sym = fresh;
            }
            if (scope.insert(b.sym).second) added.push_back(b.sym);
        }
        n->children[0] = rename_in(body, scope);
        for (const auto& s : added) scope.erase(s);
        return n;
    }
    for (auto& c : n->children) c = rename_in(c, scope);
    return n;
}

}  // namespace

std::vector<Binding> free_symbols(const ProbExpr& e) {
    std::set<std::string> bound;
    std::vector<Binding> out;
    collect_free(e, bound, out);
    return out;
}

ProbExpr rename_bound(const ProbExpr& e) {
    std::set<std::string> scope;
    for (const auto& b : free_symbols(e)) scope.insert(b.sym);
    return rename_in(e, scope);
}

// ---------------------------------------------------------------------------
// canonical form

namespace {

class Canonicalizer {
public:
    explicit Canonicalizer(const std::vector<std::string>& order) {
        for (std::size_t i = 0; i < order.size(); ++i) rank_[order[i]] = static_cast<int>(i);
    }

    ProbExpr run(const ProbExpr& e) {
        ProbExpr cur = e;
        for (int pass = 0; pass < 8; ++pass) {
            ProbExpr next = simplify(cur);
            if (render(next) == render(cur)) return next;
            cur = next;
        }
        return cur;
    }

private:
    std::map<std::string, int> rank_;

    int rank(const std::string& var) const {
        auto it = rank_.find(var);
        return it == rank_.end() ? static_cast<int>(rank_.size()) : it->second;
    }

    void sort_bindings(std::vector<Binding>& bs) const {
        std::sort(bs.begin(), bs.end(), [&](const Binding& a, const Binding& b) {
            const int ra = rank(a.var), rb = rank(b.var);
            if (ra != rb) return ra < rb;
            if (a.var != b.var) return a.var < b.var;
            return a.sym < b.sym;
        });
    }

    static std::vector<ProbExpr> factors_of(const ProbExpr& e) {
        if (e->kind == ExprKind::Product) return e->children;
        return {e};
    }

    static bool mentions(const ProbExpr& e, const std::string& sym) {
        bool hit = false;
        for_each_term(*e, [&](const Binding& b) { hit = hit || b.sym == sym; });
        for (const auto& b : e->bound) hit = hit || b.sym == sym;
        for (const auto& c : e->children) hit = hit || mentions(c, sym);
        return hit;
    }

    static bool same_set(std::vector<Binding> a, std::vector<Binding> b) {
        auto key = [](const Binding& x, const Binding& y) { return std::tie(x.var, x.sym) < std::tie(y.var, y.sym); };
        std::sort(a.begin(), a.end(), key);
        std::sort(b.begin(), b.end(), key);
        return a == b;
    }

    static bool contains(const std::vector<Binding>& set, const Binding& b) {
        return std::find(set.begin(), set.end(), b) != set.end();
    }

    ProbExpr make_product(std::vector<ProbExpr> factors) {
        std::vector<ProbExpr> flat;
        double c = 1.0;
        std::function<void(const ProbExpr&)> add = [&](const ProbExpr& f) {
            if (f->kind == ExprKind::Product) {
                for (const auto& g : f->children) add(g);
            } else if (f->kind == ExprKind::Const) {
                c *= f->value;
            } else {
                flat.push_back(f);
            }
        };
        for (const auto& f : factors) add(f);
        if (c == 0.0) return constant(0.0);
        merge_chain(flat);
        sort_factors(flat);
        if (c != 1.0) flat.insert(flat.begin(), constant(c));
        if (flat.empty()) return constant(1.0);
        return product(std::move(flat));
    }

    // P(A|B,C) * P(B|C) = P(A,B|C)
    void merge_chain(std::vector<ProbExpr>& fs) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < fs.size() && !changed; ++i) {
                const auto& a = fs[i];
                if (a->kind != ExprKind::Prob || !a->intervened.empty()) continue;
                for (std::size_t j = 0; j < fs.size() && !changed; ++j) {
                    const auto& b = fs[j];
                    if (i == j || b->kind != ExprKind::Prob || !b->intervened.empty()) continue;
                    std::vector<Binding> bc = b->outcome;
                    bc.insert(bc.end(), b->given.begin(), b->given.end());
                    if (!same_set(a->given, bc)) continue;
                    std::vector<Binding> out = a->outcome;
                    out.insert(out.end(), b->outcome.begin(), b->outcome.end());
                    sort_bindings(out);
                    std::vector<Binding> given = b->given;
                    sort_bindings(given);
                    fs[i] = prob(std::move(out), std::move(given));
                    fs.erase(fs.begin() + static_cast<long>(j));
                    changed = true;
                }
            }
        }
    }

    void sort_factors(std::vector<ProbExpr>& fs) const {
        auto cls = [](const ProbExpr& f) {
            switch (f->kind) {
                case ExprKind::Const: return 0;
                case ExprKind::Prob: return 1;
                case ExprKind::Fraction: return 2;
                default: return 3;
            }
        };
        auto latest = [&](const ProbExpr& f) {
            int r = -1;
            for (const auto& b : f->outcome) r = std::max(r, rank(b.var));
            return r;
        };
        std::stable_sort(fs.begin(), fs.end(), [&](const ProbExpr& a, const ProbExpr& b) {
            if (cls(a) != cls(b)) return cls(a) < cls(b);
            if (a->kind == ExprKind::Prob && latest(a) != latest(b)) return latest(a) > latest(b);
            return render(a) < render(b);
        });
    }

    ProbExpr simplify(const ProbExpr& e) {
        switch (e->kind) {
            case ExprKind::Const: return e;
            case ExprKind::Prob: {
                if (e->outcome.empty()) return constant(1.0);
                auto n = std::make_shared<ExprNode>(*e);
                sort_bindings(n->outcome);
                sort_bindings(n->given);
                sort_bindings(n->intervened);
                return n;
            }
            case ExprKind::Product: {
                std::vector<ProbExpr> fs;
                for (const auto& c : e->children) fs.push_back(simplify(c));
                return make_product(std::move(fs));
            }
            case ExprKind::Sum: return simplify_sum(e);
            case ExprKind::Fraction: return simplify_fraction(e);
        }
        return e;
    }

    ProbExpr simplify_sum(const ProbExpr& e) {
        std::vector<Binding> bound = e->bound;
        ProbExpr body = simplify(e->children[0]);
        while (body->kind == ExprKind::Sum) {
            bound.insert(bound.end(), body->bound.begin(), body->bound.end());
            body = body->children[0];
        }

        // Sum out a symbol that occurs only in one factor's outcome.
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t k = 0; k < bound.size() && !changed; ++k) {
                const Binding b = bound[k];
                auto fs = factors_of(body);
                int hits = 0;
                std::size_t at = 0;
                for (std::size_t i = 0; i < fs.size(); ++i)
                    if (mentions(fs[i], b.sym)) {
                        ++hits;
                        at = i;
                    }
                if (hits != 1) continue;
                const auto& f = fs[at];
                if (f->kind != ExprKind::Prob || !contains(f->outcome, b)) continue;
                bool elsewhere = false;
                for (const auto* list : {&f->given, &f->intervened})
                    for (const auto& t : *list) elsewhere = elsewhere || t.sym == b.sym;
                if (elsewhere) continue;
                std::vector<Binding> out;
                for (const auto& t : f->outcome)
                    if (!(t == b)) out.push_back(t);
                fs[at] = out.empty() ? constant(1.0) : prob(out, f->given, f->intervened);
                body = simplify(make_product(std::move(fs)));
                bound.erase(bound.begin() + static_cast<long>(k));
                changed = true;
            }
        }
        if (bound.empty()) return body;

        // Factors free of the summation symbols move outside.
        std::vector<ProbExpr> outside, inside;
        for (const auto& f : factors_of(body)) {
            bool dep = false;
            for (const auto& b : bound) dep = dep || mentions(f, b.sym);
            (dep ? inside : outside).push_back(f);
        }
        sort_bindings(bound);
        if (inside.empty()) return sum(bound, body);
        ProbExpr inner = sum(bound, make_product(std::move(inside)));
        if (outside.empty()) return inner;
        outside.push_back(inner);
        return make_product(std::move(outside));
    }

    ProbExpr simplify_fraction(const ProbExpr& e) {
        ProbExpr num = simplify(e->children[0]);
        ProbExpr den = simplify(e->children[1]);
        auto nf = factors_of(num), df = factors_of(den);
        for (auto it = df.begin(); it != df.end();) {
            const std::string key = render(*it);
            auto hit = std::find_if(nf.begin(), nf.end(), [&](const ProbExpr& f) { return render(f) == key; });
            if (hit != nf.end()) {
                nf.erase(hit);
                it = df.erase(it);
            } else {
                ++it;
            }
        }
        num = make_product(nf);
        den = make_product(df);
        if (den->kind == ExprKind::Const && den->value == 1.0) return num;
        // P(A,B|C) / P(B|C) = P(A|B,C)
        if (num->kind == ExprKind::Prob && den->kind == ExprKind::Prob && num->intervened.empty() &&
            den->intervened.empty() && same_set(num->given, den->given)) {
            bool subset = std::all_of(den->outcome.begin(), den->outcome.end(),
                                      [&](const Binding& b) { return contains(num->outcome, b); });
            if (subset) {
                std::vector<Binding> out, given = num->given;
                for (const auto& b : num->outcome)
                    if (!contains(den->outcome, b)) out.push_back(b);
                given.insert(given.end(), den->outcome.begin(), den->outcome.end());
                sort_bindings(out);
                sort_bindings(given);
                return out.empty() ? constant(1.0) : prob(out, given);
            }
        }
        return fraction(num, den);
    }
};

}  // namespace

ProbExpr canonicalize(const ProbExpr& e, const std::vector<std::string>& order) {
    return Canonicalizer(order).run(rename_bound(e));
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

class Evaluator {
public:
    explicit Evaluator(const ProbabilityTable& joint) : joint_(joint) {}

    int var(const std::string& id) const {
        const int v = joint_.var_index(id);
        if (v < 0) throw UnboundVariable("variable '" + id + "' is not in the joint distribution");
        return v;
    }

    double eval(const ProbExpr& e) {
        switch (e->kind) {
            case ExprKind::Const: return e->value;
            case ExprKind::Prob: return eval_prob(*e);
            case ExprKind::Product: {
                double p = 1.0;
                for (const auto& c : e->children) p *= eval(c);
                return p;
            }
            case ExprKind::Fraction: {
                const double num = eval(e->children[0]);
                const double den = eval(e->children[1]);
                if (den == 0.0) throw ZeroConditioningEvent("denominator is zero at " + assignment());
                return num / den;
            }
            case ExprKind::Sum: return eval_sum(*e, 0);
        }
        return 0.0;
    }

    std::map<std::string, int> env;  // symbol -> value index
    std::map<std::string, std::string> sym_var;

    std::string assignment() const {
        std::string out;
        for (const auto& [sym, value] : env) {
            auto it = sym_var.find(sym);
            const std::string var = it == sym_var.end() ? sym : it->second;
            const int vi = joint_.var_index(var);
            out += (out.empty() ? "" : ",") + var + "=" +
                   (vi >= 0 ? joint_.labels[static_cast<std::size_t>(vi)][static_cast<std::size_t>(value)]
                            : std::to_string(value));
        }
        return "{" + out + "}";
    }

private:
    const ProbabilityTable& joint_;
    std::map<std::vector<int>, ProbabilityTable> marginals_;

    int value_of(const Binding& b) const {
        auto it = env.find(b.sym);
        if (it == env.end()) throw UnboundVariable("symbol '" + b.sym + "' is not bound");
        return it->second;
    }

    // Probability of the joint event; 0 when the event fixes one variable twice to different values.
    double event(const std::vector<Binding>& terms) {
        std::map<int, int> fixed;
        for (const auto& b : terms) {
            const int v = var(b.var);
            const int value = value_of(b);
            auto [it, fresh] = fixed.emplace(v, value);
            if (!fresh && it->second != value) return 0.0;
        }
        if (fixed.empty()) return 1.0;
        std::vector<int> key;
        std::vector<int> state;
        for (const auto& [v, value] : fixed) {
            key.push_back(v);
            state.push_back(value);
        }
        auto it = marginals_.find(key);
        if (it == marginals_.end()) {
            std::vector<std::string> names;
            for (int v : key) names.push_back(joint_.vars[static_cast<std::size_t>(v)]);
            it = marginals_.emplace(key, joint_.marginal(names)).first;
        }
        return it->second.at(state);
    }

    double eval_prob(const ExprNode& e) {
        if (!e.intervened.empty()) throw InvalidQuery("expression still contains an intervention");
        std::vector<Binding> all = e.outcome;
        all.insert(all.end(), e.given.begin(), e.given.end());
        const double den = event(e.given);
        if (den == 0.0) throw ZeroConditioningEvent("conditioning event has probability zero at " + assignment());
        return event(all) / den;
    }

    double eval_sum(const ExprNode& e, std::size_t k) {
        if (k == e.bound.size()) return eval(e.children[0]);
        const Binding& b = e.bound[k];
        const int v = var(b.var);
        auto saved = env.find(b.sym) == env.end() ? std::optional<int>() : std::optional<int>(env[b.sym]);
        auto saved_var = sym_var.count(b.sym) ? std::optional<std::string>(sym_var[b.sym]) : std::nullopt;
        sym_var[b.sym] = b.var;
        double total = 0.0;
        for (int value = 0; value < joint_.size_of(static_cast<std::size_t>(v)); ++value) {
            env[b.sym] = value;
            total += eval_sum(e, k + 1);
        }
        if (saved) env[b.sym] = *saved; else env.erase(b.sym);
        if (saved_var) sym_var[b.sym] = *saved_var; else sym_var.erase(b.sym);
        return total;
    }
};

}  // namespace

ProbabilityTable evaluate_expr(const ProbExpr& e, const ProbabilityTable& joint) {
    Evaluator ev(joint);
    std::vector<Binding> free = free_symbols(e);
    std::vector<std::pair<int, Binding>> ordered;
    for (const auto& b : free) {
        const int v = ev.var(b.var);
        for (const auto& [w, other] : ordered)
            if (w == v) throw InvalidQuery("variable '" + b.var + "' has two free symbols");
        ordered.emplace_back(v, b);
    }
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<std::string> vars;
    std::vector<std::vector<std::string>> labels;
    for (const auto& [v, b] : ordered) {
        vars.push_back(b.var);
        labels.push_back(joint.labels[static_cast<std::size_t>(v)]);
        ev.sym_var[b.sym] = b.var;
    }
    ProbabilityTable out(vars, labels);
    std::vector<int> state;
    for (std::size_t cell = 0; cell < out.p.size(); ++cell) {
        out.decode(cell, state);
        for (std::size_t k = 0; k < ordered.size(); ++k) ev.env[ordered[k].second.sym] = state[k];
        out.p[cell] = ev.eval(e);
    }
    return out;
}

}  // namespace cdm
