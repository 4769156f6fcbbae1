#include "cdm/estimation.hpp"

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <regex>
#include <set>

#include "cdm/errors.hpp"
#include "cdm/identification.hpp"
#include "json.hpp"

namespace cdm {

namespace {

constexpr double kHuge = 1e300;

struct Problem {
    const DiscreteModel& model;
    const CompiledLikelihood& lik;
    std::vector<double> base;        // full vector with closed-form values
    std::vector<int> free;           // indices of free parameters
    std::vector<const ModelVariable*> barrier_vars;  // variables with a free coefficient
    double n = 1.0;

    std::vector<double> full(const double* x) const {
        std::vector<double> v = base;
        for (std::size_t k = 0; k < free.size(); ++k) v[static_cast<std::size_t>(free[k])] = x[k];
        return v;
    }

    // Sum of log p + log(1-p) over implied probabilities of free variables;
    // nullopt when one leaves (0, 1).
    std::optional<double> barrier(const std::vector<double>& params) const {
        double b = 0.0;
        for (const auto* v : barrier_vars) {
            const unsigned full_mask = (1u << v->table_parents.size()) - 1;
            for (unsigned present = 0; present <= full_mask; ++present) {
                double p = 0.0;
                for (std::size_t mask = 0; mask < v->coefficient_index.size(); ++mask)
                    if ((mask & present) == mask) p += params[static_cast<std::size_t>(v->coefficient_index[mask])];
                if (!(p > 0.0 && p < 1.0)) return std::nullopt;
                b += std::log(p) + std::log1p(-p);
            }
        }
        return b;
    }

    double loglik(const std::vector<double>& params) const {
        if (!barrier(params)) return -std::numeric_limits<double>::infinity();
        if (!model.valid(params)) return -std::numeric_limits<double>::infinity();
        return lik(params);
    }
};

struct Stage {
    const Problem* pb;
    double mu;
};

double stage_objective(const gsl_vector* x, void* data) {
    const auto* st = static_cast<const Stage*>(data);
    const auto params = st->pb->full(x->data);
    const auto b = st->pb->barrier(params);
    if (!b || !st->pb->model.valid(params)) return kHuge;
    const double ll = st->pb->lik(params);
    if (!std::isfinite(ll)) return kHuge;
    return -ll / st->pb->n - st->mu * *b;
}

struct StartResult {
    std::vector<double> x;
    double loglik = -std::numeric_limits<double>::infinity();
    int iterations = 0;
};

int simplex(const Problem& pb, double mu, std::vector<double>& x, const FitOptions& opts) {
    const std::size_t k = x.size();
    Stage st{&pb, mu};
    gsl_multimin_function fn{&stage_objective, k, &st};
    gsl_vector* v = gsl_vector_alloc(k);
    gsl_vector* step = gsl_vector_alloc(k);
    for (std::size_t i = 0; i < k; ++i) {
        gsl_vector_set(v, i, x[i]);
        gsl_vector_set(step, i, 0.02);
    }
    gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, k);
    gsl_multimin_fminimizer_set(m, &fn, v, step);
    int it = 0;
    while (it < opts.max_iterations) {
        ++it;
        if (gsl_multimin_fminimizer_iterate(m)) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), opts.tolerance) == GSL_SUCCESS) break;
    }
    for (std::size_t i = 0; i < k; ++i) x[i] = gsl_vector_get(m->x, i);
    gsl_multimin_fminimizer_free(m);
    gsl_vector_free(step);
    gsl_vector_free(v);
    return it;
}

Eigen::VectorXd gradient(const Problem& pb, const std::vector<double>& x, double h) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto a = x, b = x;
        a[i] += h;
        b[i] -= h;
        g[static_cast<Eigen::Index>(i)] = (pb.loglik(pb.full(a.data())) - pb.loglik(pb.full(b.data()))) / (2 * h);
    }
    return g;
}

Eigen::MatrixXd hessian(const Problem& pb, const std::vector<double>& x, double h) {
    const auto k = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd H(k, k);
    auto f = [&](std::vector<double> y) { return pb.loglik(pb.full(y.data())); };
    const double f0 = f(x);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i; j < k; ++j) {
            double v;
            if (i == j) {
                auto a = x, b = x;
                a[static_cast<std::size_t>(i)] += h;
                b[static_cast<std::size_t>(i)] -= h;
                v = (f(a) - 2 * f0 + f(b)) / (h * h);
            } else {
                auto pp = x, pm = x, mp = x, mm = x;
                pp[static_cast<std::size_t>(i)] += h, pp[static_cast<std::size_t>(j)] += h;
                pm[static_cast<std::size_t>(i)] += h, pm[static_cast<std::size_t>(j)] -= h;
                mp[static_cast<std::size_t>(i)] -= h, mp[static_cast<std::size_t>(j)] += h;
                mm[static_cast<std::size_t>(i)] -= h, mm[static_cast<std::size_t>(j)] -= h;
                v = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h);
            }
            H(i, j) = H(j, i) = v;
        }
    }
    return H;
}

int newton(const Problem& pb, std::vector<double>& x) {
    double cur = pb.loglik(pb.full(x.data()));
    int it = 0;
    for (; it < 50; ++it) {
        const Eigen::VectorXd g = gradient(pb, x, 1e-6);
        if (!g.allFinite() || g.cwiseAbs().maxCoeff() < 1e-9) break;
        const Eigen::MatrixXd H = hessian(pb, x, 1e-4);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(-H);
        Eigen::VectorXd d;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive())
            d = ldlt.solve(g);
        else
            d = g / std::max(1.0, g.norm());
        if (!d.allFinite()) break;
        bool moved = false;
        for (double t = 1.0; t > 1e-8; t *= 0.5) {
            auto y = x;
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += t * d[static_cast<Eigen::Index>(i)];
            const double ll = pb.loglik(pb.full(y.data()));
            if (ll > cur) {
                moved = ll - cur > 1e-12 * std::abs(cur);
                x = y;
                cur = ll;
                break;
            }
        }
        if (!moved) break;
    }
    return it;
}

// Interior start: random p(V=1|pa) tables mapped to coefficients by
// inclusion-exclusion. Start 0 uses p = 1/2 everywhere.
std::vector<double> start_point(const Problem& pb, std::uint64_t seed, int start) {
    std::vector<double> params = pb.base;
    std::uint64_t draw = 0;
    for (const auto* v : pb.barrier_vars) {
        const std::size_t m = v->coefficient_index.size();
        std::vector<double> p(m);
        for (auto& q : p)
            q = start == 0 ? 0.5 : 0.1 + 0.8 * counter_uniform(seed, static_cast<std::uint64_t>(start), draw++);
        for (std::size_t s = 0; s < m; ++s) {
            double c = 0.0;
            for (std::size_t t = s;; t = (t - 1) & s) {
                const int sign = (__builtin_popcountll(s) - __builtin_popcountll(t)) % 2 ? -1 : 1;
                c += sign * p[t];
                if (t == 0) break;
            }
            params[static_cast<std::size_t>(v->coefficient_index[s])] = c;
        }
    }
    std::vector<double> x;
    for (int i : pb.free) x.push_back(params[static_cast<std::size_t>(i)]);
    return x;
}

StartResult run_start(const Problem& pb, const FitOptions& opts, int start) {
    StartResult r;
    r.x = start_point(pb, opts.seed, start);
    if (!r.x.empty()) {
        for (double mu : {1e-3, 1e-5, 1e-7, 0.0}) r.iterations += simplex(pb, mu, r.x, opts);
        r.iterations += newton(pb, r.x);
    }
    r.loglik = pb.loglik(pb.full(r.x.data()));
    return r;
}

// Selection variables with no table parents whose value and gate are the
// same in every stratum a row matches: their MLE is a proportion.
std::map<int, double> closed_form(const DiscreteModel& model, const CompiledLikelihood& lik, const FrequencyTable& data) {
    std::map<int, double> out;
    const auto matches = lik.matches();
    const auto& strata = lik.factorization().strata;
    for (const auto& v : model.variables()) {
        if (v.kind != NodeKind::Selection || !v.table_parents.empty()) continue;
        if (!std::holds_alternative<LinearBinaryCpt>(v.cpt)) continue;
        double open = 0.0, ones = 0.0;
        bool ok = true;
        for (std::size_t r = 0; r < matches.size() && ok; ++r) {
            if (data.rows[r].count <= 0.0 || matches[r].empty()) continue;
            int gate = -1, value = -1;
            for (int s : matches[r]) {
                const auto& st = strata[static_cast<std::size_t>(s)];
                int g = 1;
                for (int gp : v.gate_parents)
                    if (st.selection[static_cast<std::size_t>(gp)] != 1) g = 0;
                const int val = st.selection[static_cast<std::size_t>(v.node)];
                if ((gate >= 0 && gate != g) || (value >= 0 && value != val)) ok = false;
                gate = g;
                value = val;
            }
            if (gate == 1) {
                open += data.rows[r].count;
                if (value == 1) ones += data.rows[r].count;
            }
        }
        if (ok && open > 0.0) out[v.coefficient_index[0]] = ones / open;
    }
    return out;
}

}  // namespace

FitResult fit_mle(const DiscreteModel& model, const Factorization& f, const FrequencyTable& data,
                  const FitOptions& opts) {
    if (model.has_shared_selection() || f.shared_selection)
        throw SharedSelectionUnsupported("unsupported shared selection: likelihood of a selection node with several data children");
    const Factorization mf = f.marginalized ? f : marginalize(f, model.graph());
    const CompiledLikelihood lik(model, mf, data);

    Problem pb{model, lik, std::vector<double>(model.param_names().size(), 0.0), {}, {}, std::max(1.0, data.total())};
    const auto fixed = closed_form(model, lik, data);
    for (const auto& [i, val] : fixed) pb.base[static_cast<std::size_t>(i)] = val;
    for (int i = 0; i < static_cast<int>(pb.base.size()); ++i)
        if (!fixed.count(i)) pb.free.push_back(i);
    for (const auto& v : model.variables()) {
        if (v.coefficient_index.empty()) continue;
        const bool any_free = std::any_of(v.coefficient_index.begin(), v.coefficient_index.end(),
                                          [&](int i) { return !fixed.count(i); });
        if (any_free) pb.barrier_vars.push_back(&v);
    }

    const int starts = std::max(1, opts.multistart);
    const int wave = opts.threads == 0 ? starts : static_cast<int>(opts.threads);
    std::vector<StartResult> results;
    for (int first = 0; first < starts; first += wave) {
        std::vector<std::future<StartResult>> jobs;
        for (int s = first; s < std::min(starts, first + wave); ++s)
            jobs.push_back(std::async(std::launch::async, run_start, std::cref(pb), std::cref(opts), s));
        for (auto& j : jobs) results.push_back(j.get());
    }
    std::size_t best = 0;
    for (std::size_t s = 1; s < results.size(); ++s)
        if (results[s].loglik > results[best].loglik) best = s;
    const StartResult& b = results[best];
    if (!std::isfinite(b.loglik))
        throw NoInteriorPoint("no start reached a parameter value with positive probability for every row");

    FitResult r;
    const auto params = pb.full(b.x.data());
    r.params = model.param_map(params);
    r.loglik = lik.checked(params);
    r.iterations = b.iterations;
    r.max_gradient = b.x.empty() ? 0.0 : gradient(pb, b.x, 1e-6).cwiseAbs().maxCoeff();
    r.converged = std::isfinite(r.max_gradient) && r.max_gradient <= 1e-4;
    for (const auto& [i, val] : fixed) r.fixed.push_back(model.param_names()[static_cast<std::size_t>(i)]);

    for (const auto& v : model.variables()) {
        if (v.kind != NodeKind::Causal || v.labels.size() != 2) continue;
        const auto m = design_joint(model, r.params, {v.id});
        r.derived["theta_" + v.id + "_prime"] = m.p[1];
    }
    return r;
}

DoAssignment parse_do(const std::string& text) {
    static const std::regex outer(R"(^\s*do\s*\((.*)\)\s*$)");
    static const std::regex item(R"(^\s*([^=,\s]+)\s*=\s*([^=,\s]+)\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, outer)) throw ParseError("expected do(V=value,...), got '" + text + "'");
    DoAssignment out;
    const std::string body = m[1];
    std::size_t pos = 0;
    while (pos <= body.size()) {
        const std::size_t comma = body.find(',', pos);
        const std::string part = body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        std::smatch im;
        if (!std::regex_match(part, im, item)) throw ParseError("bad assignment '" + part + "' in '" + text + "'");
        out[im[1]] = im[2];
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::map<std::string, double> causal_effects(const DesignGraph& g, const DiscreteModel& fitted, const ParamMap& params,
                                             const std::vector<DoAssignment>& interventions,
                                             std::vector<std::string> outcome) {
    const LatentGraph lg = latent_project(g);
    const auto joint = design_joint(fitted, params, lg.nodes);
    std::map<std::string, double> out;
    for (const auto& assign : interventions) {
        std::vector<std::string> treat;
        for (const auto& [v, val] : assign) {
            lg.index(v);
            treat.push_back(v);
        }
        std::vector<std::string> ys = outcome;
        if (ys.empty())
            for (int i = 0; i < lg.size(); ++i)
                if (lg.directed.children[static_cast<std::size_t>(i)].empty() && !assign.count(lg.nodes[static_cast<std::size_t>(i)]))
                    ys.push_back(lg.nodes[static_cast<std::size_t>(i)]);
        const IdentifyResult id = identify(g, treat, ys);
        if (!id.identifiable) throw NotIdentifiable("effect of do(" + treat.front() + ") is not identifiable");
        const ProbabilityTable t = evaluate_expr(id.expr, joint);

        std::string shown_do;
        for (const auto& [v, val] : assign) shown_do += (shown_do.empty() ? "" : ",") + v + "=" + val;
        // cells with the treatment at its assigned value
        std::vector<int> state(t.vars.size(), 0);
        for (std::size_t cell = 0; cell < t.p.size(); ++cell) {
            t.decode(cell, state);
            bool keep = true;
            std::string shown_y;
            for (std::size_t k = 0; k < t.vars.size(); ++k) {
                const auto& label = t.labels[k][static_cast<std::size_t>(state[k])];
                if (auto it = assign.find(t.vars[k]); it != assign.end()) {
                    if (it->second != label) keep = false;
                } else {
                    shown_y += (shown_y.empty() ? "" : ",") + t.vars[k] + "=" + label;
                }
            }
            if (!keep) continue;
            // binary outcomes: report the upper value only
            bool skip = false;
            for (std::size_t k = 0; k < t.vars.size(); ++k)
                if (!assign.count(t.vars[k]) && t.labels[k].size() == 2 && state[k] == 0) skip = true;
            if (skip) continue;
            out["P(" + shown_y + "|do(" + shown_do + "))"] = t.p[cell];
        }
    }
    return out;
}

double causal_effect_plugin(const ParamMap& params, const DoAssignment& which) {
    auto get = [&](const char* name) {
        auto it = params.find(name);
        if (it == params.end())
            throw WrongModelFamily(std::string("closed form needs parameter ") + name + " (front-door linear model)");
        return it->second;
    };
    const double tx = get("theta_X"), tz = get("theta_Z"), tzx = get("theta_ZX"), ty = get("theta_Y"),
                 tyx = get("theta_YX"), tyz = get("theta_YZ"), tyzx = get("theta_YZX");
    if (which.size() != 1 || !which.count("X")) throw WrongModelFamily("closed form covers do(X=x) only");
    const std::string& xs = which.at("X");
    if (xs != "0" && xs != "1") throw WrongModelFamily("closed form needs a binary X, got '" + xs + "'");
    const double x = xs == "1" ? 1.0 : 0.0;
    const double pz1 = tz + x * tzx;
    auto inner = [&](double z) { return tx * (ty + tyx + z * tyz + z * tyzx) + (1 - tx) * (ty + z * tyz); };
    return pz1 * inner(1.0) + (1 - pz1) * inner(0.0);
}

std::string fit_json(const FitResult& r) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["params"] = r.params;
    j["loglik"] = r.loglik;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["max_gradient"] = r.max_gradient;
    j["fixed"] = r.fixed;
    j["derived"] = r.derived;
    j["effects"] = r.effects;
    return j.dump(2);
}

}  // namespace cdm
