#include "cdm/simulate.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "cdm/dsl.hpp"
#include "cdm/errors.hpp"

namespace cdm {

namespace {

enum class StepKind { Population, Data, Fixed, Free };

struct Step {
    StepKind kind;
    int node;
    const ModelVariable* var = nullptr;
    int fixed = 0;
    int causal = -1;     // data nodes
    int selection = -1;  // data nodes
    int na = 0;          // data nodes
};

std::vector<Step> plan(const DiscreteModel& model, const DoAssignment& intervention) {
    const DesignGraph& g = model.graph();
    for (const auto& [id, value] : intervention) {
        const ModelVariable& v = model.variable(id);
        if (std::find(v.labels.begin(), v.labels.end(), value) == v.labels.end())
            throw InvalidQuery("value '" + value + "' is not in the domain of '" + id + "'");
    }
    std::vector<Step> steps;
    const auto pop = g.population_index();
    for (int i : topological_order(g.dag())) {
        Step s{StepKind::Free, i};
        if (pop && *pop == i) {
            s.kind = StepKind::Population;
        } else if (g.kind(i) == NodeKind::Data) {
            s.kind = StepKind::Data;
            auto c = g.measured_causal(i);
            auto m = g.measuring_selection(i);
            if (!c || !m) throw ModelError("data node '" + g.id(i) + "' lacks a causal or selection parent");
            s.causal = *c;
            s.selection = *m;
            s.na = model.value_count(i) - 1;
        } else {
            s.var = model.variable_of_node(i);
            if (!s.var) {
                // A selection node without a table can only be a second root; treat as selected.
                s.kind = StepKind::Population;
            } else if (auto it = intervention.find(g.id(i)); it != intervention.end()) {
                s.kind = StepKind::Fixed;
                const auto& labels = s.var->labels;
                s.fixed = static_cast<int>(std::find(labels.begin(), labels.end(), it->second) - labels.begin());
            }
        }
        steps.push_back(s);
    }
    return steps;
}

void check_cap(const DiscreteModel& model, double cap) {
    const double states = model.state_count();
    if (states > cap)
        throw StateSpaceTooLarge("joint has " + std::to_string(states) + " states, cap is " + std::to_string(cap));
}

std::vector<std::string> table_labels(const DiscreteModel& model, int node) {
    std::vector<std::string> labels = model.labels(node);
    if (model.graph().kind(node) == NodeKind::Data) labels.push_back(kMissing);
    return labels;
}

}  // namespace

void enumerate_states(const DiscreteModel& model, const std::vector<double>& params, const DoAssignment& intervention,
                      const std::function<void(const std::vector<int>&, double)>& visit, double state_cap) {
    check_cap(model, state_cap);
    const std::vector<Step> steps = plan(model, intervention);
    std::vector<int> state(static_cast<std::size_t>(model.graph().size()), 0);

    std::function<void(std::size_t, double)> rec = [&](std::size_t k, double p) {
        if (k == steps.size()) {
            visit(state, p);
            return;
        }
        const Step& s = steps[k];
        auto& slot = state[static_cast<std::size_t>(s.node)];
        switch (s.kind) {
            case StepKind::Population: slot = 1; rec(k + 1, p); return;
            case StepKind::Data:
                slot = state[static_cast<std::size_t>(s.selection)] == 1 ? state[static_cast<std::size_t>(s.causal)] : s.na;
                rec(k + 1, p);
                return;
            case StepKind::Fixed: slot = s.fixed; rec(k + 1, p); return;
            case StepKind::Free:
                for (int v = 0; v < static_cast<int>(s.var->labels.size()); ++v) {
                    const double q = model.prob(*s.var, v, state, params);
                    if (q == 0.0) continue;
                    slot = v;
                    rec(k + 1, p * q);
                }
                return;
        }
    };
    rec(0, 1.0);
}

ProbabilityTable design_joint(const DiscreteModel& model, const ParamMap& params, const std::vector<std::string>& vars,
                              double state_cap) {
    const DesignGraph& g = model.graph();
    std::vector<int> nodes;
    for (const auto& id : vars) nodes.push_back(g.index(id));
    std::vector<std::vector<std::string>> labels;
    for (int i : nodes) labels.push_back(table_labels(model, i));
    ProbabilityTable out(vars, std::move(labels));
    std::vector<int> sub(nodes.size());
    enumerate_states(
        model, model.param_vector(params), {},
        [&](const std::vector<int>& state, double p) {
            for (std::size_t k = 0; k < nodes.size(); ++k) sub[k] = state[static_cast<std::size_t>(nodes[k])];
            out.p[out.index(sub)] += p;
        },
        state_cap);
    return out;
}

ProbabilityTable interventional_distribution(const DiscreteModel& model, const ParamMap& params,
                                             const DoAssignment& intervention, std::vector<std::string> vars,
                                             double state_cap) {
    const DesignGraph& g = model.graph();
    if (vars.empty())
        for (int i : g.nodes_of_kind(NodeKind::Causal)) vars.push_back(g.id(i));
    std::vector<int> nodes;
    std::vector<std::vector<std::string>> labels;
    for (const auto& id : vars) {
        nodes.push_back(g.index(id));
        labels.push_back(table_labels(model, nodes.back()));
    }
    ProbabilityTable out(vars, std::move(labels));
    std::vector<int> sub(nodes.size());
    enumerate_states(
        model, model.param_vector(params), intervention,
        [&](const std::vector<int>& state, double p) {
            for (std::size_t k = 0; k < nodes.size(); ++k) sub[k] = state[static_cast<std::size_t>(nodes[k])];
            out.p[out.index(sub)] += p;
        },
        state_cap);
    return out;
}

namespace {

// Row key: per column the value index, or -1 when missing.
std::vector<int> row_key(const DesignGraph& g, const std::vector<int>& columns, const std::vector<int>& state) {
    std::vector<int> key(columns.size());
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const int c = columns[k];
        key[k] = column_available(g, c, state) ? state[static_cast<std::size_t>(c)] : -1;
    }
    return key;
}

struct KeyOrder {
    // missing sorts last
    bool operator()(const std::vector<int>& a, const std::vector<int>& b) const {
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == b[i]) continue;
            if (a[i] < 0) return false;
            if (b[i] < 0) return true;
            return a[i] < b[i];
        }
        return false;
    }
};

template <typename Count>
FrequencyTable to_table(const DiscreteModel& model, const std::vector<int>& columns,
                        const std::map<std::vector<int>, Count, KeyOrder>& counts) {
    const DesignGraph& g = model.graph();
    FrequencyTable t;
    t.columns = g.ids(columns);
    for (const auto& [key, count] : counts) {
        FrequencyRow row;
        for (std::size_t k = 0; k < key.size(); ++k)
            row.values.push_back(key[k] < 0 ? kMissing : model.labels(columns[k])[static_cast<std::size_t>(key[k])]);
        row.count = static_cast<double>(count);
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

FrequencyTable expected_frequencies(const DiscreteModel& model, const ParamMap& params, double n, double state_cap) {
    const DesignGraph& g = model.graph();
    const std::vector<int> columns = observable_columns(g);
    std::map<std::vector<int>, double, KeyOrder> counts;
    enumerate_states(
        model, model.param_vector(params), {},
        [&](const std::vector<int>& state, double p) { counts[row_key(g, columns, state)] += n * p; }, state_cap);
    return to_table(model, columns, counts);
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t draw) {
    const std::uint64_t x = splitmix64(splitmix64(seed ^ splitmix64(stream)) + draw);
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

SimResult simulate_dataset(const SimSpec& spec) {
    if (!spec.model) throw ModelError("simulation needs a model");
    const DiscreteModel& model = *spec.model;
    if (model.has_shared_selection())
        throw SharedSelectionUnsupported("unsupported shared selection: individuals cannot be simulated independently");
    if (spec.n < 1) throw InvalidQuery("population size must be at least 1");
    const std::vector<double> params = model.param_vector(spec.params);
    if (!model.valid(params, 1e-12)) throw ModelError("parameters lie outside the validity region");

    const DesignGraph& g = model.graph();
    const std::vector<Step> steps = plan(model, {});
    const std::vector<int> columns = observable_columns(g);

    unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, spec.n));
    using Counts = std::map<std::vector<int>, std::uint64_t, KeyOrder>;
    std::vector<Counts> partial(threads);

    auto work = [&](unsigned t) {
        std::vector<int> state(static_cast<std::size_t>(g.size()), 0);
        const std::uint64_t begin = spec.n * t / threads, end = spec.n * (t + 1) / threads;
        for (std::uint64_t i = begin; i < end; ++i) {
            std::uint64_t draw = 0;
            for (const Step& s : steps) {
                auto& slot = state[static_cast<std::size_t>(s.node)];
                switch (s.kind) {
                    case StepKind::Population: slot = 1; break;
                    case StepKind::Fixed: slot = s.fixed; break;
                    case StepKind::Data:
                        slot = state[static_cast<std::size_t>(s.selection)] == 1 ? state[static_cast<std::size_t>(s.causal)]
                                                                                : s.na;
                        break;
                    case StepKind::Free: {
                        const double u = counter_uniform(spec.seed, i, draw++);
                        const int k = static_cast<int>(s.var->labels.size());
                        double acc = 0.0;
                        int v = 0;
                        for (; v < k - 1; ++v) {
                            acc += model.prob(*s.var, v, state, params);
                            if (u < acc) break;
                        }
                        slot = v;
                        break;
                    }
                }
            }
            ++partial[t][row_key(g, columns, state)];
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work, t);
    work(0);
    for (auto& th : pool) th.join();

    Counts total;
    for (const auto& part : partial)
        for (const auto& [key, c] : part) total[key] += c;

    SimResult result;
    result.table = to_table(model, columns, total);
    result.metadata.seed = spec.seed;
    result.metadata.n = spec.n;
    std::ostringstream desc;
    desc.precision(17);
    desc << serialize(g);
    for (const auto& [name, value] : spec.params) desc << name << '=' << value << '\n';
    result.metadata.spec_hash = fnv1a_hex(desc.str());
    return result;
}

std::string metadata_json(const SimMetadata& meta) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["generator"] = meta.generator;
    j["generator_version"] = meta.generator_version;
    j["seed"] = meta.seed;
    j["n"] = meta.n;
    j["spec_hash"] = meta.spec_hash;
    return j.dump(2);
}

}  // namespace cdm
