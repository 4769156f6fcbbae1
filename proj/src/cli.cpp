#include "cdm/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cdm/dsl.hpp"
#include "cdm/errors.hpp"
#include "cdm/estimation.hpp"
#include "cdm/frequency_table.hpp"
#include "cdm/identification.hpp"
#include "cdm/likelihood.hpp"
#include "cdm/model.hpp"
#include "cdm/render.hpp"
#include "cdm/separation.hpp"
#include "cdm/simulate.hpp"
#include "cdm/transforms.hpp"
#include "json.hpp"

namespace cdm {

using nlohmann::ordered_json;

int exit_code_for(const std::string& kind) {
    if (kind == "NotIdentifiable") return kExitNotIdentifiable;
    if (kind == "DataMismatch" || kind == "RowMatchesNoStratum" || kind == "NonfiniteLogLik" ||
        kind == "NoInteriorPoint")
        return kExitDataMismatch;
    if (kind == "SharedSelectionUnsupported" || kind == "UnsupportedDesign" || kind == "StateSpaceTooLarge" ||
        kind == "NonBinaryVariable" || kind == "WrongModelFamily")
        return kExitUnsupported;
    return kExitInvalid;
}

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("IOError", "cannot write '" + path + "'");
    f << text;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("IOError", "cannot open '" + path + "'");
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

// Path with the direction of each edge, e.g. "X -> Z <- U".
std::string show_path(const DesignGraph& g, const std::vector<std::string>& path) {
    std::string out;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i) out += g.has_edge(path[i - 1], path[i]) ? " -> " : " <- ";
        out += path[i];
    }
    return out;
}

std::vector<std::string> split_ids(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& r : raw) {
        std::stringstream ss(r);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(item);
    }
    return out;
}

ParamMap read_params(const std::string& path) {
    const auto j = ordered_json::parse(read_file(path));
    const auto& p = j.contains("params") ? j.at("params") : j;
    if (!p.is_object()) throw ParseError("parameter file must hold a JSON object of name -> value");
    ParamMap out;
    for (const auto& [k, v] : p.items()) out[k] = v.get<double>();
    return out;
}

struct Options {
    bool json = false;
    std::string graph;
    std::string out;
    // identify
    std::vector<std::string> treat, outcome;
    // ci
    std::vector<std::string> a, b, given;
    // classify
    std::string var;
    // collapse
    bool missingness = false;
    std::string selection_diagram;
    // factorize
    bool marginalize = false;
    // fit
    std::string data;
    std::vector<std::string> effects;
    std::uint64_t seed = 1;
    int multistart = 4;
    // simulate
    std::string params, metadata;
    std::uint64_t n = 0;
    bool expected = false;
    unsigned threads = 0;
};

int run_validate(const Options& o, std::ostream& out) {
    ValidationReport report;
    std::string name;
    try {
        name = build_graph(read_file(o.graph)).name();
    } catch (const ValidationError& e) {
        report = e.report();
    }
    if (o.json) {
        ordered_json j;
        j["version"] = 1;
        j["valid"] = report.ok();
        j["violations"] = ordered_json::array();
        for (const auto& v : report.violations)
            j["violations"].push_back({{"rule", v.rule}, {"ids", v.ids}, {"message", v.message}});
        out << j.dump(2) << "\n";
    } else if (report.ok()) {
        out << "valid: " << name << "\n";
    } else {
        out << report.to_string();
    }
    return report.ok() ? kExitOk : kExitInvalid;
}

int run_render(const Options& o, std::ostream& out) {
    const std::string dot = to_dot(load_graph(o.graph));
    if (o.out.empty())
        out << dot;
    else
        write_file(o.out, dot);
    return kExitOk;
}

int run_identify(const Options& o, std::ostream& out) {
    const DesignGraph g = load_graph(o.graph);
    const IdentifyResult r = identify(g, split_ids(o.treat), split_ids(o.outcome));
    if (o.json) {
        out << result_json(r) << "\n";
    } else if (r.identifiable) {
        out << render(r.expr) << "\n";
    } else {
        out << "not identifiable\n";
        out << "hedge F: {" << join(r.hedge.f, ",") << "} F': {" << join(r.hedge.f_prime, ",") << "}\n";
    }
    return r.identifiable ? kExitOk : kExitNotIdentifiable;
}

int run_ci(const Options& o, std::ostream& out) {
    const DesignGraph g = load_graph(o.graph);
    const bool sep = d_separated(g, CIQuery{split_ids(o.a), split_ids(o.b), split_ids(o.given)});
    if (o.json)
        out << ordered_json{{"version", 1}, {"separated", sep}}.dump(2) << "\n";
    else
        out << (sep ? "true" : "false") << "\n";
    return kExitOk;
}

int run_classify(const Options& o, std::ostream& out) {
    const DesignGraph g = load_graph(o.graph);
    const MissingnessReport r = classify_missingness(g, o.var);
    if (o.json) {
        ordered_json j;
        j["version"] = 1;
        j["var"] = o.var;
        j["class"] = std::string(to_string(r.cls));
        j["selection"] = r.selection;
        j["witness"] = r.witness;
        out << j.dump(2) << "\n";
    } else {
        out << to_string(r.cls) << ": " << show_path(g, r.witness) << "\n";
    }
    return kExitOk;
}

int run_collapse(const Options& o, std::ostream& out) {
    const DesignGraph g = load_graph(o.graph);
    if (o.missingness == !o.selection_diagram.empty())
        throw InvalidQuery("collapse needs exactly one of --missingness or --selection-diagram");
    DesignGraph c = g;
    if (o.missingness) {
        c = collapse_missingness(g);
    } else {
        std::string s = o.selection_diagram;
        if (s.rfind("S=", 0) == 0) s = s.substr(2);
        c = collapse_selection_diagram(g, split_ids({s}));
    }
    const std::string text = serialize(c);
    if (o.out.empty())
        out << text;
    else
        write_file(o.out, text);
    return kExitOk;
}

int run_factorize(const Options& o, std::ostream& out) {
    const DesignGraph g = load_graph(o.graph);
    Factorization f = factorize(g);
    if (o.marginalize) f = marginalize(f, g);
    out << (o.json ? render_json(f) + "\n" : render_text(f));
    return kExitOk;
}

int run_fit(const Options& o, std::ostream& out) {
    const DesignGraph g = load_graph(o.graph);
    for (const auto& n : g.nodes())
        if (n.shared_selection)
            throw SharedSelectionUnsupported("unsupported shared selection: node '" + n.id +
                                             "' links individuals, so the likelihood does not factor");
    const DiscreteModel model = saturated_binary_parametrization(g);
    const FrequencyTable data = load_frequency_csv(o.data);
    FitOptions opts;
    opts.seed = o.seed;
    opts.multistart = o.multistart;
    opts.threads = o.threads;
    FitResult r = fit_mle(model, factorize(model.graph()), data, opts);
    std::vector<DoAssignment> dos;
    for (const auto& e : o.effects) dos.push_back(parse_do(e));
    if (!dos.empty()) r.effects = causal_effects(g, model, r.params, dos, split_ids(o.outcome));
    out << fit_json(r) << "\n";
    return kExitOk;
}

int run_simulate(const Options& o, std::ostream& out) {
    const DesignGraph g = load_graph(o.graph);
    const DiscreteModel model = saturated_binary_parametrization(g);
    const ParamMap params = read_params(o.params);
    std::string csv, meta;
    if (o.expected) {
        csv = to_csv(expected_frequencies(model, params, static_cast<double>(o.n)));
    } else {
        const SimResult r = simulate_dataset(SimSpec{&model, params, o.n, o.seed, o.threads});
        csv = to_csv(r.table);
        meta = metadata_json(r.metadata);
    }
    if (o.out.empty())
        out << csv;
    else
        write_file(o.out, csv);
    if (!meta.empty()) {
        const std::string path = !o.metadata.empty() ? o.metadata : (o.out.empty() ? "" : o.out + ".json");
        if (!path.empty()) write_file(path, meta + "\n");
    }
    return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Causal models with design: identification, likelihood and estimation", "cdm"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_flag("--json", o.json, "machine-readable output and errors");

    auto graph_arg = [&](CLI::App* sc) { sc->add_option("graph", o.graph, "graph file")->required(); };

    auto* validate = app.add_subcommand("validate", "check the model definition");
    graph_arg(validate);

    auto* render = app.add_subcommand("render", "DOT drawing with causal order across, stage down");
    graph_arg(render);
    render->add_option("--out", o.out, "output file (default stdout)");

    auto* ident = app.add_subcommand("identify", "estimand of P(outcome | do(treat))");
    graph_arg(ident);
    ident->add_option("--treat", o.treat)->required();
    ident->add_option("--outcome", o.outcome)->required();

    auto* ci = app.add_subcommand("ci", "d-separation of --a and --b given --given");
    graph_arg(ci);
    ci->add_option("--a", o.a)->required();
    ci->add_option("--b", o.b)->required();
    ci->add_option("--given", o.given);

    auto* classify = app.add_subcommand("classify", "missingness class of a measured variable");
    graph_arg(classify);
    classify->add_option("--var", o.var)->required();

    auto* collapse = app.add_subcommand("collapse", "missingness graph or selection diagram");
    graph_arg(collapse);
    collapse->add_flag("--missingness", o.missingness);
    collapse->add_option("--selection-diagram", o.selection_diagram, "S=X,Y");
    collapse->add_option("--out", o.out);

    auto* fact = app.add_subcommand("factorize", "likelihood strata and factors");
    graph_arg(fact);
    fact->add_flag("--marginalize", o.marginalize);

    auto* fit = app.add_subcommand("fit", "maximum likelihood under the linear binary model");
    graph_arg(fit);
    fit->add_option("--data", o.data)->required();
    fit->add_option("--effects", o.effects, "e.g. \"do(X=1)\"");
    fit->add_option("--outcome", o.outcome, "effect outcome (default: causal sinks)");
    fit->add_option("--seed", o.seed);
    fit->add_option("--multistart", o.multistart);
    fit->add_option("--threads", o.threads);

    auto* sim = app.add_subcommand("simulate", "frequency table drawn from the model");
    graph_arg(sim);
    sim->add_option("--params", o.params)->required();
    sim->add_option("--n", o.n)->required();
    sim->add_option("--seed", o.seed);
    sim->add_flag("--expected", o.expected, "exact expected counts instead of a sample");
    sim->add_option("--out", o.out);
    sim->add_option("--metadata", o.metadata, "metadata JSON (default <out>.json)");
    sim->add_option("--threads", o.threads);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    auto fail = [&](const std::string& kind, const std::string& msg, int code) {
        if (o.json)
            err << ordered_json{{"version", 1}, {"error", kind}, {"message", msg}, {"exit_code", code}}.dump()
                << "\n";
        else
            err << "error: " << msg << "\n";
        return code;
    };
    try {
        if (*validate) return run_validate(o, out);
        if (*render) return run_render(o, out);
        if (*ident) return run_identify(o, out);
        if (*ci) return run_ci(o, out);
        if (*classify) return run_classify(o, out);
        if (*collapse) return run_collapse(o, out);
        if (*fact) return run_factorize(o, out);
        if (*fit) return run_fit(o, out);
        if (*sim) return run_simulate(o, out);
    } catch (const Error& e) {
        return fail(e.kind(), e.what(), exit_code_for(e.kind()));
    } catch (const nlohmann::json::exception& e) {
        return fail("ParseError", e.what(), kExitInvalid);
    }
    return kExitInvalid;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cli_main(args, std::cout, std::cerr);
}

}  // namespace cdm
