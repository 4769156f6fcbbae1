#include "cdm/dsl.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace cdm {

namespace {

struct Token {
    enum class Type { Word, Equals, Comma, Colon, Arrow, End };
    Type type = Type::End;
    std::string text;
    int column = 0;
};

std::string describe(const Token& t) {
    switch (t.type) {
        case Token::Type::Word: return "'" + t.text + "'";
        case Token::Type::Equals: return "'='";
        case Token::Type::Comma: return "','";
        case Token::Type::Colon: return "':'";
        case Token::Type::Arrow: return "'->'";
        case Token::Type::End: return "end of line";
    }
    return "?";
}

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (c == '#') break;
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        const int col = static_cast<int>(i) + 1;
        if (c == '=') {
            out.push_back({Token::Type::Equals, "=", col});
            ++i;
        } else if (c == ',') {
            out.push_back({Token::Type::Comma, ",", col});
            ++i;
        } else if (c == ':') {
            out.push_back({Token::Type::Colon, ":", col});
            ++i;
        } else if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
            out.push_back({Token::Type::Arrow, "->", col});
            i += 2;
        } else {
            std::size_t j = i;
            while (j < line.size()) {
                char d = line[j];
                if (d == ' ' || d == '\t' || d == '\r' || d == '=' || d == ',' || d == ':' || d == '#') break;
                if (d == '-' && j + 1 < line.size() && line[j + 1] == '>') break;
                ++j;
            }
            out.push_back({Token::Type::Word, std::string(line.substr(i, j - i)), col});
            i = j;
        }
    }
    out.push_back({Token::Type::End, "", static_cast<int>(line.size()) + 1});
    return out;
}

class LineParser {
public:
    LineParser(std::vector<Token> tokens, int line) : tokens_(std::move(tokens)), line_(line) {}

    const Token& peek() const { return tokens_[pos_]; }
    bool at_end() const { return peek().type == Token::Type::End; }

    [[noreturn]] void fail(const std::string& expected) const {
        const Token& t = peek();
        throw ParseError("line " + std::to_string(line_) + ", column " + std::to_string(t.column) +
                         ": expected " + expected + ", found " + describe(t));
    }

    std::string word(const std::string& expected) {
        if (peek().type != Token::Type::Word) fail(expected);
        return tokens_[pos_++].text;
    }

    void keyword(const std::string& kw) {
        if (peek().type != Token::Type::Word || peek().text != kw) fail("'" + kw + "'");
        ++pos_;
    }

    void punct(Token::Type type, const std::string& expected) {
        if (peek().type != type) fail(expected);
        ++pos_;
    }

    int integer(const std::string& expected) {
        if (peek().type != Token::Type::Word) fail(expected);
        const std::string& s = peek().text;
        int value = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc() || ptr != s.data() + s.size() || value < 0) fail(expected);
        ++pos_;
        return value;
    }

    void end() {
        if (!at_end()) fail("end of line");
    }

private:
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int line_;
};

}  // namespace

GraphSpec parse_graph_spec(std::string_view text) {
    GraphSpec spec;
    std::map<std::string, std::size_t> declared;  // id -> index in spec.nodes
    bool population_node_declared = false;

    auto add_node = [&](Node n, LineParser& p) {
        if (spec.population && n.id == *spec.population && !population_node_declared &&
            declared.count(n.id)) {
            // `node` statement refining the implicit population declaration
            spec.nodes[declared[n.id]] = std::move(n);
            population_node_declared = true;
            return;
        }
        if (declared.count(n.id)) p.fail("a fresh node id (duplicate '" + n.id + "')");
        declared[n.id] = spec.nodes.size();
        spec.nodes.push_back(std::move(n));
    };

    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        LineParser p(tokenize(line), line_no);
        if (p.at_end()) continue;
        const std::string stmt = p.word("a statement keyword");

        if (stmt == "graph") {
            spec.name = p.word("graph name");
            p.end();
        } else if (stmt == "population") {
            std::string id = p.word("population node id");
            p.end();
            if (spec.population) p.fail("a single population statement");
            spec.population = id;
            if (auto it = declared.find(id); it != declared.end()) {
                population_node_declared = true;
            } else {
                Node n;
                n.id = id;
                n.kind = NodeKind::Selection;
                n.info = InfoAttr::DeterminedKnown;
                declared[id] = spec.nodes.size();
                spec.nodes.push_back(std::move(n));
            }
        } else if (stmt == "node") {
            Node n;
            n.id = p.word("node id");
            bool have_kind = false;
            bool have_info = false;
            while (!p.at_end()) {
                std::string key = p.word("node attribute");
                if (key == "shared") {
                    n.shared_selection = true;
                    continue;
                }
                p.punct(Token::Type::Equals, "'=' after '" + key + "'");
                if (key == "kind") {
                    std::string v = p.word("'causal' or 'selection'");
                    auto k = parse_node_kind(v);
                    if (!k || *k == NodeKind::Data) throw ParseError("line " + std::to_string(line_no) + ": kind must be causal or selection (data nodes come from 'measure'), got '" + v + "'");
                    n.kind = *k;
                    have_kind = true;
                } else if (key == "info") {
                    std::string v = p.word("information attribute");
                    auto info = parse_info_attr(v);
                    if (!info) throw ParseError("line " + std::to_string(line_no) + ": unknown info attribute '" + v + "'");
                    n.info = *info;
                    have_info = true;
                } else if (key == "domain") {
                    std::vector<std::string> values{p.word("domain value")};
                    while (p.peek().type == Token::Type::Comma) {
                        p.punct(Token::Type::Comma, "','");
                        values.push_back(p.word("domain value"));
                    }
                    n.domain = std::move(values);
                } else if (key == "stage") {
                    n.stage = p.integer("non-negative integer stage");
                } else {
                    throw ParseError("line " + std::to_string(line_no) + ": unknown node attribute '" + key + "'");
                }
            }
            if (!have_kind) p.fail("'kind=' attribute");
            if (!have_info) p.fail("'info=' attribute");
            add_node(std::move(n), p);
        } else if (stmt == "measure") {
            Node n;
            n.id = p.word("data node id");
            n.kind = NodeKind::Data;
            n.info = InfoAttr::Observed;
            p.punct(Token::Type::Colon, "':'");
            std::string causal = p.word("causal node id");
            p.keyword("by");
            std::string selection = p.word("selection node id");
            if (!p.at_end()) {
                p.keyword("stage");
                p.punct(Token::Type::Equals, "'='");
                n.stage = p.integer("non-negative integer stage");
            }
            p.end();
            spec.edges.emplace_back(causal, n.id);
            spec.edges.emplace_back(selection, n.id);
            add_node(std::move(n), p);
        } else if (stmt == "edge") {
            std::string from = p.word("edge source id");
            p.punct(Token::Type::Arrow, "'->'");
            std::string to = p.word("edge target id");
            p.end();
            spec.edges.emplace_back(from, to);
        } else {
            throw ParseError("line " + std::to_string(line_no) + ", column 1: expected one of graph, population, node, measure, edge, found '" + stmt + "'");
        }
    }
    return spec;
}

DesignGraph build_graph(std::string_view text) {
    GraphSpec spec = parse_graph_spec(text);
    if (spec.population) {
        std::map<std::string, NodeKind> kinds;
        for (const auto& n : spec.nodes) kinds[n.id] = n.kind;
        std::set<std::string> has_selection_parent;
        for (const auto& [from, to] : spec.edges) {
            auto a = kinds.find(from);
            if (a != kinds.end() && a->second == NodeKind::Selection) has_selection_parent.insert(to);
        }
        for (const auto& n : spec.nodes) {
            if (n.kind == NodeKind::Selection && n.id != *spec.population && !has_selection_parent.count(n.id))
                spec.edges.emplace_back(*spec.population, n.id);
        }
    }
    return DesignGraph::checked(std::move(spec));
}

DesignGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open graph file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return build_graph(buffer.str());
}

std::string serialize(const GraphSpec& spec) {
    std::vector<Node> nodes = spec.nodes;
    std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    std::map<std::string, NodeKind> kinds;
    for (const auto& n : nodes) kinds[n.id] = n.kind;

    std::map<std::string, std::pair<std::string, std::string>> measures;
    std::set<Edge> measure_edges;
    for (const auto& n : nodes) {
        if (n.kind != NodeKind::Data) continue;
        std::string causal;
        std::string selection;
        for (const auto& [from, to] : spec.edges) {
            if (to != n.id) continue;
            auto k = kinds.find(from);
            if (k == kinds.end()) continue;
            if (k->second == NodeKind::Causal && causal.empty()) causal = from;
            if (k->second == NodeKind::Selection && selection.empty()) selection = from;
        }
        if (!causal.empty() && !selection.empty()) {
            measures[n.id] = {causal, selection};
            measure_edges.insert({causal, n.id});
            measure_edges.insert({selection, n.id});
        }
    }

    std::ostringstream out;
    out << "graph " << spec.name << "\n";
    if (spec.population) out << "population " << *spec.population << "\n";
    for (const auto& n : nodes) {
        if (n.kind == NodeKind::Data && measures.count(n.id)) continue;
        out << "node " << n.id << " kind=" << to_string(n.kind) << " info=" << to_string(n.info);
        if (n.domain) {
            out << " domain=";
            for (std::size_t i = 0; i < n.domain->size(); ++i) out << (i ? "," : "") << (*n.domain)[i];
        }
        if (n.stage) out << " stage=" << *n.stage;
        if (n.shared_selection) out << " shared";
        out << "\n";
    }
    for (const auto& [id, ps] : measures) {
        out << "measure " << id << " : " << ps.first << " by " << ps.second;
        for (const auto& n : nodes)
            if (n.id == id && n.stage) out << " stage=" << *n.stage;
        out << "\n";
    }
    std::set<Edge> edges(spec.edges.begin(), spec.edges.end());
    for (const auto& e : edges) {
        if (measure_edges.count(e)) continue;
        out << "edge " << e.first << " -> " << e.second << "\n";
    }
    return out.str();
}

std::string serialize(const DesignGraph& g) { return serialize(g.spec()); }

}  // namespace cdm
