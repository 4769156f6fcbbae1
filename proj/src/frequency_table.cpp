#include "cdm/frequency_table.hpp"

#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cdm/errors.hpp"

namespace cdm {

double FrequencyTable::total() const {
    return std::accumulate(rows.begin(), rows.end(), 0.0,
                           [](double acc, const FrequencyRow& r) { return acc + r.count; });
}

int FrequencyTable::column_index(const std::string& id) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == id) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.pop_back();
        std::size_t b = cell.find_first_not_of(' ');
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

FrequencyTable read_frequency_csv(std::istream& in) {
    FrequencyTable t;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (!header) {
            if (cells.empty() || cells.back() != "count")
                throw ParseError("line 1: header must end with a 'count' column");
            cells.pop_back();
            t.columns = std::move(cells);
            header = true;
            continue;
        }
        if (cells.size() != t.columns.size() + 1)
            throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size() + 1) +
                             " cells, found " + std::to_string(cells.size()));
        FrequencyRow row;
        try {
            std::size_t used = 0;
            row.count = std::stod(cells.back(), &used);
            if (used != cells.back().size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError("line " + std::to_string(lineno) + ": bad count '" + cells.back() + "'");
        }
        if (row.count < 0) throw ParseError("line " + std::to_string(lineno) + ": negative count");
        cells.pop_back();
        row.values = std::move(cells);
        t.rows.push_back(std::move(row));
    }
    if (!header) throw ParseError("empty frequency table");
    return t;
}

FrequencyTable load_frequency_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IOError", "cannot open '" + path + "'");
    return read_frequency_csv(in);
}

void write_frequency_csv(std::ostream& out, const FrequencyTable& table) {
    for (const auto& c : table.columns) out << c << ',';
    out << "count\n";
    std::ostringstream num;
    num.precision(17);
    for (const auto& row : table.rows) {
        for (const auto& v : row.values) out << v << ',';
        num.str("");
        num << row.count;
        out << num.str() << '\n';
    }
}

std::string to_csv(const FrequencyTable& table) {
    std::ostringstream out;
    write_frequency_csv(out, table);
    return out.str();
}

std::vector<int> observable_columns(const DesignGraph& g) {
    std::vector<int> out;
    for (int i = 0; i < g.size(); ++i) {
        const Node& n = g.node(i);
        if (n.kind == NodeKind::Data) {
            out.push_back(i);
        } else if (n.kind == NodeKind::Causal && !g.data_node_of(i) &&
                   (n.info == InfoAttr::Observed || n.info == InfoAttr::DeterminedKnown)) {
            out.push_back(i);
        }
    }
    return out;
}

bool column_available(const DesignGraph& g, int node, const std::vector<int>& state) {
    if (g.kind(node) == NodeKind::Data) {
        auto m = g.measuring_selection(node);
        return m && state[static_cast<std::size_t>(*m)] == 1;
    }
    Mask anc = ancestor_mask(g.dag(), make_mask(g.size(), {node}));
    for (int i = 0; i < g.size(); ++i)
        if (anc[static_cast<std::size_t>(i)] && g.kind(i) == NodeKind::Selection && state[static_cast<std::size_t>(i)] != 1)
            return false;
    return true;
}

}  // namespace cdm
