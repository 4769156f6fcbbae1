#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cdm/graph.hpp"

namespace cdm {

inline const std::string kMissing = "NA";

struct FrequencyRow {
    std::vector<std::string> values;  // one per column, kMissing when absent
    double count = 0.0;
};

/// Observed dataset in aggregated form. Counts are usually integers but may
/// hold exact expectations.
struct FrequencyTable {
    std::vector<std::string> columns;
    std::vector<FrequencyRow> rows;

    double total() const;
    int column_index(const std::string& id) const;  // -1 when absent
};

/// Header: variable names then `count`. Missing cells are the literal NA.
FrequencyTable read_frequency_csv(std::istream& in);
FrequencyTable load_frequency_csv(const std::string& path);
void write_frequency_csv(std::ostream& out, const FrequencyTable& table);
std::string to_csv(const FrequencyTable& table);

/// Nodes whose values can appear in a dataset: data nodes, plus causal nodes
/// without a data node that are Observed or DeterminedKnown. Graph order.
std::vector<int> observable_columns(const DesignGraph& g);

/// Whether `node` (one of `observable_columns`) carries a value in a design
/// state. Data nodes are present when their selection parent is 1; other
/// columns when every selection ancestor is 1.
bool column_available(const DesignGraph& g, int node, const std::vector<int>& state);

}  // namespace cdm
