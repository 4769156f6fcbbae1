#pragma once

#include <string>
#include <vector>

namespace cdm {

/// Dense probability (or value) table over named discrete variables,
/// row-major with the last variable varying fastest.
struct ProbabilityTable {
    std::vector<std::string> vars;
    std::vector<std::vector<std::string>> labels;
    std::vector<double> p;

    ProbabilityTable() = default;
    ProbabilityTable(std::vector<std::string> vars, std::vector<std::vector<std::string>> labels);

    int size_of(std::size_t var) const { return static_cast<int>(labels[var].size()); }
    int var_index(const std::string& id) const;  // -1 when absent
    std::size_t index(const std::vector<int>& state) const;
    void decode(std::size_t cell, std::vector<int>& state) const;
    double at(const std::vector<int>& state) const { return p[index(state)]; }
    double total() const;

    /// Sum out every variable not listed; result keeps the listed order.
    ProbabilityTable marginal(const std::vector<std::string>& keep) const;
};

}  // namespace cdm
