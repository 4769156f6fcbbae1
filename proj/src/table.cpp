#include "cdm/table.hpp"

#include <numeric>
#include <stdexcept>

#include "cdm/errors.hpp"

namespace cdm {

ProbabilityTable::ProbabilityTable(std::vector<std::string> v, std::vector<std::vector<std::string>> l)
    : vars(std::move(v)), labels(std::move(l)) {
    std::size_t cells = 1;
    for (const auto& dom : labels) cells *= dom.size();
    p.assign(cells, 0.0);
}

int ProbabilityTable::var_index(const std::string& id) const {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i] == id) return static_cast<int>(i);
    return -1;
}

std::size_t ProbabilityTable::index(const std::vector<int>& state) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < vars.size(); ++i) idx = idx * labels[i].size() + static_cast<std::size_t>(state[i]);
    return idx;
}

void ProbabilityTable::decode(std::size_t cell, std::vector<int>& state) const {
    state.resize(vars.size());
    for (std::size_t i = vars.size(); i-- > 0;) {
        state[i] = static_cast<int>(cell % labels[i].size());
        cell /= labels[i].size();
    }
}

double ProbabilityTable::total() const { return std::accumulate(p.begin(), p.end(), 0.0); }

ProbabilityTable ProbabilityTable::marginal(const std::vector<std::string>& keep) const {
    std::vector<int> pos;
    std::vector<std::vector<std::string>> keep_labels;
    for (const auto& id : keep) {
        int i = var_index(id);
        if (i < 0) throw UnknownNode("variable '" + id + "' is not in the table");
        pos.push_back(i);
        keep_labels.push_back(labels[static_cast<std::size_t>(i)]);
    }
    ProbabilityTable out(keep, std::move(keep_labels));
    std::vector<int> state;
    std::vector<int> sub(keep.size());
    for (std::size_t cell = 0; cell < p.size(); ++cell) {
        if (p[cell] == 0.0) continue;
        decode(cell, state);
        for (std::size_t k = 0; k < pos.size(); ++k) sub[k] = state[static_cast<std::size_t>(pos[k])];
        out.p[out.index(sub)] += p[cell];
    }
    return out;
}

}  // namespace cdm
