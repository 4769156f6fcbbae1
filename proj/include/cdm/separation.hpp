#pragma once

#include <string>
#include <vector>

#include "cdm/graph.hpp"
#include "cdm/model.hpp"

namespace cdm {

struct CIQuery {
    std::vector<std::string> a;
    std::vector<std::string> b;
    std::vector<std::string> given;
};

/// Reachability ("Bayes ball") d-separation test on index sets. The sets need
/// not be disjoint here; callers that care check that themselves.
bool d_separated(const Dag& dag, const std::vector<int>& a, const std::vector<int>& b,
                 const std::vector<int>& given);

/// Throws UnknownNode, OverlappingSets, or InvalidQuery (empty a or b).
bool d_separated(const DesignGraph& g, const CIQuery& q);

/// Exact conditional-independence check by enumerating the joint of the
/// design under `model`. Conditioning events of probability zero are skipped.
bool exact_ci(const DiscreteModel& model, const ParamMap& params, const CIQuery& q, double tol,
              double state_cap = 1 << 20);

}  // namespace cdm
