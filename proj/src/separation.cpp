#include "cdm/separation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "cdm/model.hpp"
#include "cdm/simulate.hpp"

namespace cdm {

bool d_separated(const Dag& dag, const std::vector<int>& a, const std::vector<int>& b,
                 const std::vector<int>& given) {
    const int n = dag.size();
    const Mask in_given = make_mask(n, given);
    const Mask given_anc = ancestor_mask(dag, in_given);
    const Mask in_b = make_mask(n, b);

    // visited[v][0]: reached from a child (moving up); [1]: from a parent.
    std::vector<std::array<char, 2>> visited(static_cast<std::size_t>(n), {0, 0});
    std::vector<std::pair<int, int>> stack;
    for (int v : a) stack.emplace_back(v, 0);

    while (!stack.empty()) {
        auto [v, dir] = stack.back();
        stack.pop_back();
        auto& seen = visited[static_cast<std::size_t>(v)][static_cast<std::size_t>(dir)];
        if (seen) continue;
        seen = 1;
        const bool observed = in_given[static_cast<std::size_t>(v)];
        if (!observed && in_b[static_cast<std::size_t>(v)]) return false;

        if (dir == 0) {
            if (observed) continue;
            for (int p : dag.parents[static_cast<std::size_t>(v)]) stack.emplace_back(p, 0);
            for (int c : dag.children[static_cast<std::size_t>(v)]) stack.emplace_back(c, 1);
        } else {
            if (!observed)
                for (int c : dag.children[static_cast<std::size_t>(v)]) stack.emplace_back(c, 1);
            if (given_anc[static_cast<std::size_t>(v)])
                for (int p : dag.parents[static_cast<std::size_t>(v)]) stack.emplace_back(p, 0);
        }
    }
    return true;
}

namespace {

void check_query(const DesignGraph& g, const CIQuery& q, std::vector<int>& a, std::vector<int>& b,
                 std::vector<int>& c) {
    a = g.indices(q.a);
    b = g.indices(q.b);
    c = g.indices(q.given);
    if (a.empty() || b.empty()) throw InvalidQuery("independence query needs non-empty A and B");
    auto overlap = [](const std::vector<int>& x, const std::vector<int>& y) {
        std::vector<int> out;
        std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
        return !out.empty();
    };
    if (overlap(a, b) || overlap(a, c) || overlap(b, c))
        throw OverlappingSets("A, B and the conditioning set must be pairwise disjoint");
}

}  // namespace

bool d_separated(const DesignGraph& g, const CIQuery& q) {
    std::vector<int> a, b, c;
    check_query(g, q, a, b, c);
    return d_separated(g.dag(), a, b, c);
}

bool exact_ci(const DiscreteModel& model, const ParamMap& params, const CIQuery& q, double tol,
              double state_cap) {
    std::vector<int> a, b, c;
    check_query(model.graph(), q, a, b, c);

    std::vector<std::string> vars;
    for (const auto* set : {&q.a, &q.b, &q.given}) vars.insert(vars.end(), set->begin(), set->end());
    ProbabilityTable joint = design_joint(model, params, vars, state_cap);

    const std::size_t na = q.a.size();
    const std::size_t nb = q.b.size();
    ProbabilityTable pc = joint.marginal(q.given);
    ProbabilityTable pac = joint.marginal([&] {
        std::vector<std::string> v(q.a);
        v.insert(v.end(), q.given.begin(), q.given.end());
        return v;
    }());
    ProbabilityTable pbc = joint.marginal([&] {
        std::vector<std::string> v(q.b);
        v.insert(v.end(), q.given.begin(), q.given.end());
        return v;
    }());

    std::vector<int> state(joint.vars.size(), 0);
    for (std::size_t cell = 0; cell < joint.p.size(); ++cell) {
        joint.decode(cell, state);
        std::vector<int> sa(state.begin(), state.begin() + static_cast<long>(na));
        std::vector<int> sb(state.begin() + static_cast<long>(na), state.begin() + static_cast<long>(na + nb));
        std::vector<int> sc(state.begin() + static_cast<long>(na + nb), state.end());
        const double p_c = pc.at(sc);
        if (p_c <= 0.0) continue;
        std::vector<int> sac(sa);
        sac.insert(sac.end(), sc.begin(), sc.end());
        std::vector<int> sbc(sb);
        sbc.insert(sbc.end(), sc.begin(), sc.end());
        const double lhs = joint.p[cell] / p_c;
        const double rhs = (pac.at(sac) / p_c) * (pbc.at(sbc) / p_c);
        if (std::abs(lhs - rhs) > tol) return false;
    }
    return true;
}

}  // namespace cdm
