#pragma once

#include <string>
#include <vector>

#include "cdm/expr.hpp"
#include "cdm/graph.hpp"

namespace cdm {

/// Observed causal nodes with directed edges and bidirected (confounding)
/// arcs. Node indices follow the lexicographic order of ids.
struct LatentGraph {
    std::vector<std::string> nodes;
    Dag directed;
    std::vector<std::vector<int>> bidirected;  // sorted adjacency

    int size() const { return static_cast<int>(nodes.size()); }
    int index(const std::string& id) const;  // throws UnknownNode
    bool has_bidirected(int a, int b) const;
    std::vector<std::pair<std::string, std::string>> directed_edges() const;
    std::vector<std::pair<std::string, std::string>> bidirected_edges() const;  // a < b
};

/// Project out latent causal nodes (see `is_latent`): a -> b when a directed
/// path runs from a to b through latents only; a <-> b when a latent reaches
/// both through latent-only directed paths. Non-causal nodes are ignored.
LatentGraph latent_project(const DesignGraph& g);

/// Do-calculus rule check on the causal graph (latents included).
///   1: (Y _||_ Z | X, W) in G with edges into X removed
///   2: same with edges out of Z also removed
///   3: same with edges into X and into Z(W) removed, where Z(W) are the
///      Z-nodes that are not ancestors of any W-node once edges into X are cut
bool rule_applicable(int rule, const DesignGraph& g, const std::vector<std::string>& x,
                     const std::vector<std::string>& y, const std::vector<std::string>& z,
                     const std::vector<std::string>& w);
/// Same on index sets; no argument checking.
bool rule_applicable(int rule, const Dag& dag, const std::vector<int>& x, const std::vector<int>& y,
                     const std::vector<int>& z, const std::vector<int>& w);

bool backdoor_admissible(const DesignGraph& g, const std::vector<std::string>& x, const std::vector<std::string>& y,
                         const std::vector<std::string>& z);
bool frontdoor_admissible(const DesignGraph& g, const std::vector<std::string>& x, const std::vector<std::string>& y,
                          const std::vector<std::string>& z);

/// Adjustment estimands in canonical form (variables ordered by `order`).
ProbExpr backdoor_expression(const std::vector<std::string>& x, const std::vector<std::string>& y,
                             const std::vector<std::string>& z, const std::vector<std::string>& order);
ProbExpr frontdoor_expression(const std::vector<std::string>& x, const std::vector<std::string>& y,
                              const std::vector<std::string>& z, const std::vector<std::string>& order);

struct Hedge {
    std::vector<std::string> f;        // c-component the effect cannot be separated from
    std::vector<std::string> f_prime;  // its part outside the intervention
};

struct IdentifyResult {
    bool identifiable = false;
    ProbExpr expr;  // P(outcome | do(treat)) as a function of the lower-case symbols
    Hedge hedge;
};

IdentifyResult identify(const LatentGraph& g, const std::vector<std::string>& treat,
                        const std::vector<std::string>& outcome);
/// causal_projection, latent_project, identify.
IdentifyResult identify(const DesignGraph& g, const std::vector<std::string>& treat,
                        const std::vector<std::string>& outcome);

/// Topological order of the directed part, smallest index first on ties.
std::vector<std::string> topological_ids(const LatentGraph& g);

std::string result_json(const IdentifyResult& r);

}  // namespace cdm
