#pragma once

#include <map>
#include <string>
#include <vector>

#include "cdm/graph.hpp"

namespace cdm {

/// Keeps causal nodes, data nodes and the selection nodes that parent a data
/// node. Existing edges among them stay; a causal node with a directed path
/// to a kept selection node gets a direct edge to it.
DesignGraph collapse_missingness(const DesignGraph& g);

/// Causal nodes only; an edge X -> Y survives unless Y is in `s`.
DesignGraph collapse_selection_diagram(const DesignGraph& g, const std::vector<std::string>& s);

enum class MissingnessClass { EverywhereMCAR, MNAR, Other };

std::string_view to_string(MissingnessClass c);

struct MissingnessReport {
    MissingnessClass cls = MissingnessClass::Other;
    std::string selection;              // the selection node measuring v
    std::vector<std::string> witness;   // node path supporting the class
};

/// EverywhereMCAR: v and its selection node are d-separated once v's data
/// node is removed (witness: v -> v* <- M).
/// MNAR: an edge v -> M, or a directed path v ~> M that passes through no
/// data node (witness: that path).
/// Other: anything else (witness: an open path between v and M without v*).
MissingnessReport classify_missingness(const DesignGraph& g, const std::string& v);

/// Per non-population selection node: whether its factor can be dropped when
/// estimating causal parameters. A factor is not ignorable when some
/// stratum where it appears leaves one of its causal parents unobserved, or
/// sums over a variable whose own factor involves the value of one of its
/// data-node parents.
std::map<std::string, bool> ignorable_selection_terms(const DesignGraph& g);

}  // namespace cdm
