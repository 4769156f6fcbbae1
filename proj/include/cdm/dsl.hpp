#pragma once

#include <string>
#include <string_view>

#include "cdm/graph.hpp"

namespace cdm {

/// Parses the line-oriented graph language:
///
///     graph <name>
///     population <id>
///     node <id> kind=(causal|selection) info=(observed|unobserved|det-known|det-unknown)
///          [domain=v1,v2,...] [stage=<int>] [shared]
///     measure <id> : <causal-id> by <selection-id> [stage=<int>]
///     edge <id> -> <id>
///
/// `#` starts a comment. No validation beyond syntax happens here.
GraphSpec parse_graph_spec(std::string_view text);

/// Parse, insert the implicit population edges, validate.
/// A selection node without any selection parent receives an edge from the
/// population node.
DesignGraph build_graph(std::string_view text);

DesignGraph load_graph(const std::string& path);

/// Canonical text form: statements in grammar order, ids lexicographic.
std::string serialize(const DesignGraph& g);
std::string serialize(const GraphSpec& spec);

}  // namespace cdm
