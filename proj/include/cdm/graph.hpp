#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cdm/errors.hpp"

namespace cdm {

enum class NodeKind { Causal, Selection, Data };

/// Observer's knowledge of a node. Drawn as filled circle, open circle,
/// filled diamond and open diamond respectively.
enum class InfoAttr { Observed, NotObserved, DeterminedKnown, DeterminedUnknown };

std::string_view to_string(NodeKind kind);
std::string_view to_string(InfoAttr info);
std::optional<NodeKind> parse_node_kind(std::string_view text);
std::optional<InfoAttr> parse_info_attr(std::string_view text);

struct Node {
    std::string id;
    NodeKind kind = NodeKind::Causal;
    InfoAttr info = InfoAttr::NotObserved;
    std::optional<std::vector<std::string>> domain;
    std::optional<int> stage;
    bool shared_selection = false;

    bool operator==(const Node&) const = default;
};

using Edge = std::pair<std::string, std::string>;

/// Unvalidated graph description: the input of `validate` and the common
/// currency of parsers, serializers and transforms.
struct GraphSpec {
    std::string name = "g";
    std::optional<std::string> population;
    std::vector<Node> nodes;
    std::vector<Edge> edges;
};

struct Violation {
    std::string rule;
    std::vector<std::string> ids;
    std::string message;

    bool operator==(const Violation&) const = default;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has_rule(std::string_view rule) const;
    std::string to_string() const;
};

class ValidationError : public Error {
public:
    explicit ValidationError(ValidationReport report);
    const ValidationReport& report() const noexcept { return report_; }

private:
    ValidationReport report_;
};

/// Index-based adjacency used by the graph algorithms. Node indices follow
/// the lexicographic order of ids, so traversal order is deterministic.
struct Dag {
    std::vector<std::vector<int>> parents;
    std::vector<std::vector<int>> children;

    explicit Dag(std::size_t n = 0) : parents(n), children(n) {}

    int size() const { return static_cast<int>(parents.size()); }
    bool has_edge(int from, int to) const;
    void add_edge(int from, int to);
    void remove_edge(int from, int to);
};

using Mask = std::vector<char>;

Mask make_mask(int n, const std::vector<int>& members);
std::vector<int> mask_members(const Mask& mask);

Mask ancestor_mask(const Dag& dag, const Mask& seeds);
Mask descendant_mask(const Dag& dag, const Mask& seeds);
bool has_cycle(const Dag& dag);
/// Kahn's algorithm with smallest-index tie breaking. Empty when cyclic.
std::vector<int> topological_order(const Dag& dag);
Dag remove_incoming(const Dag& dag, const Mask& targets);
Dag remove_outgoing(const Dag& dag, const Mask& sources);

ValidationReport validate(const GraphSpec& spec);

/// Immutable typed DAG. Construction checks only structural well-formedness
/// (unique ids, known endpoints); the causal-model-with-design invariants are
/// checked by `validate` / `DesignGraph::checked`. Surgery and transform
/// results are DesignGraphs that need not satisfy those invariants.
class DesignGraph {
public:
    explicit DesignGraph(GraphSpec spec);

    static DesignGraph checked(GraphSpec spec);

    const std::string& name() const { return name_; }
    const std::optional<std::string>& population() const { return population_; }
    std::optional<int> population_index() const;

    int size() const { return static_cast<int>(nodes_.size()); }
    const Node& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
    const Node& node(std::string_view id) const { return node(index(id)); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::string& id(int i) const { return node(i).id; }
    NodeKind kind(int i) const { return node(i).kind; }
    bool contains(std::string_view id) const;
    int index(std::string_view id) const;
    std::vector<int> indices(const std::vector<std::string>& ids) const;
    std::vector<std::string> ids(const std::vector<int>& indices) const;

    const Dag& dag() const { return dag_; }
    bool has_edge(std::string_view from, std::string_view to) const;
    /// All edges as id pairs in lexicographic order.
    std::vector<Edge> edges() const;
    std::vector<std::string> parents(std::string_view id) const;
    std::vector<std::string> children(std::string_view id) const;

    std::vector<int> nodes_of_kind(NodeKind kind) const;
    /// Data node measuring causal node `causal`, if any.
    std::optional<int> data_node_of(int causal) const;
    /// For a data node: its causal parent and selection parent.
    std::optional<int> measured_causal(int data) const;
    std::optional<int> measuring_selection(int data) const;

    /// Observational stage after applying defaults (population 0, otherwise
    /// max over parents, 0 for roots).
    int stage(int i) const { return stages_.at(static_cast<std::size_t>(i)); }

    GraphSpec spec() const;
    DesignGraph with_dag(const Dag& dag) const;

private:
    std::string name_;
    std::optional<std::string> population_;
    std::vector<Node> nodes_;
    std::unordered_map<std::string, int> index_;
    Dag dag_;
    std::vector<int> stages_;
};

std::vector<std::string> ancestors(const DesignGraph& g, const std::vector<std::string>& ids);
std::vector<std::string> descendants(const DesignGraph& g, const std::vector<std::string>& ids);

DesignGraph surgery_remove_incoming(const DesignGraph& g, const std::vector<std::string>& ids);
DesignGraph surgery_remove_outgoing(const DesignGraph& g, const std::vector<std::string>& ids);

/// Subgraph induced by the causal nodes. Causal nodes that carry a data node
/// become Observed, since they are measured under the design.
DesignGraph causal_projection(const DesignGraph& g);

/// Causal nodes whose values are never seen: no data node and an info
/// attribute of NotObserved or DeterminedUnknown.
bool is_latent(const DesignGraph& g, int i);

}  // namespace cdm
