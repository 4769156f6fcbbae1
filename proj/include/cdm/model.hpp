#pragma once

#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "cdm/graph.hpp"
#include "cdm/table.hpp"

namespace cdm {

using ParamMap = std::map<std::string, double>;

/// Fixed conditional probability table. One row per configuration of the
/// table parents (mixed radix, first parent slowest); each row is a
/// distribution over the target domain.
struct TableCpt {
    std::vector<std::vector<double>> rows;
};

/// Binary target with p(V=1 | pa) = sum over parent subsets S of
/// coef[S] * prod_{s in S} pa_s. `coefficients[mask]` names the coefficient
/// of the subset encoded by `mask` over the table parents.
struct LinearBinaryCpt {
    std::vector<std::string> coefficients;
};

using Cpt = std::variant<TableCpt, LinearBinaryCpt>;

/// Value index used for a data node whose selection is 0.
inline int missing_value(int domain_size) { return domain_size; }

struct ModelVariable {
    int node = -1;                    // index in the design graph
    std::string id;
    NodeKind kind = NodeKind::Causal;
    std::vector<std::string> labels;  // target domain
    std::vector<int> table_parents;   // parents the table is indexed by
    std::vector<int> gate_parents;    // selection parents of a selection node
    std::vector<int> parent_radix;    // value count of each table parent
    Cpt cpt;
    std::vector<int> coefficient_index;  // LinearBinaryCpt only: into params
};

/// Discrete model of a causal model with design: one table per causal node
/// and per non-population selection node. Data nodes are deterministic and
/// the population node is fixed at 1. A selection node is 0 whenever one of
/// its selection parents is 0.
class DiscreteModel {
public:
    DiscreteModel(DesignGraph graph, std::map<std::string, Cpt> cpts);

    const DesignGraph& graph() const { return *graph_; }
    const std::vector<ModelVariable>& variables() const { return variables_; }
    const ModelVariable& variable(const std::string& id) const;
    /// Model variable for a graph node; nullptr for data/population nodes.
    const ModelVariable* variable_of_node(int node) const;

    /// Domain size of a graph node as a *value* (data nodes include NA).
    int value_count(int node) const;
    const std::vector<std::string>& labels(int node) const;

    const std::vector<std::string>& param_names() const { return param_names_; }
    std::vector<double> param_vector(const ParamMap& params) const;
    ParamMap param_map(const std::vector<double>& values) const;

    /// Probability that `v` takes `value` given the design state (values of
    /// all graph nodes, indexed by graph index).
    double prob(const ModelVariable& v, int value, const std::vector<int>& state,
                const std::vector<double>& params) const;

    /// Every p(V=1|pa) implied by the linear tables, at every table-parent
    /// configuration. Empty for pure table models.
    std::vector<double> implied_probabilities(const std::vector<double>& params) const;
    bool valid(const std::vector<double>& params, double slack = 0.0) const;
    bool valid(const ParamMap& params) const { return valid(param_vector(params)); }

    /// Number of joint states of causal and selection variables.
    double state_count() const;

    bool has_shared_selection() const;

private:
    std::shared_ptr<const DesignGraph> graph_;
    std::vector<ModelVariable> variables_;
    std::vector<int> node_to_variable_;
    std::vector<std::string> param_names_;
};

/// Linear binary parametrization over the graph's own parents: one
/// coefficient per parent subset for each causal and selection node.
DiscreteModel linear_binary_model(const DesignGraph& g);

/// Graph in which the causal part is replaced by the observable factorization
/// of its latent projection: latent causal nodes are dropped and each observed
/// causal node gets as parents its c-component predecessors and their parents
/// (topological order). Selection and data nodes are kept.
DesignGraph observable_design(const DesignGraph& g);

/// Linear binary model over `observable_design(g)`; coefficient names follow
/// theta_<V><parents...> and psi_<selection>[_parents...].
DiscreteModel saturated_binary_parametrization(const DesignGraph& g);

std::string coefficient_name(const std::string& prefix, const std::string& target,
                             const std::vector<std::string>& subset);

}  // namespace cdm
