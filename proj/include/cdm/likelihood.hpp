#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cdm/frequency_table.hpp"
#include "cdm/graph.hpp"
#include "cdm/model.hpp"

namespace cdm {

enum class ParamFamily { Theta, Psi };

struct Factor {
    int node = -1;
    std::string target;
    std::vector<std::string> conditioning;  // parents in topological order
    ParamFamily family = ParamFamily::Theta;
    /// Causal variables observed in the stratum, mapped to the node holding
    /// their value (the data node, or the variable itself when it is seen
    /// directly).
    std::map<std::string, std::string> substitution;
    int fixed_value = -1;  // selection targets: value fixed by the pattern
    // display forms, e.g. "X*" and {"m1=1", "U", "Z=Z*"}
    std::string shown_target;
    std::vector<std::string> shown_given;
};

struct SumScope {
    std::vector<std::string> vars;
    std::vector<int> factors;  // indices into Stratum::factors
};

struct Stratum {
    /// Displayed pattern: the outermost zeros, then the innermost ones.
    std::vector<std::pair<std::string, int>> pattern;
    /// Value of every selection node (graph index), -1 for other nodes.
    std::vector<int> selection;
    std::vector<Factor> factors;
    /// Causal variables without a value in this stratum.
    std::vector<std::string> marginalized;
    // filled by marginalize
    std::vector<SumScope> scopes;
    std::vector<std::string> dropped;  // summed out trivially (barren)

    std::string label() const;  // e.g. {m2=0,m1=1}
};

struct Factorization {
    std::string graph;
    bool marginalized = false;
    bool shared_selection = false;
    std::vector<Stratum> strata;
};

/// Strata are the selection assignments consistent with nesting (a node can
/// be 1 only when its selection parents are 1), most selected first.
/// Selection factors below a 0 are omitted.
Factorization factorize(const DesignGraph& g);

/// Remove barren unobserved variables, then group the rest into sum scopes
/// of connected factors.
Factorization marginalize(const Factorization& f, const DesignGraph& g);

std::string render_text(const Factorization& f);
std::string render_json(const Factorization& f);

/// Data bound to a model and a marginalized factorization; evaluates the
/// log-likelihood for many parameter vectors.
class CompiledLikelihood {
public:
    CompiledLikelihood(const DiscreteModel& model, const Factorization& f, const FrequencyTable& data);

    /// -inf outside the region where every row has positive probability.
    double operator()(const std::vector<double>& params) const;
    /// Same, but throws NonfiniteLogLik naming the offending row.
    double checked(const std::vector<double>& params) const;

    /// Probability of one observed row (index into the data).
    double row_probability(std::size_t row, const std::vector<double>& params) const;

    const DiscreteModel& model() const { return model_; }
    std::size_t rows() const { return rows_.size(); }
    /// For each row, the strata it matches.
    std::vector<std::vector<int>> matches() const;
    const Factorization& factorization() const { return f_; }

private:
    struct Prepared {
        int stratum;
        std::vector<int> state;  // fixed part of the design state
    };
    struct Row {
        double count;
        std::string text;
        std::vector<Prepared> strata;
    };

    double stratum_probability(const Prepared& p, const std::vector<double>& params) const;

    const DiscreteModel& model_;
    Factorization f_;
    std::vector<Row> rows_;
};

double loglik(const DiscreteModel& model, const Factorization& f, const FrequencyTable& data, const ParamMap& params);

}  // namespace cdm
