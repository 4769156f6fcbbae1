#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cdm/frequency_table.hpp"
#include "cdm/model.hpp"
#include "cdm/table.hpp"

namespace cdm {

inline constexpr double kDefaultStateCap = 1 << 20;

/// do-assignment: variable id -> value label.
using DoAssignment = std::map<std::string, std::string>;

/// Visit every design state of positive probability. `state` is indexed by
/// graph node; data nodes hold their causal value or the NA index, the
/// population node holds 1. Intervened variables are fixed to their value.
void enumerate_states(const DiscreteModel& model, const std::vector<double>& params, const DoAssignment& intervention,
                      const std::function<void(const std::vector<int>& state, double p)>& visit,
                      double state_cap = kDefaultStateCap);

/// Joint of the listed nodes (any kind; data nodes get an extra NA label),
/// with everything else summed out.
ProbabilityTable design_joint(const DiscreteModel& model, const ParamMap& params, const std::vector<std::string>& vars,
                              double state_cap = kDefaultStateCap);

/// Truncated factorization: intervened tables become point masses. `vars`
/// defaults to every causal variable.
ProbabilityTable interventional_distribution(const DiscreteModel& model, const ParamMap& params,
                                             const DoAssignment& intervention,
                                             std::vector<std::string> vars = {},
                                             double state_cap = kDefaultStateCap);

/// N times the exact probability of each observable row pattern.
FrequencyTable expected_frequencies(const DiscreteModel& model, const ParamMap& params, double n,
                                    double state_cap = kDefaultStateCap);

struct SimSpec {
    const DiscreteModel* model = nullptr;
    ParamMap params;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct SimMetadata {
    std::string generator = "splitmix64-counter";
    int generator_version = 1;
    std::uint64_t seed = 0;
    std::uint64_t n = 0;
    std::string spec_hash;
};

struct SimResult {
    FrequencyTable table;
    SimMetadata metadata;
};

/// Ancestral sampling of N individuals. Individual i, draw k uses the
/// uniform derived from (seed, i, k) only, so results do not depend on the
/// thread count.
SimResult simulate_dataset(const SimSpec& spec);

std::string metadata_json(const SimMetadata& meta);

/// Counter-based uniform in [0, 1).
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t draw);

}  // namespace cdm
