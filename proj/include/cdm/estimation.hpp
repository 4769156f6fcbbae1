#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cdm/frequency_table.hpp"
#include "cdm/likelihood.hpp"
#include "cdm/model.hpp"
#include "cdm/simulate.hpp"

namespace cdm {

struct FitOptions {
    int max_iterations = 20000;  // simplex iterations per barrier stage
    double tolerance = 1e-7;     // simplex size at which a stage stops
    int multistart = 4;
    std::uint64_t seed = 1;
    unsigned threads = 0;  // 0: one task per start
};

struct FitResult {
    ParamMap params;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    double max_gradient = 0.0;         // |d loglik / d param| at the optimum
    std::map<std::string, double> derived;  // theta_<V>_prime = P(V = 1)
    std::map<std::string, double> effects;
    std::vector<std::string> fixed;  // parameters set in closed form
};

/// Maximum likelihood under the linear binary parametrization (or any model
/// with free linear coefficients). Selection factors whose only parents are
/// selection nodes get their closed-form proportion when every row fixes
/// their value; the rest are found by simplex search under a log barrier on
/// the validity region, then polished by Newton steps.
FitResult fit_mle(const DiscreteModel& model, const Factorization& f, const FrequencyTable& data,
                  const FitOptions& opts = {});

/// Parse "do(X=1)" or "do(X=1,Z=0)".
DoAssignment parse_do(const std::string& text);

/// P(outcome = v | do(...)) for every outcome value, through `identify` on
/// the original graph `g` evaluated on the fitted model's population joint.
/// Keys look like "P(Y=1|do(X=1))". `outcome` defaults to the causal sinks
/// of the latent projection outside the intervention.
std::map<std::string, double> causal_effects(const DesignGraph& g, const DiscreteModel& fitted, const ParamMap& params,
                                             const std::vector<DoAssignment>& interventions,
                                             std::vector<std::string> outcome = {});

/// Closed form of P(Y=1 | do(X=x)) for the front-door family
/// theta_X, theta_Z(X), theta_Y(X, Z).
double causal_effect_plugin(const ParamMap& params, const DoAssignment& which);

std::string fit_json(const FitResult& r);

}  // namespace cdm
