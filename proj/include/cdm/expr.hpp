#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cdm/table.hpp"

namespace cdm {

/// `var` takes the value named by symbol `sym` (a free or summed symbol).
struct Binding {
    std::string var;
    std::string sym;

    bool operator==(const Binding&) const = default;
};

struct ExprNode;
using ProbExpr = std::shared_ptr<const ExprNode>;

enum class ExprKind { Prob, Sum, Product, Fraction, Const };

struct ExprNode {
    ExprKind kind = ExprKind::Const;
    // Prob
    std::vector<Binding> outcome;
    std::vector<Binding> given;
    std::vector<Binding> intervened;
    // Sum: `bound` ranges over the domains of their variables
    std::vector<Binding> bound;
    // Sum: {body}; Product: factors; Fraction: {numerator, denominator}
    std::vector<ProbExpr> children;
    // Const
    double value = 1.0;
};

/// Lower-cased id, the symbol a variable's value gets by default.
std::string default_symbol(const std::string& var);

ProbExpr prob(std::vector<Binding> outcome, std::vector<Binding> given = {}, std::vector<Binding> intervened = {});
ProbExpr sum(std::vector<Binding> bound, ProbExpr body);
ProbExpr product(std::vector<ProbExpr> factors);
ProbExpr fraction(ProbExpr num, ProbExpr den);
ProbExpr constant(double value);

/// Bindings with the default symbol of each variable.
std::vector<Binding> bindings(const std::vector<std::string>& vars);

/// Text form, e.g. `sum_z P(z|X=x) * sum_x' P(y|X=x',Z=z) * P(X=x')`.
///   P(outcome|given,do(...))  outcome terms print the bare symbol when it is
///                             the variable's default symbol, else V=s
///   sum_s body / sum_{s,t} body   the sum extends to the end of its operand
///   a * b                     a sum that is not the last factor is parenthesized
///   (a) / (b)
std::string render(const ProbExpr& e);
std::string to_json(const ProbExpr& e);

/// Free symbols with the variable each one stands for, in first-use order.
std::vector<Binding> free_symbols(const ProbExpr& e);

/// Rename summation symbols that shadow a free or enclosing symbol by
/// appending primes.
ProbExpr rename_bound(const ProbExpr& e);

/// Canonical form under a variable order (topological): nested sums merged,
/// factors not depending on a summation symbol moved out, chain-rule
/// products merged, single-factor sums evaluated, fractions cancelled,
/// factors ordered by the latest outcome variable, sums last.
ProbExpr canonicalize(const ProbExpr& e, const std::vector<std::string>& order);

/// Value of `e` for every assignment of its free variables, computed from a
/// joint table of the observed variables. Conditioning on an event of
/// probability zero throws ZeroConditioningEvent; a variable missing from
/// the joint throws UnboundVariable.
ProbabilityTable evaluate_expr(const ProbExpr& e, const ProbabilityTable& joint);

}  // namespace cdm
