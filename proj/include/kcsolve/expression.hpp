#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kcsolve/error.hpp"

namespace kcsolve {

/// Arithmetic expression over named variables.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('-' | '+') unary | power
///   power   := primary ('^' unary)?
///   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
///
/// Functions: sin, cos, exp, log, abs (one argument) and pow (two).
/// The constant `pi` is predefined. Parse errors carry the column.
class Expression {
public:
    static Expression parse(std::string_view text, std::vector<std::string> variables);

    /// `values` must follow the order of the variable list given to parse().
    double evaluate(std::span<const double> values) const;

    const std::vector<std::string>& variables() const noexcept { return variables_; }
    /// True if the expression mentions `name`.
    bool uses(std::string_view name) const;

private:
    enum class Op { constant, variable, add, sub, mul, div, pow, neg, sin, cos, exp, log, abs };

    struct Node {
        Op op;
        double value = 0.0;
        int left = -1;
        int right = -1;
    };

    double eval(int node, std::span<const double> values) const;

    friend class ExpressionParser;

    std::vector<std::string> variables_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

} // namespace kcsolve
