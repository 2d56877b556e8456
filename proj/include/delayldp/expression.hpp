#pragma once

// Tiny arithmetic language for runtime-defined coefficients.
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | '+' unary | power
//   power  := atom ('^' unary)?            (right associative)
//   atom   := number | 't' | var | var '[' int ']' | func '(' expr ')' | '(' expr ')'
//   var    := 'x' | 'y'                    (bare x means x[0])
//   func   := sin | cos | exp | log | sqrt | abs | tanh

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace delayldp {

class Expression {
public:
    /// Parses `source`; variable indices must be below `dim`. Throws ParseError.
    static Expression parse(std::string_view source, std::size_t dim);

    [[nodiscard]] double eval(double t, std::span<const double> x, std::span<const double> y) const;
    [[nodiscard]] const std::string& source() const noexcept { return source_; }

    struct Node;

private:
    std::string source_;
    std::shared_ptr<const Node> root_;
};

}  // namespace delayldp
