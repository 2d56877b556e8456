#include "delayldp/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <variant>

#include "delayldp/errors.hpp"

namespace delayldp {

namespace {

enum class Func { sin, cos, exp, log, sqrt, abs, tanh };
enum class BinOp { add, sub, mul, div, pow };

}  // namespace

struct Expression::Node {
    struct Constant {
        double value;
    };
    struct Time {};
    struct Variable {
        bool delayed;  // y instead of x
        std::size_t index;
    };
    struct Negate {
        std::shared_ptr<const Node> arg;
    };
    struct Call {
        Func fn;
        std::shared_ptr<const Node> arg;
    };
    struct Binary {
        BinOp op;
        std::shared_ptr<const Node> lhs;
        std::shared_ptr<const Node> rhs;
    };
    std::variant<Constant, Time, Variable, Negate, Call, Binary> v;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

class Parser {
public:
    Parser(std::string_view src, std::size_t dim) : src_(src), dim_(dim) {}

    NodePtr parse_all() {
        auto n = expr();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("expression \"" + std::string(src_) + "\" at column " + std::to_string(pos_ + 1) + ": " +
                         what);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    static NodePtr make(Expression::Node n) { return std::make_shared<const Expression::Node>(std::move(n)); }

    NodePtr expr() {
        auto lhs = term();
        while (true) {
            if (accept('+')) {
                lhs = make({Expression::Node::Binary{BinOp::add, lhs, term()}});
            } else if (accept('-')) {
                lhs = make({Expression::Node::Binary{BinOp::sub, lhs, term()}});
            } else {
                return lhs;
            }
        }
    }

    NodePtr term() {
        auto lhs = unary();
        while (true) {
            if (accept('*')) {
                lhs = make({Expression::Node::Binary{BinOp::mul, lhs, unary()}});
            } else if (accept('/')) {
                lhs = make({Expression::Node::Binary{BinOp::div, lhs, unary()}});
            } else {
                return lhs;
            }
        }
    }

    NodePtr unary() {
        if (accept('-')) return make({Expression::Node::Negate{unary()}});
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        auto base = atom();
        if (accept('^')) return make({Expression::Node::Binary{BinOp::pow, base, unary()}});
        return base;
    }

    NodePtr atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of expression");
        const char c = src_[pos_];
        if (accept('(')) {
            auto inner = expr();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail(std::string("unexpected '") + c + "'");
    }

    NodePtr number() {
        const char* first = src_.data() + pos_;
        const char* last = src_.data() + src_.size();
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{}) fail("malformed number");
        pos_ += static_cast<std::size_t>(ptr - first);
        return make({Expression::Node::Constant{value}});
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
        const std::string_view name = src_.substr(start, pos_ - start);
        if (name == "t") return make({Expression::Node::Time{}});
        if (name == "x" || name == "y") {
            std::size_t index = 0;
            if (accept('[')) {
                skip_ws();
                const char* first = src_.data() + pos_;
                auto [ptr, ec] = std::from_chars(first, src_.data() + src_.size(), index);
                if (ec != std::errc{}) fail("expected component index");
                pos_ += static_cast<std::size_t>(ptr - first);
                expect(']');
            }
            if (index >= dim_) fail("component index " + std::to_string(index) + " out of range for d=" + std::to_string(dim_));
            return make({Expression::Node::Variable{name == "y", index}});
        }
        static constexpr std::pair<std::string_view, Func> kFuncs[] = {
            {"sin", Func::sin},   {"cos", Func::cos}, {"exp", Func::exp},   {"log", Func::log},
            {"sqrt", Func::sqrt}, {"abs", Func::abs}, {"tanh", Func::tanh},
        };
        for (const auto& [fname, fn] : kFuncs) {
            if (name == fname) {
                expect('(');
                auto arg = expr();
                expect(')');
                return make({Expression::Node::Call{fn, arg}});
            }
        }
        pos_ = start;
        fail("unknown identifier '" + std::string(name) + "'");
    }

    std::string_view src_;
    std::size_t dim_;
    std::size_t pos_ = 0;
};

double apply(Func fn, double a) {
    switch (fn) {
        case Func::sin: return std::sin(a);
        case Func::cos: return std::cos(a);
        case Func::exp: return std::exp(a);
        case Func::log: return std::log(a);
        case Func::sqrt: return std::sqrt(a);
        case Func::abs: return std::abs(a);
        case Func::tanh: return std::tanh(a);
    }
    return 0.0;
}

double integer_power(double base, double exponent) {
    // Small integer exponents are the common case (x^2, x^3); avoid pow() there.
    if (exponent == std::round(exponent) && std::abs(exponent) <= 16.0) {
        auto n = static_cast<int>(std::abs(exponent));
        double r = 1.0;
        double b = base;
        while (n > 0) {
            if (n & 1) r *= b;
            b *= b;
            n >>= 1;
        }
        return exponent < 0 ? 1.0 / r : r;
    }
    return std::pow(base, exponent);
}

double evaluate(const Expression::Node& node, double t, std::span<const double> x, std::span<const double> y) {
    using N = Expression::Node;
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, N::Constant>) {
                return n.value;
            } else if constexpr (std::is_same_v<T, N::Time>) {
                return t;
            } else if constexpr (std::is_same_v<T, N::Variable>) {
                return n.delayed ? y[n.index] : x[n.index];
            } else if constexpr (std::is_same_v<T, N::Negate>) {
                return -evaluate(*n.arg, t, x, y);
            } else if constexpr (std::is_same_v<T, N::Call>) {
                return apply(n.fn, evaluate(*n.arg, t, x, y));
            } else {
                const double a = evaluate(*n.lhs, t, x, y);
                const double b = evaluate(*n.rhs, t, x, y);
                switch (n.op) {
                    case BinOp::add: return a + b;
                    case BinOp::sub: return a - b;
                    case BinOp::mul: return a * b;
                    case BinOp::div: return a / b;
                    case BinOp::pow: return integer_power(a, b);
                }
                return 0.0;
            }
        },
        node.v);
}

}  // namespace

Expression Expression::parse(std::string_view source, std::size_t dim) {
    Expression e;
    e.source_ = std::string(source);
    e.root_ = Parser(e.source_, dim).parse_all();
    return e;
}

double Expression::eval(double t, std::span<const double> x, std::span<const double> y) const {
    return evaluate(*root_, t, x, y);
}

}  // namespace delayldp
