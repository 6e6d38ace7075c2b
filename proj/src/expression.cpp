#include "kcsolve/expression.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

namespace kcsolve {

class ExpressionParser {
public:
    ExpressionParser(std::string_view text, Expression& out) : text_(text), out_(out) {}

    int parse() {
        const int root = expr();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return root;
    }

private:
    using Op = Expression::Op;

    [[noreturn]] void fail(const std::string& message) const {
        throw Error(ErrorCode::parse_error, "column " + std::to_string(pos_ + 1) + ": " + message);
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    int add(Op op, int left = -1, int right = -1, double value = 0.0) {
        out_.nodes_.push_back({op, value, left, right});
        return static_cast<int>(out_.nodes_.size()) - 1;
    }

    int expr() {
        int left = term();
        for (;;) {
            if (accept('+'))
                left = add(Op::add, left, term());
            else if (accept('-'))
                left = add(Op::sub, left, term());
            else
                return left;
        }
    }

    int term() {
        int left = unary();
        for (;;) {
            if (accept('*'))
                left = add(Op::mul, left, unary());
            else if (accept('/'))
                left = add(Op::div, left, unary());
            else
                return left;
        }
    }

    int unary() {
        if (accept('-')) return add(Op::neg, unary());
        if (accept('+')) return unary();
        return power();
    }

    int power() {
        const int base = primary();
        if (accept('^')) return add(Op::pow, base, unary());
        return base;
    }

    int primary() {
        skip_space();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            const int inner = expr();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    int number() {
        const char* begin = text_.data() + pos_;
        double value = 0.0;
        const auto [end, ec] = std::from_chars(begin, text_.data() + text_.size(), value);
        if (ec != std::errc() || end == begin) fail("malformed number");
        pos_ += static_cast<std::size_t>(end - begin);
        return add(Op::constant, -1, -1, value);
    }

    int name() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string id(text_.substr(start, pos_ - start));

        if (accept('(')) {
            static constexpr std::pair<const char*, Op> unary_functions[] = {
                {"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"log", Op::log}, {"abs", Op::abs}};
            for (const auto& [fname, op] : unary_functions) {
                if (id == fname) {
                    const int arg = expr();
                    expect(')');
                    return add(op, arg);
                }
            }
            if (id == "pow") {
                const int base = expr();
                expect(',');
                const int exponent = expr();
                expect(')');
                return add(Op::pow, base, exponent);
            }
            pos_ = start;
            fail("unknown function '" + id + "'");
        }

        const auto& vars = out_.variables_;
        const auto it = std::find(vars.begin(), vars.end(), id);
        if (it != vars.end()) return add(Op::variable, -1, -1, static_cast<double>(it - vars.begin()));
        if (id == "pi") return add(Op::constant, -1, -1, std::numbers::pi);
        pos_ = start;
        fail("unknown name '" + id + "'");
    }

    std::string_view text_;
    Expression& out_;
    std::size_t pos_ = 0;
};

Expression Expression::parse(std::string_view text, std::vector<std::string> variables) {
    Expression e;
    e.variables_ = std::move(variables);
    e.root_ = ExpressionParser(text, e).parse();
    return e;
}

double Expression::evaluate(std::span<const double> values) const {
    if (values.size() != variables_.size())
        throw Error(ErrorCode::shape_mismatch, "expression expects " + std::to_string(variables_.size()) + " values");
    return eval(root_, values);
}

bool Expression::uses(std::string_view name) const {
    const auto it = std::find(variables_.begin(), variables_.end(), name);
    if (it == variables_.end()) return false;
    const double index = static_cast<double>(it - variables_.begin());
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [&](const Node& n) { return n.op == Op::variable && n.value == index; });
}

double Expression::eval(int node, std::span<const double> values) const {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    switch (n.op) {
    case Op::constant: return n.value;
    case Op::variable: return values[static_cast<std::size_t>(n.value)];
    case Op::add: return eval(n.left, values) + eval(n.right, values);
    case Op::sub: return eval(n.left, values) - eval(n.right, values);
    case Op::mul: return eval(n.left, values) * eval(n.right, values);
    case Op::div: return eval(n.left, values) / eval(n.right, values);
    case Op::pow: return std::pow(eval(n.left, values), eval(n.right, values));
    case Op::neg: return -eval(n.left, values);
    case Op::sin: return std::sin(eval(n.left, values));
    case Op::cos: return std::cos(eval(n.left, values));
    case Op::exp: return std::exp(eval(n.left, values));
    case Op::log: return std::log(eval(n.left, values));
    case Op::abs: return std::abs(eval(n.left, values));
    }
    return 0.0;
}

} // namespace kcsolve
