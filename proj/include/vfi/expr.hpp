#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "vfi/errors.hpp"

namespace vfi {

/// Variables the expression language knows about.  `w` is the state, `y1`
/// and `y2` the Volterra and Fredholm integral slots, `b` the horizon.
enum class Var : unsigned {
    Tau = 1u << 0,
    Sigma = 1u << 1,
    Varsigma = 1u << 2,
    Horizon = 1u << 3,
    W = 1u << 4,
    Y1 = 1u << 5,
    Y2 = 1u << 6,
};

struct VarSet {
    unsigned mask = 0;
    constexpr VarSet() = default;
    constexpr VarSet(std::initializer_list<Var> vars) {
        for (Var v : vars) mask |= static_cast<unsigned>(v);
    }
    constexpr bool contains(Var v) const { return (mask & static_cast<unsigned>(v)) != 0; }
    constexpr VarSet& add(Var v) { mask |= static_cast<unsigned>(v); return *this; }
    constexpr bool subset_of(VarSet other) const { return (mask & ~other.mask) == 0; }
};

/// Bindings for one evaluation.  Unset scalars/arrays count as unbound.
struct EvalEnv {
    double tau = 0.0, sigma = 0.0, varsigma = 0.0, b = 0.0;
    const double* w = nullptr;
    const double* y1 = nullptr;
    const double* y2 = nullptr;
    VarSet bound;

    EvalEnv& with_tau(double v) { tau = v; bound.add(Var::Tau); return *this; }
    EvalEnv& with_sigma(double v) { sigma = v; bound.add(Var::Sigma); return *this; }
    EvalEnv& with_varsigma(double v) { varsigma = v; bound.add(Var::Varsigma); return *this; }
    EvalEnv& with_horizon(double v) { b = v; bound.add(Var::Horizon); return *this; }
    EvalEnv& with_w(const double* p) { w = p; bound.add(Var::W); return *this; }
    EvalEnv& with_y1(const double* p) { y1 = p; bound.add(Var::Y1); return *this; }
    EvalEnv& with_y2(const double* p) { y2 = p; bound.add(Var::Y2); return *this; }
};

/// Arithmetic expression over tau/sigma/varsigma/b, the indexed state
/// accessors w[i]/y1[i]/y2[i], binary + - * / ^, unary minus, and the
/// functions sin cos exp log abs sqrt min max.  Stored as a flat node
/// vector; parse with parse_expression below.
class Expr {
public:
    enum class Op : std::uint8_t {
        Lit, Tau, Sigma, Varsigma, Horizon, W, Y1, Y2,
        Add, Sub, Mul, Div, Pow, Neg,
        Sin, Cos, Exp, Log, Abs, Sqrt, Min, Max,
    };

    struct Node {
        Op op;
        std::int32_t lhs = -1;
        std::int32_t rhs = -1;
        std::int32_t index = 0;  // component index for W/Y1/Y2
        double value = 0.0;      // literal payload
    };

    const std::vector<Node>& nodes() const { return nodes_; }
    std::int32_t root() const { return root_; }
    bool empty() const { return nodes_.empty(); }
    VarSet variables() const { return vars_; }
    bool uses(Var v) const { return vars_.contains(v); }

    double eval(const EvalEnv& env) const {
        require_bound(env);
        return eval_node(root_, env);
    }

    /// Structural equality (shape, ops, indices, literal values).
    bool identical(const Expr& other) const {
        if (nodes_.size() != other.nodes_.size()) return false;
        return same_subtree(root_, other, other.root_);
    }

    std::string to_string() const { return print_node(root_, 0); }

    /// Builder API (used by the parser and by test generators).
    std::int32_t add_literal(double v) {
        if (!std::isfinite(v)) throw InvalidArgument("literal must be finite");
        return push({Op::Lit, -1, -1, 0, v});
    }
    std::int32_t add_variable(Op op) {
        vars_.add(var_of(op));
        return push({op, -1, -1, 0, 0.0});
    }
    std::int32_t add_accessor(Op op, std::int32_t index) {
        vars_.add(var_of(op));
        return push({op, -1, -1, index, 0.0});
    }
    std::int32_t add_unary(Op op, std::int32_t child) {
        return push({op, child, -1, 0, 0.0});
    }
    std::int32_t add_binary(Op op, std::int32_t lhs, std::int32_t rhs) {
        return push({op, lhs, rhs, 0, 0.0});
    }
    void set_root(std::int32_t r) { root_ = r; }

    static Var var_of(Op op) {
        switch (op) {
            case Op::Tau: return Var::Tau;
            case Op::Sigma: return Var::Sigma;
            case Op::Varsigma: return Var::Varsigma;
            case Op::Horizon: return Var::Horizon;
            case Op::W: return Var::W;
            case Op::Y1: return Var::Y1;
            case Op::Y2: return Var::Y2;
            default: throw InvalidArgument("not a variable op");
        }
    }

private:
    std::int32_t push(Node n) {
        nodes_.push_back(n);
        return static_cast<std::int32_t>(nodes_.size() - 1);
    }

    void require_bound(const EvalEnv& env) const {
        static constexpr std::pair<Var, const char*> names[] = {
            {Var::Tau, "tau"}, {Var::Sigma, "sigma"}, {Var::Varsigma, "varsigma"},
            {Var::Horizon, "b"}, {Var::W, "w"}, {Var::Y1, "y1"}, {Var::Y2, "y2"},
        };
        for (auto [v, name] : names)
            if (vars_.contains(v) && !env.bound.contains(v))
                throw UnboundVariable(name);
    }

    double eval_node(std::int32_t i, const EvalEnv& env) const {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        double r;
        switch (n.op) {
            case Op::Lit: return n.value;
            case Op::Tau: return env.tau;
            case Op::Sigma: return env.sigma;
            case Op::Varsigma: return env.varsigma;
            case Op::Horizon: return env.b;
            case Op::W: return env.w[n.index];
            case Op::Y1: return env.y1[n.index];
            case Op::Y2: return env.y2[n.index];
            case Op::Add: r = eval_node(n.lhs, env) + eval_node(n.rhs, env); break;
            case Op::Sub: r = eval_node(n.lhs, env) - eval_node(n.rhs, env); break;
            case Op::Mul: r = eval_node(n.lhs, env) * eval_node(n.rhs, env); break;
            case Op::Div: r = eval_node(n.lhs, env) / eval_node(n.rhs, env); break;
            case Op::Pow: r = std::pow(eval_node(n.lhs, env), eval_node(n.rhs, env)); break;
            case Op::Neg: r = -eval_node(n.lhs, env); break;
            case Op::Sin: r = std::sin(eval_node(n.lhs, env)); break;
            case Op::Cos: r = std::cos(eval_node(n.lhs, env)); break;
            case Op::Exp: r = std::exp(eval_node(n.lhs, env)); break;
            case Op::Log: r = std::log(eval_node(n.lhs, env)); break;
            case Op::Abs: r = std::fabs(eval_node(n.lhs, env)); break;
            case Op::Sqrt: r = std::sqrt(eval_node(n.lhs, env)); break;
            case Op::Min: r = std::fmin(eval_node(n.lhs, env), eval_node(n.rhs, env)); break;
            case Op::Max: r = std::fmax(eval_node(n.lhs, env), eval_node(n.rhs, env)); break;
            default: throw EvalError("corrupt expression node");
        }
        if (!std::isfinite(r))
            throw EvalError("non-finite result in subexpression '" + print_node(i, 0) + "'");
        return r;
    }

    bool same_subtree(std::int32_t a, const Expr& other, std::int32_t b) const {
        if (a < 0 || b < 0) return a == b;
        const Node& na = nodes_[static_cast<std::size_t>(a)];
        const Node& nb = other.nodes_[static_cast<std::size_t>(b)];
        if (na.op != nb.op || na.index != nb.index) return false;
        if (na.op == Op::Lit && na.value != nb.value) return false;
        const bool has_lhs = na.lhs >= 0, has_rhs = na.rhs >= 0;
        if (has_lhs != (nb.lhs >= 0) || has_rhs != (nb.rhs >= 0)) return false;
        if (has_lhs && !same_subtree(na.lhs, other, nb.lhs)) return false;
        if (has_rhs && !same_subtree(na.rhs, other, nb.rhs)) return false;
        return true;
    }

    // Precedence levels: + - (1), * / (2), unary - (3), ^ (4), atoms (5).
    static int precedence(Op op) {
        switch (op) {
            case Op::Add: case Op::Sub: return 1;
            case Op::Mul: case Op::Div: return 2;
            case Op::Neg: return 3;
            case Op::Pow: return 4;
            default: return 5;
        }
    }

    std::string print_node(std::int32_t i, int /*depth*/) const {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        const auto child = [&](std::int32_t c, bool parens) {
            std::string s = print_node(c, 0);
            return parens ? "(" + s + ")" : s;
        };
        const int prec = precedence(n.op);
        switch (n.op) {
            case Op::Lit: return format_literal(n.value);
            case Op::Tau: return "tau";
            case Op::Sigma: return "sigma";
            case Op::Varsigma: return "varsigma";
            case Op::Horizon: return "b";
            case Op::W: return "w[" + std::to_string(n.index) + "]";
            case Op::Y1: return "y1[" + std::to_string(n.index) + "]";
            case Op::Y2: return "y2[" + std::to_string(n.index) + "]";
            case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: {
                const char* sym = n.op == Op::Add ? " + " : n.op == Op::Sub ? " - "
                                : n.op == Op::Mul ? "*" : "/";
                return child(n.lhs, precedence(node_op(n.lhs)) < prec) + sym +
                       child(n.rhs, precedence(node_op(n.rhs)) <= prec);
            }
            case Op::Pow:
                // lhs is atom-level in the grammar; rhs parses at unary level
                return child(n.lhs, precedence(node_op(n.lhs)) < 5) + "^" +
                       child(n.rhs, precedence(node_op(n.rhs)) < 3);
            case Op::Neg:
                return "-" + child(n.lhs, precedence(node_op(n.lhs)) < 3);
            case Op::Sin: return "sin(" + print_node(n.lhs, 0) + ")";
            case Op::Cos: return "cos(" + print_node(n.lhs, 0) + ")";
            case Op::Exp: return "exp(" + print_node(n.lhs, 0) + ")";
            case Op::Log: return "log(" + print_node(n.lhs, 0) + ")";
            case Op::Abs: return "abs(" + print_node(n.lhs, 0) + ")";
            case Op::Sqrt: return "sqrt(" + print_node(n.lhs, 0) + ")";
            case Op::Min: return "min(" + print_node(n.lhs, 0) + ", " + print_node(n.rhs, 0) + ")";
            case Op::Max: return "max(" + print_node(n.lhs, 0) + ", " + print_node(n.rhs, 0) + ")";
        }
        return "?";
    }

    Op node_op(std::int32_t i) const { return nodes_[static_cast<std::size_t>(i)].op; }

    /// Shortest decimal string that parses back to the same double.
    static std::string format_literal(double v) {
        char buf[64];
        for (int prec = 1; prec <= 17; ++prec) {
            std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
            if (std::strtod(buf, nullptr) == v) break;
        }
        return buf;
    }

    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
    VarSet vars_;
};

namespace detail {

class ExprParser {
public:
    ExprParser(std::string_view text, VarSet allowed, int dim)
        : text_(text), allowed_(allowed), dim_(dim) {}

    Expr parse() {
        Expr e;
        skip_ws();
        if (eof()) throw SyntaxError(pos_, "empty expression");
        const std::int32_t root = parse_additive(e);
        skip_ws();
        if (!eof())
            throw SyntaxError(pos_, std::string("unexpected character '") + text_[pos_] + "'");
        e.set_root(root);
        return e;
    }

private:
    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    void skip_ws() { while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_; }
    bool accept(char c) {
        skip_ws();
        if (!eof() && peek() == c) { ++pos_; return true; }
        return false;
    }
    void expect(char c, const char* what) {
        if (!accept(c)) throw SyntaxError(pos_, std::string("expected '") + c + "' " + what);
    }

    std::int32_t parse_additive(Expr& e) {
        std::int32_t lhs = parse_multiplicative(e);
        for (;;) {
            if (accept('+')) lhs = e.add_binary(Expr::Op::Add, lhs, parse_multiplicative(e));
            else if (accept('-')) lhs = e.add_binary(Expr::Op::Sub, lhs, parse_multiplicative(e));
            else return lhs;
        }
    }

    std::int32_t parse_multiplicative(Expr& e) {
        std::int32_t lhs = parse_unary(e);
        for (;;) {
            if (accept('*')) lhs = e.add_binary(Expr::Op::Mul, lhs, parse_unary(e));
            else if (accept('/')) lhs = e.add_binary(Expr::Op::Div, lhs, parse_unary(e));
            else return lhs;
        }
    }

    std::int32_t parse_unary(Expr& e) {
        if (accept('-')) return e.add_unary(Expr::Op::Neg, parse_unary(e));
        return parse_power(e);
    }

    std::int32_t parse_power(Expr& e) {
        const std::int32_t base = parse_atom(e);
        if (accept('^'))  // right-associative, exponent may carry a sign
            return e.add_binary(Expr::Op::Pow, base, parse_unary(e));
        return base;
    }

    std::int32_t parse_atom(Expr& e) {
        skip_ws();
        if (eof()) throw SyntaxError(pos_, "unexpected end of expression");
        const char c = peek();
        if (c == '(') {
            ++pos_;
            const std::int32_t inner = parse_additive(e);
            expect(')', "to close parenthesis");
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return parse_number(e);
        if (is_ident_start(c)) return parse_identifier(e);
        throw SyntaxError(pos_, std::string("unexpected character '") + c + "'");
    }

    std::int32_t parse_number(Expr& e) {
        const std::size_t start = pos_;
        while (!eof() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.'))
            ++pos_;
        if (!eof() && (peek() == 'e' || peek() == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (!eof() && (peek() == '+' || peek() == '-')) ++pos_;
            if (eof() || !std::isdigit(static_cast<unsigned char>(peek()))) pos_ = mark;
            else while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        }
        double value = 0.0;
        const char* first = text_.data() + start;
        const char* last = text_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr != last)
            throw SyntaxError(start, "malformed number literal");
        return e.add_literal(value);
    }

    static bool is_ident_start(char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
    }
    static bool is_ident_char(char c) {
        return is_ident_start(c) || (c >= '0' && c <= '9');
    }

    std::int32_t parse_identifier(Expr& e) {
        const std::size_t start = pos_;
        while (!eof() && is_ident_char(peek())) ++pos_;
        const std::string name(text_.substr(start, pos_ - start));

        if (name == "sin" || name == "cos" || name == "exp" || name == "log" ||
            name == "abs" || name == "sqrt") {
            expect('(', "after function name");
            const std::int32_t arg = parse_additive(e);
            expect(')', "to close function call");
            const Expr::Op op = name == "sin" ? Expr::Op::Sin
                              : name == "cos" ? Expr::Op::Cos
                              : name == "exp" ? Expr::Op::Exp
                              : name == "log" ? Expr::Op::Log
                              : name == "abs" ? Expr::Op::Abs : Expr::Op::Sqrt;
            return e.add_unary(op, arg);
        }
        if (name == "min" || name == "max") {
            expect('(', "after function name");
            const std::int32_t a = parse_additive(e);
            expect(',', "between function arguments");
            const std::int32_t b = parse_additive(e);
            expect(')', "to close function call");
            return e.add_binary(name == "min" ? Expr::Op::Min : Expr::Op::Max, a, b);
        }

        if (name == "tau" || name == "sigma" || name == "varsigma" || name == "b") {
            const Expr::Op op = name == "tau" ? Expr::Op::Tau
                              : name == "sigma" ? Expr::Op::Sigma
                              : name == "varsigma" ? Expr::Op::Varsigma : Expr::Op::Horizon;
            if (!allowed_.contains(Expr::var_of(op)))
                throw UnknownVariable(start, name + " (not allowed in this slot)");
            return e.add_variable(op);
        }
        if (name == "w" || name == "y1" || name == "y2") {
            const Expr::Op op = name == "w" ? Expr::Op::W
                              : name == "y1" ? Expr::Op::Y1 : Expr::Op::Y2;
            if (!allowed_.contains(Expr::var_of(op)))
                throw UnknownVariable(start, name + " (not allowed in this slot)");
            expect('[', "after state accessor");
            const std::int32_t idx = parse_index();
            expect(']', "to close index");
            return e.add_accessor(op, idx);
        }
        throw UnknownVariable(start, name);
    }

    std::int32_t parse_index() {
        skip_ws();
        const std::size_t start = pos_;
        while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        if (pos_ == start) throw SyntaxError(start, "expected component index");
        int idx = -1;
        std::from_chars(text_.data() + start, text_.data() + pos_, idx);
        if (idx < 0 || idx >= dim_)
            throw IndexOutOfRange(start, std::to_string(idx) + " with dimension " +
                                             std::to_string(dim_));
        return idx;
    }

    std::string_view text_;
    VarSet allowed_;
    int dim_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses one expression; `allowed` restricts the variable set per slot and
/// `d` bounds the component indices of w/y1/y2.
inline Expr parse_expression(std::string_view text, VarSet allowed, int d) {
    return detail::ExprParser(text, allowed, d).parse();
}

inline double eval_expression(const Expr& e, const EvalEnv& env) { return e.eval(env); }

}  // namespace vfi
