#pragma once

// Expression DSL over jet variables (x, t, z0..zK, eta, beta, named
// constants) with exact symbolic differentiation and the total-derivative
// operators D_x and D_t along the prolongation of z_{0,t} = F.
//
// Expressions are immutable shared ASTs; all operations are pure and
// safe to call concurrently.

#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pss::expr {

// ---------------------------------------------------------------------------
// errors

struct ParseError : std::runtime_error {
    int line, column;
    ParseError(const std::string& msg, int line_, int col_)
        : std::runtime_error(msg + " (line " + std::to_string(line_) + ", column " +
                             std::to_string(col_) + ")"),
          line(line_),
          column(col_) {}
};

struct EvalError : std::runtime_error {
    std::string subexpression;
    EvalError(const std::string& msg, std::string subexpr)
        : std::runtime_error(msg + " in subexpression: " + subexpr),
          subexpression(std::move(subexpr)) {}
};

// ---------------------------------------------------------------------------
// AST

enum class UnaryFn { Neg, Sin, Cos, Tan, Sinh, Cosh, Tanh, Exp, Log, Sqrt, Atan };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    enum class Kind { Number, Symbol, Unary, Binary };
    Kind kind;
    double number = 0.0;
    std::string symbol;  // canonical name ("u" is resolved to "z0" at parse time)
    int jet_index = -1;  // i for z_i, otherwise -1
    UnaryFn fn = UnaryFn::Neg;
    BinaryOp op = BinaryOp::Add;
    NodePtr lhs, rhs;
};

inline bool is_number(const NodePtr& n) { return n->kind == Node::Kind::Number; }
inline bool is_number(const NodePtr& n, double v) { return is_number(n) && n->number == v; }

inline NodePtr make_number(double v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Number;
    n->number = v;
    return n;
}

// name must already be canonical (z0.. not u)
inline NodePtr make_symbol(const std::string& name) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Symbol;
    n->symbol = name;
    if (name.size() >= 2 && name[0] == 'z') {
        bool digits = true;
        for (std::size_t i = 1; i < name.size(); ++i) digits = digits && std::isdigit((unsigned char)name[i]);
        if (digits) n->jet_index = std::stoi(name.substr(1));
    }
    return n;
}

inline double apply_unary(UnaryFn f, double v) {
    switch (f) {
        case UnaryFn::Neg: return -v;
        case UnaryFn::Sin: return std::sin(v);
        case UnaryFn::Cos: return std::cos(v);
        case UnaryFn::Tan: return std::tan(v);
        case UnaryFn::Sinh: return std::sinh(v);
        case UnaryFn::Cosh: return std::cosh(v);
        case UnaryFn::Tanh: return std::tanh(v);
        case UnaryFn::Exp: return std::exp(v);
        case UnaryFn::Log: return std::log(v);
        case UnaryFn::Sqrt: return std::sqrt(v);
        case UnaryFn::Atan: return std::atan(v);
    }
    return 0.0;
}

inline NodePtr make_unary(UnaryFn f, NodePtr a) {
    if (f == UnaryFn::Neg) {
        if (is_number(a)) return make_number(-a->number);
        if (a->kind == Node::Kind::Unary && a->fn == UnaryFn::Neg) return a->lhs;
    } else if (is_number(a)) {
        const double v = apply_unary(f, a->number);
        if (std::isfinite(v)) return make_number(v);
        // out-of-domain constant: keep the node so evaluation reports it
    }
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Unary;
    n->fn = f;
    n->lhs = std::move(a);
    return n;
}

inline NodePtr make_binary(BinaryOp op, NodePtr a, NodePtr b);

// general power: constant exponents stay as Pow nodes, anything else is
// rewritten as exp(b*log a) with the corresponding domain restriction
inline NodePtr make_pow(NodePtr a, NodePtr b) {
    if (!is_number(b))
        return make_unary(UnaryFn::Exp, make_binary(BinaryOp::Mul, std::move(b),
                                                    make_unary(UnaryFn::Log, std::move(a))));
    if (is_number(b, 0.0)) return make_number(1.0);
    if (is_number(b, 1.0)) return a;
    if (is_number(a)) {
        const double v = std::pow(a->number, b->number);
        if (std::isfinite(v)) return make_number(v);
    }
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Binary;
    n->op = BinaryOp::Pow;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

inline NodePtr make_binary(BinaryOp op, NodePtr a, NodePtr b) {
    if (op == BinaryOp::Pow) return make_pow(std::move(a), std::move(b));
    if (is_number(a) && is_number(b)) {
        double v = 0;
        switch (op) {
            case BinaryOp::Add: v = a->number + b->number; break;
            case BinaryOp::Sub: v = a->number - b->number; break;
            case BinaryOp::Mul: v = a->number * b->number; break;
            case BinaryOp::Div: v = a->number / b->number; break;
            default: break;
        }
        if (std::isfinite(v)) return make_number(v);
    }
    switch (op) {
        case BinaryOp::Add:
            if (is_number(a, 0.0)) return b;
            if (is_number(b, 0.0)) return a;
            break;
        case BinaryOp::Sub:
            if (is_number(b, 0.0)) return a;
            if (is_number(a, 0.0)) return make_unary(UnaryFn::Neg, std::move(b));
            break;
        case BinaryOp::Mul:
            if (is_number(a, 0.0) || is_number(b, 0.0)) return make_number(0.0);
            if (is_number(a, 1.0)) return b;
            if (is_number(b, 1.0)) return a;
            if (is_number(a, -1.0)) return make_unary(UnaryFn::Neg, std::move(b));
            if (is_number(b, -1.0)) return make_unary(UnaryFn::Neg, std::move(a));
            break;
        case BinaryOp::Div:
            if (is_number(a, 0.0) && !is_number(b, 0.0)) return make_number(0.0);
            if (is_number(b, 1.0)) return a;
            break;
        default: break;
    }
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Binary;
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

// ---------------------------------------------------------------------------
// evaluation point

// Numeric assignment for every variable an expression may reference.
// z[i] holds the value of z_i; missing entries are evaluation errors.
struct JetPoint {
    double x = 0.0, t = 0.0;
    double eta = 0.0, beta = 0.0;
    std::vector<double> z;
    std::map<std::string, double> constants;
};

struct EvalOptions {
    // treat |denominator| below this as a domain error (sampling guard)
    double min_abs_denominator = 0.0;
};

// ---------------------------------------------------------------------------
// printing (used by error reporting and the CLI `rhs` command)

inline int precedence_of(const NodePtr& n) {
    switch (n->kind) {
        case Node::Kind::Number: return n->number < 0 ? 3 : 5;
        case Node::Kind::Symbol: return 5;
        case Node::Kind::Unary: return n->fn == UnaryFn::Neg ? 3 : 5;
        case Node::Kind::Binary:
            switch (n->op) {
                case BinaryOp::Add:
                case BinaryOp::Sub: return 1;
                case BinaryOp::Mul:
                case BinaryOp::Div: return 2;
                case BinaryOp::Pow: return 4;
            }
    }
    return 5;
}

inline const char* unary_name(UnaryFn f) {
    switch (f) {
        case UnaryFn::Neg: return "-";
        case UnaryFn::Sin: return "sin";
        case UnaryFn::Cos: return "cos";
        case UnaryFn::Tan: return "tan";
        case UnaryFn::Sinh: return "sinh";
        case UnaryFn::Cosh: return "cosh";
        case UnaryFn::Tanh: return "tanh";
        case UnaryFn::Exp: return "exp";
        case UnaryFn::Log: return "log";
        case UnaryFn::Sqrt: return "sqrt";
        case UnaryFn::Atan: return "atan";
    }
    return "?";
}

inline void print_node(std::ostream& os, const NodePtr& n, int parent_prec) {
    const int prec = precedence_of(n);
    const bool parens = prec < parent_prec;
    if (parens) os << '(';
    switch (n->kind) {
        case Node::Kind::Number: {
            std::ostringstream tmp;
            tmp.precision(15);
            tmp << n->number;
            os << tmp.str();
            break;
        }
        case Node::Kind::Symbol: os << n->symbol; break;
        case Node::Kind::Unary:
            if (n->fn == UnaryFn::Neg) {
                os << '-';
                print_node(os, n->lhs, 3 + 1);
            } else {
                os << unary_name(n->fn) << '(';
                print_node(os, n->lhs, 0);
                os << ')';
            }
            break;
        case Node::Kind::Binary: {
            const char* sym = n->op == BinaryOp::Add   ? " + "
                              : n->op == BinaryOp::Sub ? " - "
                              : n->op == BinaryOp::Mul ? "*"
                              : n->op == BinaryOp::Div ? "/"
                                                       : "^";
            const bool right_assoc = n->op == BinaryOp::Pow;
            print_node(os, n->lhs, right_assoc ? prec + 1 : prec);
            os << sym;
            print_node(os, n->rhs, right_assoc ? prec : prec + 1);
            break;
        }
    }
    if (parens) os << ')';
}

inline std::string to_string(const NodePtr& n) {
    std::ostringstream os;
    print_node(os, n, 0);
    return os.str();
}

// ---------------------------------------------------------------------------
// Expression

class Expression {
  public:
    Expression() : node_(make_number(0.0)) {}
    explicit Expression(NodePtr n) : node_(std::move(n)) {}
    Expression(double v) : node_(make_number(v)) {}

    static Expression number(double v) { return Expression(make_number(v)); }
    // name: canonical symbol ("u" accepted as alias for z0)
    static Expression symbol(const std::string& name) {
        return Expression(make_symbol(name == "u" ? "z0" : name));
    }
    static Expression jet(int i) { return Expression(make_symbol("z" + std::to_string(i))); }

    const NodePtr& node() const { return node_; }
    bool is_literal_zero() const { return is_number(node_, 0.0); }
    bool is_literal_number() const { return is_number(node_); }
    double literal_value() const { return node_->number; }

    double evaluate(const JetPoint& p, const EvalOptions& opt = {}) const { return eval(node_, p, opt); }

    Expression diff(const std::string& var) const {
        const std::string canonical = var == "u" ? "z0" : var;
        return Expression(d(node_, canonical));
    }

    int max_jet_order() const { return max_jet(node_); }

    bool depends_on(const std::string& var) const {
        const std::string canonical = var == "u" ? "z0" : var;
        return depends(node_, canonical);
    }

    void collect_symbols(std::set<std::string>& out) const { collect(node_, out); }
    std::set<std::string> symbols() const {
        std::set<std::string> s;
        collect(node_, s);
        return s;
    }

    std::string str() const { return to_string(node_); }

    friend Expression operator+(const Expression& a, const Expression& b) {
        return Expression(make_binary(BinaryOp::Add, a.node_, b.node_));
    }
    friend Expression operator-(const Expression& a, const Expression& b) {
        return Expression(make_binary(BinaryOp::Sub, a.node_, b.node_));
    }
    friend Expression operator*(const Expression& a, const Expression& b) {
        return Expression(make_binary(BinaryOp::Mul, a.node_, b.node_));
    }
    friend Expression operator/(const Expression& a, const Expression& b) {
        return Expression(make_binary(BinaryOp::Div, a.node_, b.node_));
    }
    friend Expression operator-(const Expression& a) {
        return Expression(make_unary(UnaryFn::Neg, a.node_));
    }

  private:
    static double eval(const NodePtr& n, const JetPoint& p, const EvalOptions& opt);
    static NodePtr d(const NodePtr& n, const std::string& var);
    static int max_jet(const NodePtr& n);
    static bool depends(const NodePtr& n, const std::string& var);
    static void collect(const NodePtr& n, std::set<std::string>& out);

    NodePtr node_;
};

inline Expression apply(UnaryFn f, const Expression& a) {
    return Expression(make_unary(f, a.node()));
}
inline Expression sin(const Expression& a) { return apply(UnaryFn::Sin, a); }
inline Expression cos(const Expression& a) { return apply(UnaryFn::Cos, a); }
inline Expression tan(const Expression& a) { return apply(UnaryFn::Tan, a); }
inline Expression sinh(const Expression& a) { return apply(UnaryFn::Sinh, a); }
inline Expression cosh(const Expression& a) { return apply(UnaryFn::Cosh, a); }
inline Expression tanh(const Expression& a) { return apply(UnaryFn::Tanh, a); }
inline Expression exp(const Expression& a) { return apply(UnaryFn::Exp, a); }
inline Expression log(const Expression& a) { return apply(UnaryFn::Log, a); }
inline Expression sqrt(const Expression& a) { return apply(UnaryFn::Sqrt, a); }
inline Expression atan(const Expression& a) { return apply(UnaryFn::Atan, a); }
inline Expression pow(const Expression& a, const Expression& b) {
    return Expression(make_pow(a.node(), b.node()));
}

inline double Expression::eval(const NodePtr& n, const JetPoint& p, const EvalOptions& opt) {
    switch (n->kind) {
        case Node::Kind::Number: return n->number;
        case Node::Kind::Symbol: {
            if (n->jet_index >= 0) {
                if (n->jet_index >= (int)p.z.size())
                    throw EvalError("unassigned jet variable", n->symbol);
                return p.z[n->jet_index];
            }
            if (n->symbol == "x") return p.x;
            if (n->symbol == "t") return p.t;
            if (n->symbol == "eta") return p.eta;
            if (n->symbol == "beta") return p.beta;
            auto it = p.constants.find(n->symbol);
            if (it == p.constants.end()) throw EvalError("unassigned variable", n->symbol);
            return it->second;
        }
        case Node::Kind::Unary: {
            const double v = eval(n->lhs, p, opt);
            switch (n->fn) {
                case UnaryFn::Log:
                    if (v <= 0.0) throw EvalError("log of non-positive value", to_string(n));
                    break;
                case UnaryFn::Sqrt:
                    if (v < 0.0) throw EvalError("sqrt of negative value", to_string(n));
                    break;
                default: break;
            }
            return apply_unary(n->fn, v);
        }
        case Node::Kind::Binary: {
            const double a = eval(n->lhs, p, opt);
            const double b = eval(n->rhs, p, opt);
            switch (n->op) {
                case BinaryOp::Add: return a + b;
                case BinaryOp::Sub: return a - b;
                case BinaryOp::Mul: return a * b;
                case BinaryOp::Div:
                    if (b == 0.0) throw EvalError("division by zero", to_string(n));
                    if (std::abs(b) < opt.min_abs_denominator)
                        throw EvalError("denominator below sampling floor", to_string(n));
                    return a / b;
                case BinaryOp::Pow: {
                    const double v = std::pow(a, b);
                    if (!std::isfinite(v)) {
                        if (a == 0.0 && b < 0.0)
                            throw EvalError("zero raised to negative power", to_string(n));
                        if (a < 0.0) throw EvalError("negative base with non-integer exponent", to_string(n));
                    }
                    return v;
                }
            }
        }
    }
    return 0.0;
}

inline NodePtr Expression::d(const NodePtr& n, const std::string& var) {
    switch (n->kind) {
        case Node::Kind::Number: return make_number(0.0);
        case Node::Kind::Symbol: return make_number(n->symbol == var ? 1.0 : 0.0);
        case Node::Kind::Unary: {
            NodePtr inner = d(n->lhs, var);
            if (is_number(inner, 0.0)) return inner;
            const NodePtr& u = n->lhs;
            NodePtr outer;
            switch (n->fn) {
                case UnaryFn::Neg: return make_unary(UnaryFn::Neg, inner);
                case UnaryFn::Sin: outer = make_unary(UnaryFn::Cos, u); break;
                case UnaryFn::Cos: outer = make_unary(UnaryFn::Neg, make_unary(UnaryFn::Sin, u)); break;
                case UnaryFn::Tan:
                    // 1 + tan^2 u
                    outer = make_binary(BinaryOp::Add, make_number(1.0),
                                        make_pow(make_unary(UnaryFn::Tan, u), make_number(2.0)));
                    break;
                case UnaryFn::Sinh: outer = make_unary(UnaryFn::Cosh, u); break;
                case UnaryFn::Cosh: outer = make_unary(UnaryFn::Sinh, u); break;
                case UnaryFn::Tanh:
                    outer = make_binary(BinaryOp::Sub, make_number(1.0),
                                        make_pow(make_unary(UnaryFn::Tanh, u), make_number(2.0)));
                    break;
                case UnaryFn::Exp: outer = make_unary(UnaryFn::Exp, u); break;
                case UnaryFn::Log: return make_binary(BinaryOp::Div, inner, u);
                case UnaryFn::Sqrt:
                    return make_binary(BinaryOp::Div, inner,
                                       make_binary(BinaryOp::Mul, make_number(2.0),
                                                   make_unary(UnaryFn::Sqrt, u)));
                case UnaryFn::Atan:
                    return make_binary(BinaryOp::Div, inner,
                                       make_binary(BinaryOp::Add, make_number(1.0),
                                                   make_pow(u, make_number(2.0))));
            }
            return make_binary(BinaryOp::Mul, outer, inner);
        }
        case Node::Kind::Binary: {
            switch (n->op) {
                case BinaryOp::Add: return make_binary(BinaryOp::Add, d(n->lhs, var), d(n->rhs, var));
                case BinaryOp::Sub: return make_binary(BinaryOp::Sub, d(n->lhs, var), d(n->rhs, var));
                case BinaryOp::Mul:
                    return make_binary(BinaryOp::Add,
                                       make_binary(BinaryOp::Mul, d(n->lhs, var), n->rhs),
                                       make_binary(BinaryOp::Mul, n->lhs, d(n->rhs, var)));
                case BinaryOp::Div:
                    // (a'b - ab') / b^2
                    return make_binary(
                        BinaryOp::Div,
                        make_binary(BinaryOp::Sub,
                                    make_binary(BinaryOp::Mul, d(n->lhs, var), n->rhs),
                                    make_binary(BinaryOp::Mul, n->lhs, d(n->rhs, var))),
                        make_pow(n->rhs, make_number(2.0)));
                case BinaryOp::Pow: {
                    // exponent is constant by construction
                    NodePtr inner = d(n->lhs, var);
                    if (is_number(inner, 0.0)) return inner;
                    const double c = n->rhs->number;
                    NodePtr rule = make_binary(BinaryOp::Mul, make_number(c),
                                               make_pow(n->lhs, make_number(c - 1.0)));
                    return make_binary(BinaryOp::Mul, rule, inner);
                }
            }
        }
    }
    return make_number(0.0);
}

inline int Expression::max_jet(const NodePtr& n) {
    switch (n->kind) {
        case Node::Kind::Number: return -1;
        case Node::Kind::Symbol: return n->jet_index;
        case Node::Kind::Unary: return max_jet(n->lhs);
        case Node::Kind::Binary: return std::max(max_jet(n->lhs), max_jet(n->rhs));
    }
    return -1;
}

inline bool Expression::depends(const NodePtr& n, const std::string& var) {
    switch (n->kind) {
        case Node::Kind::Number: return false;
        case Node::Kind::Symbol: return n->symbol == var;
        case Node::Kind::Unary: return depends(n->lhs, var);
        case Node::Kind::Binary: return depends(n->lhs, var) || depends(n->rhs, var);
    }
    return false;
}

inline void Expression::collect(const NodePtr& n, std::set<std::string>& out) {
    switch (n->kind) {
        case Node::Kind::Number: return;
        case Node::Kind::Symbol: out.insert(n->symbol); return;
        case Node::Kind::Unary: collect(n->lhs, out); return;
        case Node::Kind::Binary:
            collect(n->lhs, out);
            collect(n->rhs, out);
            return;
    }
}

inline Expression evaluate_to_expr(double v) { return Expression::number(v); }

inline double evaluate(const Expression& e, const JetPoint& p, const EvalOptions& opt = {}) {
    return e.evaluate(p, opt);
}
inline Expression differentiate(const Expression& e, const std::string& var) { return e.diff(var); }
inline int max_jet_order(const Expression& e) { return e.max_jet_order(); }

// D_x e = de/dx + sum_{i=0}^{k} (de/dz_i) z_{i+1}; the result may reference
// z_{k+1} (the jet order grows by one). D_x distributes through sums and
// negation on the AST, so linearity holds structurally, not just in value.
inline Expression total_derivative_x(const Expression& e, int k = -1) {
    const NodePtr& n = e.node();
    if (n->kind == Node::Kind::Binary && (n->op == BinaryOp::Add || n->op == BinaryOp::Sub))
        return Expression(make_binary(n->op, total_derivative_x(Expression(n->lhs), k).node(),
                                      total_derivative_x(Expression(n->rhs), k).node()));
    if (n->kind == Node::Kind::Unary && n->fn == UnaryFn::Neg)
        return -total_derivative_x(Expression(n->lhs), k);
    if (k < 0) k = e.max_jet_order();
    Expression r = e.diff("x");
    for (int i = 0; i <= k; ++i) {
        Expression di = e.diff("z" + std::to_string(i));
        if (di.is_literal_zero()) continue;
        r = r + di * Expression::jet(i + 1);
    }
    return r;
}

// D_t e = de/dt + sum_i (de/dz_i) D_x^i F  on solutions of z_{0,t} = F.
inline Expression total_derivative_t(const Expression& e, const Expression& F) {
    const NodePtr& n = e.node();
    if (n->kind == Node::Kind::Binary && (n->op == BinaryOp::Add || n->op == BinaryOp::Sub))
        return Expression(make_binary(n->op, total_derivative_t(Expression(n->lhs), F).node(),
                                      total_derivative_t(Expression(n->rhs), F).node()));
    if (n->kind == Node::Kind::Unary && n->fn == UnaryFn::Neg)
        return -total_derivative_t(Expression(n->lhs), F);
    Expression r = e.diff("t");
    const int m = e.max_jet_order();
    Expression dxi_f = F;  // D_x^i F
    for (int i = 0; i <= m; ++i) {
        Expression di = e.diff("z" + std::to_string(i));
        if (!di.is_literal_zero()) r = r + di * dxi_f;
        if (i < m) dxi_f = total_derivative_x(dxi_f);
    }
    return r;
}

// ---------------------------------------------------------------------------
// parser
//
// expr   := term (('+'|'-') term)*
// term   := unary (('*'|'/') unary)*
// unary  := '-' unary | power
// power  := atom ('^' unary)?          right-associative
// atom   := number | ident | func '(' expr ')' | '(' expr ')'
//
// Precedence: ^  >  unary -  >  * /  >  + -

namespace detail {

struct Token {
    enum class Type { Number, Ident, Op, LParen, RParen, End } type;
    std::string text;
    double value = 0.0;
    int line = 1, column = 1;
};

class Lexer {
  public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        skip_ws();
        Token tok;
        tok.line = line_;
        tok.column = col_;
        if (pos_ >= src_.size()) {
            tok.type = Token::Type::End;
            return tok;
        }
        const char c = src_[pos_];
        if (std::isdigit((unsigned char)c) || c == '.') {
            std::size_t start = pos_;
            while (pos_ < src_.size() && (std::isdigit((unsigned char)src_[pos_]) || src_[pos_] == '.')) advance();
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                std::size_t mark = pos_;
                advance();
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
                if (pos_ < src_.size() && std::isdigit((unsigned char)src_[pos_])) {
                    while (pos_ < src_.size() && std::isdigit((unsigned char)src_[pos_])) advance();
                } else {
                    pos_ = mark;  // bare 'e' belongs to the next token
                }
            }
            tok.type = Token::Type::Number;
            tok.text = src_.substr(start, pos_ - start);
            try {
                std::size_t used = 0;
                tok.value = std::stod(tok.text, &used);
                if (used != tok.text.size()) throw std::invalid_argument(tok.text);
            } catch (const std::exception&) {
                throw ParseError("malformed number '" + tok.text + "'", tok.line, tok.column);
            }
            return tok;
        }
        if (std::isalpha((unsigned char)c) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum((unsigned char)src_[pos_]) || src_[pos_] == '_'))
                advance();
            tok.type = Token::Type::Ident;
            tok.text = src_.substr(start, pos_ - start);
            return tok;
        }
        if (c == '(') {
            advance();
            tok.type = Token::Type::LParen;
            tok.text = "(";
            return tok;
        }
        if (c == ')') {
            advance();
            tok.type = Token::Type::RParen;
            tok.text = ")";
            return tok;
        }
        if (c == '+' || c == '-' || c == '*' || c == '/' || c == '^') {
            advance();
            tok.type = Token::Type::Op;
            tok.text = std::string(1, c);
            return tok;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
    }

  private:
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace((unsigned char)src_[pos_])) advance();
    }

    const std::string& src_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;
};

inline const std::map<std::string, UnaryFn>& function_table() {
    static const std::map<std::string, UnaryFn> table = {
        {"sin", UnaryFn::Sin},   {"cos", UnaryFn::Cos},   {"tan", UnaryFn::Tan},
        {"sinh", UnaryFn::Sinh}, {"cosh", UnaryFn::Cosh}, {"tanh", UnaryFn::Tanh},
        {"exp", UnaryFn::Exp},   {"log", UnaryFn::Log},   {"sqrt", UnaryFn::Sqrt},
        {"atan", UnaryFn::Atan},
    };
    return table;
}

class Parser {
  public:
    Parser(const std::string& src, int max_order, const std::set<std::string>& constants)
        : lexer_(src), max_order_(max_order), constants_(constants) {
        cur_ = lexer_.next();
    }

    NodePtr parse() {
        NodePtr e = parse_expr();
        if (cur_.type != Token::Type::End)
            throw ParseError("unexpected trailing input '" + cur_.text + "'", cur_.line, cur_.column);
        return e;
    }

  private:
    void bump() { cur_ = lexer_.next(); }

    bool accept_op(const char* op) {
        if (cur_.type == Token::Type::Op && cur_.text == op) {
            bump();
            return true;
        }
        return false;
    }

    NodePtr parse_expr() {
        NodePtr e = parse_term();
        for (;;) {
            if (accept_op("+"))
                e = make_binary(BinaryOp::Add, e, parse_term());
            else if (accept_op("-"))
                e = make_binary(BinaryOp::Sub, e, parse_term());
            else
                return e;
        }
    }

    NodePtr parse_term() {
        NodePtr e = parse_unary();
        for (;;) {
            if (accept_op("*"))
                e = make_binary(BinaryOp::Mul, e, parse_unary());
            else if (accept_op("/"))
                e = make_binary(BinaryOp::Div, e, parse_unary());
            else
                return e;
        }
    }

    NodePtr parse_unary() {
        if (accept_op("-")) return make_unary(UnaryFn::Neg, parse_unary());
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        if (accept_op("^")) return make_pow(base, parse_unary());
        return base;
    }

    NodePtr parse_atom() {
        const Token tok = cur_;
        switch (tok.type) {
            case Token::Type::Number:
                bump();
                return make_number(tok.value);
            case Token::Type::LParen: {
                bump();
                NodePtr e = parse_expr();
                expect_rparen(tok);
                return e;
            }
            case Token::Type::Ident: {
                bump();
                if (cur_.type == Token::Type::LParen) {
                    auto it = function_table().find(tok.text);
                    if (it == function_table().end())
                        throw ParseError("unknown function '" + tok.text + "'", tok.line, tok.column);
                    const Token open = cur_;
                    bump();
                    NodePtr arg = parse_expr();
                    expect_rparen(open);
                    return make_unary(it->second, arg);
                }
                return resolve_symbol(tok);
            }
            default:
                throw ParseError("expected a number, identifier or '('", tok.line, tok.column);
        }
    }

    void expect_rparen(const Token& open) {
        if (cur_.type != Token::Type::RParen)
            throw ParseError("missing ')' for '(' ", open.line, open.column);
        bump();
    }

    NodePtr resolve_symbol(const Token& tok) {
        const std::string& name = tok.text;
        if (name == "u") return make_symbol("z0");
        if (name == "x" || name == "t" || name == "eta" || name == "beta") return make_symbol(name);
        if (name.size() >= 2 && name[0] == 'z') {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                digits = digits && std::isdigit((unsigned char)name[i]);
            if (digits) {
                const int idx = std::stoi(name.substr(1));
                if (idx > max_order_)
                    throw ParseError("jet index out of range: " + name + " exceeds max order " +
                                         std::to_string(max_order_),
                                     tok.line, tok.column);
                return make_symbol(name);
            }
        }
        if (constants_.count(name)) return make_symbol(name);
        throw ParseError("unknown identifier '" + name + "'", tok.line, tok.column);
    }

    Lexer lexer_;
    Token cur_;
    int max_order_;
    const std::set<std::string>& constants_;
};

}  // namespace detail

inline Expression parse(const std::string& source, int max_order,
                        const std::set<std::string>& constants = {}) {
    if (max_order < 0) throw std::invalid_argument("parse: max_order must be >= 0");
    detail::Parser p(source, max_order, constants);
    return Expression(p.parse());
}

}  // namespace pss::expr
