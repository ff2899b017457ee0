#pragma once

// Arithmetic expression language for charts, Christoffel coefficients and
// vector fields.
//
//   expr     := term (('+' | '-') term)*
//   term     := unary (('*' | '/') unary)*
//   unary    := '-' unary | power
//   power    := primary ('^' unary)?          exponent: integer-valued constant
//   primary  := number | variable | func '(' expr ')' | '(' expr ')'
//   variable := 't' | 'x' digits              x1 .. xN, N = declared dimension
//   func     := sin | cos | exp | tanh | log
//
// Precedence (high to low): '^', unary '-', '*' '/', '+' '-'. Binary + - * /
// associate left; '^' associates right ("x^2^3" is x^8). Whitespace is
// ignored. A leading '-' on a literal is a negation node, never part of the
// literal, so "-x1^2" is -(x1^2).

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bfm/error.hpp"

namespace bfm::expr {

enum class Op { number, variable, neg, add, sub, mul, div, pow, call };
enum class Func { sin, cos, exp, tanh, log };

struct Node;

/// Immutable, shareable expression tree.
class Expr {
 public:
  Expr() = default;
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  const Node& operator*() const { return *node_; }
  const Node* operator->() const { return node_.get(); }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<const Node> node_;
};

struct Node {
  Op op;
  double value = 0.0;  // number
  int var = 0;         // variable: 0 is t, k >= 1 is xk
  int exponent = 0;    // pow
  Func fn = Func::sin;
  Expr a{}, b{};
};

inline const char* func_name(Func f) {
  switch (f) {
    case Func::sin: return "sin";
    case Func::cos: return "cos";
    case Func::exp: return "exp";
    case Func::tanh: return "tanh";
    case Func::log: return "log";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// construction (no simplification)

inline Expr number(double v) { return Expr(std::make_shared<const Node>(Node{Op::number, v})); }
inline Expr variable(int k) {
  Node n{Op::variable};
  n.var = k;
  return Expr(std::make_shared<const Node>(std::move(n)));
}
inline Expr unary(Op op, Expr a) {
  Node n{op};
  n.a = std::move(a);
  return Expr(std::make_shared<const Node>(std::move(n)));
}
inline Expr binary(Op op, Expr a, Expr b) {
  Node n{op};
  n.a = std::move(a);
  n.b = std::move(b);
  return Expr(std::make_shared<const Node>(std::move(n)));
}
inline Expr power(Expr a, int e) {
  Node n{Op::pow};
  n.a = std::move(a);
  n.exponent = e;
  return Expr(std::make_shared<const Node>(std::move(n)));
}
inline Expr call(Func f, Expr a) {
  Node n{Op::call};
  n.fn = f;
  n.a = std::move(a);
  return Expr(std::make_shared<const Node>(std::move(n)));
}

inline bool equal(const Expr& x, const Expr& y) {
  if (x->op != y->op) return false;
  switch (x->op) {
    case Op::number: return x->value == y->value && std::signbit(x->value) == std::signbit(y->value);
    case Op::variable: return x->var == y->var;
    case Op::neg: return equal(x->a, y->a);
    case Op::pow: return x->exponent == y->exponent && equal(x->a, y->a);
    case Op::call: return x->fn == y->fn && equal(x->a, y->a);
    default: return equal(x->a, y->a) && equal(x->b, y->b);
  }
}

inline bool depends_on(const Expr& e, int var) {
  switch (e->op) {
    case Op::number: return false;
    case Op::variable: return e->var == var;
    case Op::neg:
    case Op::pow:
    case Op::call: return depends_on(e->a, var);
    default: return depends_on(e->a, var) || depends_on(e->b, var);
  }
}

/// Largest xk index referenced (0 if none).
inline int max_variable(const Expr& e) {
  switch (e->op) {
    case Op::number: return 0;
    case Op::variable: return e->var;
    case Op::neg:
    case Op::pow:
    case Op::call: return max_variable(e->a);
    default: return std::max(max_variable(e->a), max_variable(e->b));
  }
}

// ---------------------------------------------------------------------------
// printing

inline std::string format_number(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace detail {

inline int precedence(Op op) {
  switch (op) {
    case Op::add:
    case Op::sub: return 1;
    case Op::mul:
    case Op::div: return 2;
    case Op::neg: return 3;
    case Op::pow: return 4;
    default: return 5;
  }
}

inline void print(const Expr& e, std::string& out);

inline void print_child(const Expr& child, bool parens, std::string& out) {
  if (parens) out += '(';
  print(child, out);
  if (parens) out += ')';
}

inline void print(const Expr& e, std::string& out) {
  switch (e->op) {
    case Op::number:
      // Negative literals are not producible by the parser; parenthesize
      // so a hand-built one at least reads back as a negation.
      if (std::signbit(e->value)) {
        out += "(-" + format_number(-e->value) + ")";
      } else {
        out += format_number(e->value);
      }
      return;
    case Op::variable:
      out += e->var == 0 ? std::string("t") : "x" + std::to_string(e->var);
      return;
    case Op::neg:
      out += '-';
      print_child(e->a, precedence(e->a->op) < precedence(Op::neg), out);
      return;
    case Op::pow:
      print_child(e->a, precedence(e->a->op) < 5 || (e->a->op == Op::number && std::signbit(e->a->value)), out);
      out += '^' + std::to_string(e->exponent);
      return;
    case Op::call:
      out += func_name(e->fn);
      out += '(';
      print(e->a, out);
      out += ')';
      return;
    default: {
      const int p = precedence(e->op);
      const char* sym = e->op == Op::add ? " + " : e->op == Op::sub ? " - " : e->op == Op::mul ? " * " : " / ";
      print_child(e->a, precedence(e->a->op) < p, out);
      out += sym;
      print_child(e->b, precedence(e->b->op) <= p && e->b->op != Op::neg, out);
      return;
    }
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// parsing

struct ParseOptions {
  int dimension = 64;   // x1 .. x<dimension> are allowed
  bool allow_t = true;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, ParseOptions opt) : src_(src), opt_(opt) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (pos_ != src_.size()) fail("unexpected character '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(msg, pos_); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const { throw SyntaxError(msg, at); }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= src_.size()) fail(std::string("expected '") + c + "' but reached end of input");
      fail(std::string("expected '") + c + "'");
    }
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = binary(Op::add, lhs, term());
      else if (accept('-'))
        lhs = binary(Op::sub, lhs, term());
      else
        return lhs;
    }
  }

  Expr term() {
    Expr lhs = unary_();
    for (;;) {
      if (accept('*'))
        lhs = binary(Op::mul, lhs, unary_());
      else if (accept('/'))
        lhs = binary(Op::div, lhs, unary_());
      else
        return lhs;
    }
  }

  Expr unary_() {
    if (accept('-')) return unary(Op::neg, unary_());
    return power_();
  }

  Expr power_() {
    Expr base = primary();
    if (!accept('^')) return base;
    skip();
    const std::size_t at = pos_;
    Expr ex = unary_();
    const std::optional<double> v = constant_value(ex);
    if (!v) fail_at("exponent must be a constant", at);
    if (*v != std::floor(*v) || std::abs(*v) > 1e6) fail_at("exponent must be an integer", at);
    return power(base, static_cast<int>(*v));
  }

  Expr primary() {
    skip();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number_();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expr number_() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p;
        pos_ = p;
      }
    }
    const std::string text(src_.substr(start, pos_ - start));
    if (text == ".") fail_at("malformed number", start);
    return number(std::strtod(text.c_str(), nullptr));
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    const std::string name(src_.substr(start, pos_ - start));
    static const std::pair<const char*, Func> funcs[] = {
        {"sin", Func::sin}, {"cos", Func::cos}, {"exp", Func::exp}, {"tanh", Func::tanh}, {"log", Func::log}};
    for (const auto& [fname, f] : funcs) {
      if (name != fname) continue;
      skip();
      if (pos_ >= src_.size() || src_[pos_] != '(') fail(std::string("expected '(' after ") + fname);
      ++pos_;
      Expr arg = expr();
      skip();
      if (pos_ < src_.size() && src_[pos_] == ',') fail(std::string(fname) + " takes exactly one argument");
      expect(')');
      return call(f, arg);
    }
    if (name == "t") {
      if (!opt_.allow_t) fail_at("variable 't' is not allowed here", start);
      return variable(0);
    }
    if (name.size() >= 2 && name[0] == 'x' && name[1] != '0' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos && name.size() <= 7) {
      const int k = std::stoi(name.substr(1));
      if (k > opt_.dimension)
        fail_at("variable " + name + " exceeds declared dimension " + std::to_string(opt_.dimension), start);
      return variable(k);
    }
    fail_at("unknown identifier '" + name + "'", start);
  }

  static std::optional<double> constant_value(const Expr& e) {
    switch (e->op) {
      case Op::number: return e->value;
      case Op::neg: {
        auto v = constant_value(e->a);
        if (v) return -*v;
        return std::nullopt;
      }
      case Op::pow: {
        auto v = constant_value(e->a);
        if (v) return std::pow(*v, e->exponent);
        return std::nullopt;
      }
      default: return std::nullopt;
    }
  }

  std::string_view src_;
  ParseOptions opt_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text, ParseOptions opt = {}) { return detail::Parser(text, opt).parse(); }

// ---------------------------------------------------------------------------
// evaluation

/// Variable assignment: t and x1..xN (x[k-1] is xk).
struct Env {
  std::optional<double> t;
  std::span<const double> x;
};

namespace detail {

struct EvalContext {
  const Env& env;
  std::vector<std::string> path;

  [[noreturn]] void fail(const std::string& msg) const {
    std::string p = "root";
    for (const auto& s : path) {
      p += '/';
      p += s;
    }
    throw EvaluationError(msg, p);
  }
};

inline double eval(const Expr& e, EvalContext& ctx);

inline double eval_child(const Expr& e, const char* tag, EvalContext& ctx) {
  ctx.path.push_back(tag);
  const double v = eval(e, ctx);
  ctx.path.pop_back();
  return v;
}

inline double eval(const Expr& e, EvalContext& ctx) {
  switch (e->op) {
    case Op::number: return e->value;
    case Op::variable:
      if (e->var == 0) {
        if (ctx.env.t) return *ctx.env.t;
        ctx.path.push_back("t");
        ctx.fail("variable t is unassigned");
      }
      if (static_cast<std::size_t>(e->var) <= ctx.env.x.size()) return ctx.env.x[e->var - 1];
      ctx.path.push_back("x" + std::to_string(e->var));
      ctx.fail("variable x" + std::to_string(e->var) + " is unassigned");
    case Op::neg: return -eval_child(e->a, "neg", ctx);
    case Op::add: {
      const double l = eval_child(e->a, "add.lhs", ctx);
      return l + eval_child(e->b, "add.rhs", ctx);
    }
    case Op::sub: {
      const double l = eval_child(e->a, "sub.lhs", ctx);
      return l - eval_child(e->b, "sub.rhs", ctx);
    }
    case Op::mul: {
      const double l = eval_child(e->a, "mul.lhs", ctx);
      return l * eval_child(e->b, "mul.rhs", ctx);
    }
    case Op::div: {
      const double l = eval_child(e->a, "div.lhs", ctx);
      const double r = eval_child(e->b, "div.rhs", ctx);
      if (r == 0.0) {
        ctx.path.push_back("div");
        ctx.fail("division by zero");
      }
      return l / r;
    }
    case Op::pow: {
      const double base = eval_child(e->a, "pow.base", ctx);
      if (base == 0.0 && e->exponent < 0) {
        ctx.path.push_back("pow");
        ctx.fail("zero raised to a negative power");
      }
      return std::pow(base, e->exponent);
    }
    case Op::call: {
      const double x = eval_child(e->a, func_name(e->fn), ctx);
      switch (e->fn) {
        case Func::sin: return std::sin(x);
        case Func::cos: return std::cos(x);
        case Func::exp: return std::exp(x);
        case Func::tanh: return std::tanh(x);
        case Func::log:
          if (!(x > 0.0)) {
            ctx.path.push_back("log");
            ctx.fail("log of a nonpositive value");
          }
          return std::log(x);
      }
    }
  }
  ctx.fail("malformed expression");
}

}  // namespace detail

inline double eval(const Expr& e, const Env& env) {
  detail::EvalContext ctx{env, {}};
  return detail::eval(e, ctx);
}

inline double eval(const Expr& e, std::span<const double> x, std::optional<double> t = std::nullopt) {
  return eval(e, Env{t, x});
}

// ---------------------------------------------------------------------------
// simplifying constructors (0/1 and constant folding only)

inline std::optional<double> as_constant(const Expr& e) {
  if (e->op == Op::number) return e->value;
  if (e->op == Op::neg && e->a->op == Op::number) return -e->a->value;
  return std::nullopt;
}

/// Literal with the sign carried by a negation node, as the parser would produce it.
inline Expr constant(double v) { return std::signbit(v) ? unary(Op::neg, number(-v)) : number(v); }

inline Expr s_neg(const Expr& a) {
  if (auto c = as_constant(a)) return constant(-*c);
  if (a->op == Op::neg) return a->a;
  return unary(Op::neg, a);
}

inline Expr s_add(const Expr& a, const Expr& b) {
  const auto ca = as_constant(a), cb = as_constant(b);
  if (ca && cb) return constant(*ca + *cb);
  if (ca && *ca == 0.0) return b;
  if (cb && *cb == 0.0) return a;
  return binary(Op::add, a, b);
}

inline Expr s_sub(const Expr& a, const Expr& b) {
  const auto ca = as_constant(a), cb = as_constant(b);
  if (ca && cb) return constant(*ca - *cb);
  if (cb && *cb == 0.0) return a;
  if (ca && *ca == 0.0) return s_neg(b);
  return binary(Op::sub, a, b);
}

inline Expr s_mul(const Expr& a, const Expr& b) {
  const auto ca = as_constant(a), cb = as_constant(b);
  if (ca && cb) return constant(*ca * *cb);
  if ((ca && *ca == 0.0) || (cb && *cb == 0.0)) return number(0.0);
  if (ca && *ca == 1.0) return b;
  if (cb && *cb == 1.0) return a;
  if (ca && *ca == -1.0) return s_neg(b);
  if (cb && *cb == -1.0) return s_neg(a);
  return binary(Op::mul, a, b);
}

inline Expr s_div(const Expr& a, const Expr& b) {
  const auto ca = as_constant(a), cb = as_constant(b);
  if (ca && cb && *cb != 0.0) return constant(*ca / *cb);
  if (ca && *ca == 0.0) return number(0.0);
  if (cb && *cb == 1.0) return a;
  return binary(Op::div, a, b);
}

inline Expr s_pow(const Expr& a, int e) {
  if (e == 0) return number(1.0);
  if (e == 1) return a;
  return power(a, e);
}

// ---------------------------------------------------------------------------
// symbolic differentiation

/// d/d(var) of e; var 0 is t, k >= 1 is xk.
inline Expr differentiate(const Expr& e, int var) {
  switch (e->op) {
    case Op::number: return number(0.0);
    case Op::variable: return number(e->var == var ? 1.0 : 0.0);
    case Op::neg: return s_neg(differentiate(e->a, var));
    case Op::add: return s_add(differentiate(e->a, var), differentiate(e->b, var));
    case Op::sub: return s_sub(differentiate(e->a, var), differentiate(e->b, var));
    case Op::mul:
      return s_add(s_mul(differentiate(e->a, var), e->b), s_mul(e->a, differentiate(e->b, var)));
    case Op::div: {
      const Expr num = s_sub(s_mul(differentiate(e->a, var), e->b), s_mul(e->a, differentiate(e->b, var)));
      return s_div(num, s_pow(e->b, 2));
    }
    case Op::pow: {
      const Expr da = differentiate(e->a, var);
      if (auto c = as_constant(da); c && *c == 0.0) return number(0.0);
      return s_mul(s_mul(constant(static_cast<double>(e->exponent)), s_pow(e->a, e->exponent - 1)), da);
    }
    case Op::call: {
      const Expr da = differentiate(e->a, var);
      if (auto c = as_constant(da); c && *c == 0.0) return number(0.0);
      Expr outer;
      switch (e->fn) {
        case Func::sin: outer = call(Func::cos, e->a); break;
        case Func::cos: outer = s_neg(call(Func::sin, e->a)); break;
        case Func::exp: outer = e; break;
        case Func::tanh: outer = s_sub(number(1.0), s_pow(e, 2)); break;
        case Func::log: return s_div(da, e->a);
      }
      return s_mul(outer, da);
    }
  }
  return number(0.0);
}

/// Variable index for a name: "t" -> 0, "xk" -> k.
inline int variable_index(std::string_view name) {
  if (name == "t") return 0;
  if (name.size() >= 2 && name[0] == 'x') return std::stoi(std::string(name.substr(1)));
  throw DomainError("unknown variable '" + std::string(name) + "'");
}

inline Expr differentiate(const Expr& e, std::string_view var) { return differentiate(e, variable_index(var)); }

}  // namespace bfm::expr
