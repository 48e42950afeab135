#ifndef LOCRS_EXPR_HPP
#define LOCRS_EXPR_HPP

// Closed-form scalar expressions used in equation files:
//   expr := term (('+'|'-') term)* ; term := unary (('*'|'/') unary)*
//   unary := '-' unary | power ; power := primary ('^' unary)?
//   primary := number | name | fn '(' expr ')' | '(' expr ')'
// with fn in {sin, cos, exp} and free names such as x1, u, du, pi.

#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "locrs/rational.hpp"

namespace locrs {

class ExprError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Truncated Taylor series c_0 + c_1 h + ... + c_N h^N, c_k = f^(k)/k!.
template <int N>
struct Jet {
  std::array<double, N + 1> c{};

  Jet() = default;
  Jet(double v) { c[0] = v; } // NOLINT(implicit)
  static Jet variable(double v) {
    Jet j(v);
    if constexpr (N >= 1) j.c[1] = 1.0;
    return j;
  }
  /// k-th derivative at the expansion point.
  double derivative(int k) const {
    double f = 1;
    for (int i = 2; i <= k; ++i) f *= i;
    return c[static_cast<std::size_t>(k)] * f;
  }

  friend Jet operator+(const Jet& a, const Jet& b) {
    Jet r;
    for (int i = 0; i <= N; ++i) r.c[i] = a.c[i] + b.c[i];
    return r;
  }
  friend Jet operator-(const Jet& a, const Jet& b) {
    Jet r;
    for (int i = 0; i <= N; ++i) r.c[i] = a.c[i] - b.c[i];
    return r;
  }
  friend Jet operator-(const Jet& a) { return Jet(0.0) - a; }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (int i = 0; i <= N; ++i)
      for (int j = 0; i + j <= N; ++j) r.c[i + j] += a.c[i] * b.c[j];
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    if (b.c[0] == 0.0) throw ExprError("division by zero");
    Jet r;
    for (int k = 0; k <= N; ++k) {
      double s = a.c[k];
      for (int j = 1; j <= k; ++j) s -= b.c[j] * r.c[k - j];
      r.c[k] = s / b.c[0];
    }
    return r;
  }
  friend Jet exp(const Jet& a) {
    Jet r;
    r.c[0] = std::exp(a.c[0]);
    for (int k = 1; k <= N; ++k) {
      double s = 0;
      for (int j = 1; j <= k; ++j) s += j * a.c[j] * r.c[k - j];
      r.c[k] = s / k;
    }
    return r;
  }
  friend std::pair<Jet, Jet> sincos(const Jet& a) {
    Jet s, c;
    s.c[0] = std::sin(a.c[0]);
    c.c[0] = std::cos(a.c[0]);
    for (int k = 1; k <= N; ++k) {
      double ss = 0, cc = 0;
      for (int j = 1; j <= k; ++j) {
        ss += j * a.c[j] * c.c[k - j];
        cc -= j * a.c[j] * s.c[k - j];
      }
      s.c[k] = ss / k;
      c.c[k] = cc / k;
    }
    return {s, c};
  }
  friend Jet sin(const Jet& a) { return sincos(a).first; }
  friend Jet cos(const Jet& a) { return sincos(a).second; }
};

/// Multivariate polynomial with rational coefficients; keys are exponent
/// vectors aligned with a variable list.
using Polynomial = std::map<std::vector<int>, Rational>;

class Expr {
public:
  enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp };

  static Expr parse(const std::string& text);

  Op op() const { return node_->op; }
  const std::string& text() const { return text_; }

  /// Names of the free variables.
  std::set<std::string> variables() const {
    std::set<std::string> out;
    collect(*node_, out);
    return out;
  }

  /// Evaluates with T in {double, Jet<N>}; unknown names throw.
  template <class T>
  T eval(const std::map<std::string, T>& env) const {
    return eval_node<T>(*node_, env);
  }
  double operator()(double x1) const { return eval<double>({{"x1", x1}}); }

  /// Exact polynomial form in the given variables, or throws ExprError when
  /// the expression is not a polynomial with rational coefficients.
  Polynomial to_polynomial(const std::vector<std::string>& vars) const { return poly_node(*node_, vars); }

private:
  struct Node {
    Op op = Op::Const;
    Rational value{0};
    double fvalue = 0;
    bool exact = true;
    std::string name;
    std::vector<std::shared_ptr<const Node>> args;
  };
  using NodePtr = std::shared_ptr<const Node>;

  class Parser;

  static void collect(const Node& n, std::set<std::string>& out) {
    if (n.op == Op::Var) out.insert(n.name);
    for (const auto& a : n.args) collect(*a, out);
  }

  template <class T>
  static T eval_node(const Node& n, const std::map<std::string, T>& env) {
    switch (n.op) {
    case Op::Const: return T(n.fvalue);
    case Op::Var: {
      auto it = env.find(n.name);
      if (it == env.end()) throw ExprError("unbound variable '" + n.name + "'");
      return it->second;
    }
    case Op::Add: return eval_node(*n.args[0], env) + eval_node(*n.args[1], env);
    case Op::Sub: return eval_node(*n.args[0], env) - eval_node(*n.args[1], env);
    case Op::Mul: return eval_node(*n.args[0], env) * eval_node(*n.args[1], env);
    case Op::Div: return eval_node(*n.args[0], env) / eval_node(*n.args[1], env);
    case Op::Neg: return T(0.0) - eval_node(*n.args[0], env);
    case Op::Sin: { using std::sin; return sin(eval_node(*n.args[0], env)); }
    case Op::Cos: { using std::cos; return cos(eval_node(*n.args[0], env)); }
    case Op::Exp: { using std::exp; return exp(eval_node(*n.args[0], env)); }
    case Op::Pow: {
      T base = eval_node(*n.args[0], env);
      const Node& e = *n.args[1];
      if (!constant_node(e)) throw ExprError("exponent must be constant");
      double p = const_value(e);
      if constexpr (std::is_same_v<T, double>) return std::pow(base, p);
      else {
        if (p != std::floor(p) || p < 0) throw ExprError("non-integer exponent in derivative evaluation");
        T r(1.0);
        for (int i = 0; i < static_cast<int>(p); ++i) r = r * base;
        return r;
      }
    }
    }
    throw ExprError("bad expression node");
  }

  static bool constant_node(const Node& n) {
    if (n.op == Op::Var) return false;
    for (const auto& a : n.args)
      if (!constant_node(*a)) return false;
    return true;
  }
  static double const_value(const Node& n) { return eval_node<double>(n, {}); }

  static Polynomial poly_node(const Node& n, const std::vector<std::string>& vars) {
    const std::vector<int> zero(vars.size(), 0);
    auto mul = [](const Polynomial& a, const Polynomial& b) {
      Polynomial r;
      for (const auto& [ea, ca] : a)
        for (const auto& [eb, cb] : b) {
          std::vector<int> e = ea;
          for (std::size_t i = 0; i < e.size(); ++i) e[i] += eb[i];
          r[e] += ca * cb;
        }
      std::erase_if(r, [](const auto& kv) { return kv.second.is_zero(); });
      return r;
    };
    auto add = [](Polynomial a, const Polynomial& b, Rational s) {
      for (const auto& [e, c] : b) a[e] += s * c;
      std::erase_if(a, [](const auto& kv) { return kv.second.is_zero(); });
      return a;
    };
    auto as_const = [&](const Polynomial& p) -> Rational {
      for (const auto& [e, c] : p)
        if (e != zero) throw ExprError("not a polynomial: division by a non-constant");
      return p.empty() ? Rational(0) : p.begin()->second;
    };
    switch (n.op) {
    case Op::Const:
      if (!n.exact) throw ExprError("not a polynomial with rational coefficients");
      return n.value.is_zero() ? Polynomial{} : Polynomial{{zero, n.value}};
    case Op::Var: {
      for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i] == n.name) {
          std::vector<int> e = zero;
          e[i] = 1;
          return {{e, Rational(1)}};
        }
      throw ExprError("not a polynomial in the given variables: '" + n.name + "'");
    }
    case Op::Add: return add(poly_node(*n.args[0], vars), poly_node(*n.args[1], vars), Rational(1));
    case Op::Sub: return add(poly_node(*n.args[0], vars), poly_node(*n.args[1], vars), Rational(-1));
    case Op::Neg: return add({}, poly_node(*n.args[0], vars), Rational(-1));
    case Op::Mul: return mul(poly_node(*n.args[0], vars), poly_node(*n.args[1], vars));
    case Op::Div: {
      Rational d = as_const(poly_node(*n.args[1], vars));
      if (d.is_zero()) throw ExprError("division by zero");
      return add({}, poly_node(*n.args[0], vars), Rational(1) / d);
    }
    case Op::Pow: {
      Rational p = as_const(poly_node(*n.args[1], vars));
      if (!p.is_integer() || p < Rational(0)) throw ExprError("not a polynomial: non-natural exponent");
      Polynomial base = poly_node(*n.args[0], vars), r{{zero, Rational(1)}};
      for (std::int64_t i = 0; i < p.num(); ++i) r = mul(r, base);
      return r;
    }
    default: throw ExprError("not a polynomial: transcendental function");
    }
  }

  NodePtr node_;
  std::string text_;
};

class Expr::Parser {
public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse_all() {
    NodePtr n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return n;
  }

private:
  [[noreturn]] void fail(const std::string& m) const {
    throw ExprError("expression error: " + m + " at position " + std::to_string(pos_) + " in '" + s_ + "'");
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  static NodePtr make(Op op, std::vector<NodePtr> args) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->args = std::move(args);
    return n;
  }
  NodePtr expr() {
    NodePtr l = term();
    while (true) {
      if (eat('+')) l = make(Op::Add, {l, term()});
      else if (eat('-')) l = make(Op::Sub, {l, term()});
      else return l;
    }
  }
  NodePtr term() {
    NodePtr l = unary();
    while (true) {
      if (eat('*')) l = make(Op::Mul, {l, unary()});
      else if (eat('/')) l = make(Op::Div, {l, unary()});
      else return l;
    }
  }
  NodePtr unary() {
    if (eat('-')) return make(Op::Neg, {unary()});
    if (eat('+')) return unary();
    return power();
  }
  NodePtr power() {
    NodePtr b = primary();
    if (eat('^')) return make(Op::Pow, {b, unary()});
    return b;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = expr();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
      bool sci = false;
      if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
        std::size_t save = pos_++;
        if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
        if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
          sci = true;
          while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        } else {
          pos_ = save;
        }
      }
      std::string lit = s_.substr(start, pos_ - start);
      auto n = std::make_shared<Node>();
      n->op = Op::Const;
      n->fvalue = std::stod(lit);
      if (sci) {
        n->exact = false;
      } else {
        try {
          n->value = Rational::parse(lit);
        } catch (const std::exception&) {
          n->exact = false;
        }
      }
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      std::string name = s_.substr(start, pos_ - start);
      if (name == "sin" || name == "cos" || name == "exp") {
        if (!eat('(')) fail("expected '(' after " + name);
        NodePtr a = expr();
        if (!eat(')')) fail("expected ')'");
        return make(name == "sin" ? Op::Sin : name == "cos" ? Op::Cos : Op::Exp, {a});
      }
      auto n = std::make_shared<Node>();
      if (name == "pi") {
        n->op = Op::Const;
        n->fvalue = std::numbers::pi;
        n->exact = false;
      } else {
        n->op = Op::Var;
        n->name = name;
      }
      return n;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

inline Expr Expr::parse(const std::string& text) {
  Expr e;
  e.node_ = Parser(text).parse_all();
  e.text_ = text;
  return e;
}

} // namespace locrs

#endif // LOCRS_EXPR_HPP
