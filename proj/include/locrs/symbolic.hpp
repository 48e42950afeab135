#ifndef LOCRS_SYMBOLIC_HPP
#define LOCRS_SYMBOLIC_HPP

// Polynomials over jet variables Z_{(s,k)} and abstract functions of them,
// closed under the derivations D_v and the shift d_e = sum_v Z_{v+e} D_v.

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "locrs/rational.hpp"
#include "locrs/rules.hpp"

namespace locrs {

/// An abstract smooth function name(args) differentiated along derivs.
struct FnAtom {
  std::string name;
  std::vector<VarIndex> args;
  std::vector<VarIndex> derivs; ///< sorted multiset
  friend auto operator<=>(const FnAtom&, const FnAtom&) = default;
  friend bool operator==(const FnAtom&, const FnAtom&) = default;
};

using Atom = std::variant<VarIndex, FnAtom>;
using Monomial = std::map<Atom, int>;

class SymbolicFunction {
public:
  using map_type = std::map<Monomial, Rational>;

  SymbolicFunction() = default;
  SymbolicFunction(Rational c) { // NOLINT(implicit)
    if (!c.is_zero()) terms_[Monomial{}] = c;
  }
  SymbolicFunction(std::int64_t c) : SymbolicFunction(Rational(c)) {} // NOLINT(implicit)

  static SymbolicFunction variable(VarIndex v) {
    SymbolicFunction r;
    r.terms_[Monomial{{Atom{v}, 1}}] = Rational(1);
    return r;
  }
  static SymbolicFunction function(std::string name, std::vector<VarIndex> args) {
    SymbolicFunction r;
    r.terms_[Monomial{{Atom{FnAtom{std::move(name), std::move(args), {}}}, 1}}] = Rational(1);
    return r;
  }
  /// Polynomial with exponents aligned to vars.
  static SymbolicFunction from_polynomial(const Polynomial& p, const std::vector<VarIndex>& vars) {
    SymbolicFunction r;
    for (const auto& [e, c] : p) {
      Monomial m;
      for (std::size_t j = 0; j < vars.size(); ++j)
        if (e[j] > 0) m[Atom{vars[j]}] = e[j];
      r.add(m, c);
    }
    return r;
  }
  /// F_i^l of the equation as a symbolic function.
  static SymbolicFunction from_nonlinearity(const Nonlinearity& n) {
    switch (n.kind) {
    case Nonlinearity::Kind::Zero: return {};
    case Nonlinearity::Kind::Expression:
      if (n.poly) return from_polynomial(*n.poly, n.args);
      return function(n.expr->text(), n.args);
    case Nonlinearity::Kind::Abstract: return function(n.name, n.args);
    }
    return {};
  }

  const map_type& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  friend SymbolicFunction operator+(SymbolicFunction a, const SymbolicFunction& b) {
    for (const auto& [m, c] : b.terms_) a.add(m, c);
    return a;
  }
  friend SymbolicFunction operator-(SymbolicFunction a, const SymbolicFunction& b) {
    for (const auto& [m, c] : b.terms_) a.add(m, -c);
    return a;
  }
  friend SymbolicFunction operator*(const SymbolicFunction& a, const SymbolicFunction& b) {
    SymbolicFunction r;
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) {
        Monomial m = ma;
        for (const auto& [at, e] : mb) m[at] += e;
        r.add(m, ca * cb);
      }
    return r;
  }
  SymbolicFunction& operator+=(const SymbolicFunction& o) { return *this = *this + o; }
  friend bool operator==(const SymbolicFunction& a, const SymbolicFunction& b) { return a.terms_ == b.terms_; }

  /// Partial derivative D_v.
  SymbolicFunction derivative(VarIndex v) const {
    SymbolicFunction r;
    for (const auto& [m, c] : terms_)
      for (const auto& [at, e] : m) {
        Monomial rest = m;
        if (--rest[at] == 0) rest.erase(at);
        if (const auto* var = std::get_if<VarIndex>(&at)) {
          if (*var == v) r.add(rest, c * Rational(e));
        } else {
          const auto& fn = std::get<FnAtom>(at);
          if (std::find(fn.args.begin(), fn.args.end(), v) == fn.args.end()) continue;
          FnAtom d = fn;
          d.derivs.push_back(v);
          std::sort(d.derivs.begin(), d.derivs.end());
          rest[Atom{d}] += 1;
          r.add(rest, c * Rational(e));
        }
      }
    return r;
  }

  /// Every variable the expression depends on, including function arguments.
  std::vector<VarIndex> variables() const {
    std::vector<VarIndex> out;
    for (const auto& [m, c] : terms_)
      for (const auto& [at, e] : m) {
        if (const auto* var = std::get_if<VarIndex>(&at)) out.push_back(*var);
        else
          for (const auto& v : std::get<FnAtom>(at).args) out.push_back(v);
      }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// d^k as the composition of the shifts d_{(1,0)}^{k0} d_{(0,1)}^{k1},
  /// where d_e = sum_v Z_{v+e} D_v.
  SymbolicFunction shift_derivative(MultiIndex k) const {
    SymbolicFunction r = *this;
    auto step = [](const SymbolicFunction& f, MultiIndex e) {
      SymbolicFunction out;
      for (const auto& v : f.variables()) out += variable({v.sort, v.deriv + e}) * f.derivative(v);
      return out;
    };
    for (int i = 0; i < k.k0; ++i) r = step(r, {1, 0});
    for (int i = 0; i < k.k1; ++i) r = step(r, {0, 1});
    return r;
  }

  /// Numerical value when only polynomial variables occur.
  double evaluate(const std::map<VarIndex, double>& values) const {
    double s = 0;
    for (const auto& [m, c] : terms_) {
      double p = c.to_double();
      for (const auto& [at, e] : m) {
        const auto* var = std::get_if<VarIndex>(&at);
        if (!var) throw std::invalid_argument("evaluate: abstract function " + std::get<FnAtom>(at).name);
        auto it = values.find(*var);
        if (it == values.end()) throw std::invalid_argument("evaluate: missing variable value");
        for (int i = 0; i < e; ++i) p *= it->second;
      }
      s += p;
    }
    return s;
  }

private:
  void add(const Monomial& m, const Rational& c) {
    if (c.is_zero()) return;
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      terms_.emplace(m, c);
      return;
    }
    it->second += c;
    if (it->second.is_zero()) terms_.erase(it);
  }

  map_type terms_;
};

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline std::string var_latex(VarIndex v, int k0) {
  std::string u = k0 == 1 ? "u" : "u_{" + std::to_string(v.sort) + "}";
  if (v.deriv.is_zero()) return u;
  std::string d;
  if (v.deriv.k0 == 1) d += "\\partial_{x_0}";
  else if (v.deriv.k0 > 1) d += "\\partial_{x_0}^{" + std::to_string(v.deriv.k0) + "}";
  if (v.deriv.k1 == 1) d += "\\partial_{x_1}";
  else if (v.deriv.k1 > 1) d += "\\partial_{x_1}^{" + std::to_string(v.deriv.k1) + "}";
  return d + " " + u;
}

inline std::string fn_latex(const FnAtom& f, int k0) {
  std::string args;
  for (std::size_t j = 0; j < f.args.size(); ++j) args += (j ? ", " : "") + var_latex(f.args[j], k0);
  if (f.args.size() == 1) {
    std::size_t n = f.derivs.size();
    std::string primes = n == 0 ? "" : n <= 3 ? std::string(n, '\'') : "^{(" + std::to_string(n) + ")}";
    return f.name + primes + "(" + args + ")";
  }
  std::string d;
  for (std::size_t i = 0; i < f.derivs.size();) {
    std::size_t j = i;
    while (j < f.derivs.size() && f.derivs[j] == f.derivs[i]) ++j;
    d += "D_{" + var_latex(f.derivs[i], k0) + "}";
    if (j - i > 1) d += "^{" + std::to_string(j - i) + "}";
    d += " ";
    i = j;
  }
  return d + f.name + "(" + args + ")";
}

} // namespace detail

/// LaTeX rendering; monomial factors with more derivatives come first.
inline std::string to_latex(const SymbolicFunction& f, int k0 = 1) {
  if (f.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : f.terms()) {
    std::vector<std::pair<Atom, int>> atoms(m.begin(), m.end());
    std::stable_sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) {
      auto rank = [](const Atom& at) -> int {
        if (const auto* fn = std::get_if<FnAtom>(&at)) return -static_cast<int>(fn->derivs.size());
        return 1;
      };
      return rank(a.first) < rank(b.first);
    });
    std::string body;
    for (const auto& [at, e] : atoms) {
      std::string s = std::holds_alternative<VarIndex>(at) ? detail::var_latex(std::get<VarIndex>(at), k0)
                                                          : detail::fn_latex(std::get<FnAtom>(at), k0);
      if (!body.empty()) body += " ";
      if (e == 1) body += s;
      else if (std::holds_alternative<VarIndex>(at) ? std::get<VarIndex>(at).deriv.is_zero() : std::get<FnAtom>(at).derivs.empty())
        body += s + "^{" + std::to_string(e) + "}";
      else body += "\\left(" + s + "\\right)^{" + std::to_string(e) + "}";
    }
    Rational a = c < Rational(0) ? -c : c;
    std::string coef = a == Rational(1) && !body.empty() ? "" : a.is_integer() ? a.str() : "\\frac{" + std::to_string(a.num()) + "}{" + std::to_string(a.den()) + "}";
    std::string term = coef.empty() ? body : body.empty() ? coef : coef + " " + body;
    if (first) out += (c < Rational(0) ? "-" : "") + term;
    else out += (c < Rational(0) ? " - " : " + ") + term;
    first = false;
  }
  return out;
}

inline std::string to_string(const SymbolicFunction& f) { return to_latex(f); }
inline std::ostream& operator<<(std::ostream& os, const SymbolicFunction& f) { return os << to_latex(f); }

} // namespace locrs

#endif // LOCRS_SYMBOLIC_HPP
