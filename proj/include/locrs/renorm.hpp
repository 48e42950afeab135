#ifndef LOCRS_RENORM_HPP
#define LOCRS_RENORM_HPP

// Preparation maps, elementary differentials and counter-terms of the
// renormalised equation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "locrs/algebra.hpp"
#include "locrs/expr.hpp"
#include "locrs/lincomb.hpp"
#include "locrs/rules.hpp"
#include "locrs/symbolic.hpp"

namespace locrs {

// ---------------------------------------------------------------------------
// Coefficients: polynomials in named symbols such as c(x)

class SymbolPoly {
public:
  using Monomial = std::vector<std::string>; ///< sorted multiset of symbols

  SymbolPoly() = default;
  SymbolPoly(Rational c) { add({}, c); }                         // NOLINT(implicit)
  SymbolPoly(std::int64_t c) : SymbolPoly(Rational(c)) {}         // NOLINT(implicit)
  SymbolPoly(int c) : SymbolPoly(Rational(c)) {}                  // NOLINT(implicit)

  static SymbolPoly symbol(const std::string& name) {
    SymbolPoly p;
    p.add({name}, Rational(1));
    return p;
  }

  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty()); }
  Rational constant() const {
    auto it = terms_.find({});
    return it == terms_.end() ? Rational(0) : it->second;
  }
  const std::map<Monomial, Rational>& terms() const { return terms_; }

  friend SymbolPoly operator+(SymbolPoly a, const SymbolPoly& b) {
    for (const auto& [m, c] : b.terms_) a.add(m, c);
    return a;
  }
  friend SymbolPoly operator-(SymbolPoly a, const SymbolPoly& b) {
    for (const auto& [m, c] : b.terms_) a.add(m, -c);
    return a;
  }
  SymbolPoly operator-() const { return SymbolPoly() - *this; }
  friend SymbolPoly operator*(const SymbolPoly& a, const SymbolPoly& b) {
    SymbolPoly r;
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) {
        Monomial m = ma;
        m.insert(m.end(), mb.begin(), mb.end());
        std::sort(m.begin(), m.end());
        r.add(m, ca * cb);
      }
    return r;
  }
  SymbolPoly& operator+=(const SymbolPoly& o) { return *this = *this + o; }
  friend bool operator==(const SymbolPoly& a, const SymbolPoly& b) { return a.terms_ == b.terms_; }
  std::string str() const;

  /// Value once every symbol is given a number.
  double evaluate(const std::map<std::string, double>& values) const {
    double s = 0;
    for (const auto& [m, c] : terms_) {
      double p = c.to_double();
      for (const auto& name : m) {
        auto it = values.find(name);
        if (it == values.end()) throw std::invalid_argument("SymbolPoly: no value for " + name);
        p *= it->second;
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

  std::map<Monomial, Rational> terms_;
};

inline std::string to_latex(const SymbolPoly& p) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    Rational a = c < Rational(0) ? -c : c;
    std::string body;
    for (std::size_t i = 0; i < m.size();) {
      std::size_t j = i;
      while (j < m.size() && m[j] == m[i]) ++j;
      if (!body.empty()) body += " ";
      body += j - i == 1 ? m[i] : m[i] + "^{" + std::to_string(j - i) + "}";
      i = j;
    }
    std::string coef = (a == Rational(1) && !body.empty()) ? ""
                       : a.is_integer()                     ? a.str()
                                                            : "\\frac{" + std::to_string(a.num()) + "}{" + std::to_string(a.den()) + "}";
    std::string term = coef.empty() ? body : body.empty() ? coef : coef + " " + body;
    out += first ? (c < Rational(0) ? "-" : "") + term : (c < Rational(0) ? " - " : " + ") + term;
    first = false;
  }
  return out;
}

inline std::string SymbolPoly::str() const { return to_latex(*this); }
inline std::string to_string(const SymbolPoly& p) { return to_latex(p); }
inline std::ostream& operator<<(std::ostream& os, const SymbolPoly& p) { return os << to_latex(p); }

// ---------------------------------------------------------------------------
// Characters depending on the base point

/// One value l(x, tau): a constant, a named symbol, a closed-form
/// expression in (x0, x1) or an arbitrary callable.
struct CharValue {
  enum class Kind { Constant, Symbol, Expression, Function };
  Kind kind = Kind::Constant;
  Rational constant{0};
  std::string name;
  std::optional<Expr> expr;
  std::function<double(double, double)> fn;

  static CharValue of(Rational c) { return {Kind::Constant, c, {}, {}, {}}; }
  static CharValue symbol(std::string n) { return {Kind::Symbol, {}, std::move(n), {}, {}}; }
  static CharValue expression(const std::string& text) { return {Kind::Expression, {}, text, Expr::parse(text), {}}; }
  static CharValue function(std::string n, std::function<double(double, double)> f) {
    return {Kind::Function, {}, std::move(n), {}, std::move(f)};
  }

  /// Numbers and rational strings are constants, strings that parse as
  /// expressions in x0, x1 are expressions, anything else is a symbol.
  static CharValue from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) return of(Rational(j.get<std::int64_t>()));
    if (j.is_number()) return expression(j.dump());
    if (j.is_object() && j.contains("expr")) return expression(j.at("expr").get<std::string>());
    if (j.is_object() && j.contains("symbol")) return symbol(j.at("symbol").get<std::string>());
    if (!j.is_string()) throw std::invalid_argument("character value must be a number, string or object");
    std::string s = j.get<std::string>();
    try {
      return of(Rational::parse(s));
    } catch (const std::exception&) {
    }
    try {
      Expr e = Expr::parse(s);
      auto vars = e.variables();
      if (std::all_of(vars.begin(), vars.end(), [](const std::string& v) { return v == "x0" || v == "x1"; }))
        return {Kind::Expression, {}, s, e, {}};
    } catch (const ExprError&) {
    }
    return symbol(s);
  }

  nlohmann::json to_json() const {
    switch (kind) {
    case Kind::Constant: return constant.str();
    case Kind::Symbol: return nlohmann::json{{"symbol", name}};
    case Kind::Expression: return nlohmann::json{{"expr", name}};
    case Kind::Function: return nlohmann::json{{"function", name}};
    }
    return nullptr;
  }

  SymbolPoly symbolic() const {
    if (kind == Kind::Constant) return SymbolPoly(constant);
    return SymbolPoly::symbol(name);
  }

  double at(double x0, double x1) const {
    switch (kind) {
    case Kind::Constant: return constant.to_double();
    case Kind::Expression: return expr->eval<double>({{"x0", x0}, {"x1", x1}});
    case Kind::Function: return fn(x0, x1);
    case Kind::Symbol: break;
    }
    throw std::invalid_argument("character value '" + name + "' is symbolic and has no numerical value");
  }
};

class Character {
public:
  void set(const DecoratedTree& t, CharValue v) { values_[t] = std::move(v); }
  const std::map<DecoratedTree, CharValue>& values() const { return values_; }
  bool empty() const { return values_.empty(); }

  /// Accepts {"values": [{"tree": ..., "value": ...}, ...]} or a plain
  /// object mapping tree strings to values.
  static Character from_json(const nlohmann::json& j) {
    Character c;
    if (j.is_object() && j.contains("values")) {
      for (const auto& e : j.at("values")) {
        DecoratedTree t = e.at("tree").is_string() ? parse_tree(e.at("tree").get<std::string>()) : tree_from_json(e.at("tree"));
        c.set(t, CharValue::from_json(e.at("value")));
      }
    } else if (j.is_object()) {
      for (const auto& [k, v] : j.items()) c.set(parse_tree(k), CharValue::from_json(v));
    } else {
      throw std::invalid_argument("character file must hold a JSON object");
    }
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [t, v] : values_) arr.push_back({{"tree", to_string(t)}, {"value", v.to_json()}});
    return {{"values", arr}};
  }

  /// Support must lie in B-: at least one noise and non-positive degree.
  void validate(const DegreeAssignment& d) const {
    for (const auto& [t, v] : values_)
      if (t.noise_count() < 1 || degree(t, d) > Rational(0))
        throw std::invalid_argument("character support outside B-: " + to_string(t));
  }

  PointCharacter<SymbolPoly> symbolic() const {
    PointCharacter<SymbolPoly> out;
    for (const auto& [t, v] : values_) out.set(t, v.symbolic());
    return out;
  }

  PointCharacter<Rational> exact() const {
    PointCharacter<Rational> out;
    for (const auto& [t, v] : values_) {
      if (v.kind != CharValue::Kind::Constant) throw std::invalid_argument("character is not constant on " + to_string(t));
      out.set(t, v.constant);
    }
    return out;
  }

  PointCharacter<double> at(double x0, double x1) const {
    PointCharacter<double> out;
    for (const auto& [t, v] : values_) out.set(t, v.at(x0, x1));
    return out;
  }

private:
  std::map<DecoratedTree, CharValue> values_;
};

// ---------------------------------------------------------------------------
// Preparation maps at one base point

template <class C>
class PreparationMap {
public:
  enum class Provenance { Identity, Character, Custom };
  using Action = std::function<LinComb<C>(const DecoratedTree&)>;

  static PreparationMap identity(const HopfStructure& h) { return PreparationMap(h, Provenance::Identity); }

  /// R_l = (l (x) Id) delta_r.
  static PreparationMap from_character(const HopfStructure& h, PointCharacter<C> l) {
    for (const auto& [t, v] : l.values())
      if (t.noise_count() < 1 || h.degree(t) > Rational(0))
        throw std::invalid_argument("from_character: support outside B-: " + to_string(t));
    PreparationMap r(h, Provenance::Character);
    r.ell_ = std::move(l);
    return r;
  }

  /// Arbitrary action on basis trees; the dual searches the given candidates.
  static PreparationMap custom(const HopfStructure& h, Action a, std::vector<DecoratedTree> candidates) {
    PreparationMap r(h, Provenance::Custom);
    r.action_ = std::move(a);
    r.candidates_ = std::move(candidates);
    return r;
  }

  Provenance provenance() const { return prov_; }
  const PointCharacter<C>& character() const { return ell_; }

  const LinComb<C>& apply(const DecoratedTree& t) const {
    if (auto it = cache_.find(t); it != cache_.end()) return it->second;
    LinComb<C> out;
    switch (prov_) {
    case Provenance::Identity: out.add(t, C(1)); break;
    case Provenance::Character: out = char_apply_tensor(ell_, h_->delta_r(t)); break;
    case Provenance::Custom: out = action_(t); break;
    }
    return cache_.emplace(t, std::move(out)).first->second;
  }

  LinComb<C> apply(const LinComb<C>& v) const {
    LinComb<C> out;
    for (const auto& [t, c] : v) out.add(apply(t), c);
    return out;
  }

  /// R* in the pairing <tau, sigma> = S(tau) delta: sum over rho of
  /// <R rho, tau> / S(rho) rho, with rho ranging over the candidates.
  LinComb<C> dual(const DecoratedTree& tau, const std::vector<DecoratedTree>& candidates) const {
    LinComb<C> out;
    const Rational s_tau(static_cast<std::int64_t>(symmetry_factor(tau)));
    for (const auto& rho : candidates) {
      C c = apply(rho).coeff(tau);
      if (is_zero_coeff(c)) continue;
      out.add(rho, c * coeff_cast<C>(s_tau / Rational(static_cast<std::int64_t>(symmetry_factor(rho)))));
    }
    return out;
  }

  /// R* with candidates found structurally: for R_l, every rho with
  /// rho/sigma = tau is tau's root data grafted onto some sigma in supp l.
  /// Truncates the dual to trees with at most n nodes (0 keeps everything).
  void set_node_cap(std::size_t n) {
    node_cap_ = n;
    dual_cache_.clear();
  }
  std::size_t node_cap() const { return node_cap_; }
  bool within_cap(const DecoratedTree& t) const { return node_cap_ == 0 || t.node_count() <= node_cap_; }

  const LinComb<C>& dual(const DecoratedTree& tau) const {
    if (auto it = dual_cache_.find(tau); it != dual_cache_.end()) return it->second;
    return dual_cache_.emplace(tau, structural_dual(tau)).first->second;
  }

  LinComb<C> dual(const LinComb<C>& v) const {
    LinComb<C> out;
    for (const auto& [t, c] : v) out.add(dual(t), c);
    return out;
  }

private:
  PreparationMap(const HopfStructure& h, Provenance p) : h_(&h), prov_(p) {}

  LinComb<C> structural_dual(const DecoratedTree& tau) const {
    if (prov_ == Provenance::Identity) return LinComb<C>(tau);
    if (prov_ == Provenance::Custom) {
      std::vector<DecoratedTree> cands = candidates_;
      cands.push_back(tau);
      std::sort(cands.begin(), cands.end());
      cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
      return dual(tau, cands);
    }
    std::set<DecoratedTree> cands{tau};
    if (tau.root().noise == 0)
      for (const auto& [sigma, v] : ell_.values())
        for (const auto& [rho, c] : graft(tau, sigma))
          if (within_cap(rho)) cands.insert(rho);
    return dual(tau, std::vector<DecoratedTree>(cands.begin(), cands.end()));
  }

  const HopfStructure* h_;
  Provenance prov_;
  PointCharacter<C> ell_;
  Action action_;
  std::vector<DecoratedTree> candidates_;
  mutable std::map<DecoratedTree, LinComb<C>> cache_;
  mutable std::map<DecoratedTree, LinComb<C>> dual_cache_;
  std::size_t node_cap_ = 0;
};

namespace detail {

template <class C>
bool nearly_zero(const C& c) {
  if constexpr (std::is_same_v<C, double>)
    return std::abs(c) <= 1e-10;
  else
    return is_zero_coeff(c);
}

template <class C>
bool same(const LinComb<C>& a, const LinComb<C>& b) {
  LinComb<C> d = a - b;
  return std::all_of(d.begin(), d.end(), [](const auto& kv) { return nearly_zero(kv.second); });
}

template <class C>
bool same(const TensorSum<C>& a, TensorSum<C> b) {
  for (const auto& [k, c] : a.terms()) b.add(k.first, k.second, C(0) - c);
  for (const auto& [k, c] : b.terms())
    if (!nearly_zero(c)) return false;
  return true;
}

} // namespace detail

/// A pair (sigma, tau) for which R*(sigma * tau) != sigma * R*(tau).
template <class C>
struct StrongWitness {
  DecoratedTree sigma;
  DecoratedTree tau;
  LinComb<C> lhs;
  LinComb<C> rhs;
};

/// Checks R*(sigma * tau) = sigma * (R* tau) for every pair of trees with
/// sigma of the form X^k prod I_a(sigma_i) and deg(sigma) + deg(tau) < gamma,
/// both sides truncated at the node cap of R.
template <class C>
std::optional<StrongWitness<C>> check_strong(const PreparationMap<C>& R, const std::vector<DecoratedTree>& trees,
                                             const Rational& gamma, const HopfStructure& h) {
  for (const auto& sigma : trees) {
    if (sigma.root().noise != 0) continue;
    for (const auto& tau : trees) {
      if (h.degree(sigma) + h.degree(tau) >= gamma) continue;
      LinComb<C> lhs, rhs;
      for (const auto& [g, c] : graft(sigma, tau))
        if (R.within_cap(g))
          for (const auto& [t, d] : R.dual(g))
            if (R.within_cap(t)) lhs.add(t, coeff_cast<C>(c) * d);
      for (const auto& [t, c] : R.dual(tau))
        for (const auto& [g, d] : graft(sigma, t))
          if (R.within_cap(g)) rhs.add(g, c * coeff_cast<C>(d));
      if (!detail::same(lhs, rhs)) return StrongWitness<C>{sigma, tau, lhs, rhs};
    }
  }
  return std::nullopt;
}

/// First tree on which (R (x) Id) Delta != Delta R, if any.
template <class C>
std::optional<DecoratedTree> check_commutation(const PreparationMap<C>& R, const std::vector<DecoratedTree>& trees,
                                               const HopfStructure& h) {
  for (const auto& t : trees) {
    TensorSum<C> lhs, rhs;
    for (const auto& [k, c] : h.coproduct(t).terms())
      for (const auto& [r, rc] : R.apply(k.first)) lhs.add(r, k.second, rc * coeff_cast<C>(c));
    for (const auto& [r, rc] : R.apply(t))
      for (const auto& [k, c] : h.coproduct(r).terms()) rhs.add(k.first, k.second, rc * coeff_cast<C>(c));
    if (!detail::same(lhs, rhs)) return t;
  }
  return std::nullopt;
}

/// Violations of R tau = tau + sum lambda_i tau_i with deg(tau_i) >= deg(tau)
/// and fewer noises in tau_i, and of R X^k = X^k.
template <class C>
std::vector<std::string> check_analytic(const PreparationMap<C>& R, const std::vector<DecoratedTree>& trees,
                                        const HopfStructure& h) {
  std::vector<std::string> out;
  for (const auto& t : trees) {
    const LinComb<C>& r = R.apply(t);
    if (!detail::nearly_zero(r.coeff(t) - C(1))) out.push_back("coefficient of the tree itself is not 1: " + to_string(t));
    for (const auto& [s, c] : r) {
      if (s == t) continue;
      if (t.is_polynomial()) out.push_back("moves polynomial " + to_string(t));
      if (h.degree(s) < h.degree(t)) out.push_back("lowers degree: " + to_string(t) + " -> " + to_string(s));
      if (s.noise_count() >= t.noise_count())
        out.push_back("keeps noise count: " + to_string(t) + " -> " + to_string(s));
    }
  }
  return out;
}

/// Checks R fixes polynomials and planted trees I_(t,0)(tau) (errors), and
/// reports derivative-planted trees it moves (warnings).
template <class C>
std::vector<Diagnostic> hypothesis_diagnostics(const PreparationMap<C>& R, const std::vector<DecoratedTree>& trees) {
  std::vector<Diagnostic> out;
  for (const auto& t : trees) {
    const LinComb<C>& r = R.apply(t);
    bool fixed = r.size() == 1 && r.coeff(t) == C(1);
    if (fixed) continue;
    if (t.is_polynomial())
      out.push_back({Diagnostic::Level::Error, "moves-polynomial", "R moves " + to_string(t)});
    else if (t.is_planted() && t.children()[0].edge.deriv.is_zero())
      out.push_back({Diagnostic::Level::Error, "moves-planted", "R moves " + to_string(t)});
    else if (t.is_planted())
      out.push_back({Diagnostic::Level::Warning, "moves-derivative-planted", "R moves " + to_string(t)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementary differentials

/// F_i(X^k zeta_l prod I_{a_j}(tau_j)) = d^k D_{a_1}...D_{a_n} F_i^l prod F_{t_j}(tau_j).
class ElementaryDifferential {
public:
  explicit ElementaryDifferential(const EquationSpec& spec) : spec_(&spec) {
    for (int i = 1; i <= spec.k0(); ++i)
      for (int l = 0; l <= spec.n0(); ++l) base_[{i, l}] = SymbolicFunction::from_nonlinearity(spec.nonlinearity(i, l));
  }

  const SymbolicFunction& base(int i, int l) const {
    auto it = base_.find({i, l});
    if (it == base_.end()) throw std::invalid_argument("no nonlinearity F_" + std::to_string(i) + "^" + std::to_string(l));
    return it->second;
  }

  const SymbolicFunction& operator()(int i, const DecoratedTree& t) const {
    auto key = std::make_pair(i, t);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    SymbolicFunction d = base(i, t.root().noise);
    SymbolicFunction rest(1);
    for (const auto& b : t.children()) {
      if (b.edge.sort < 1 || b.edge.sort > spec_->k0()) throw std::invalid_argument("unknown edge sort in " + to_string(t));
      d = d.derivative(VarIndex{b.edge.sort, b.edge.deriv});
      rest = rest * (*this)(b.edge.sort, b.tree);
    }
    SymbolicFunction out = d.shift_derivative(t.root().poly) * rest;
    return cache_.emplace(key, std::move(out)).first->second;
  }

  /// Linear extension to combinations of trees.
  template <class C>
  std::vector<std::pair<C, SymbolicFunction>> apply(int i, const LinComb<C>& v) const {
    std::vector<std::pair<C, SymbolicFunction>> out;
    for (const auto& [t, c] : v) {
      const auto& f = (*this)(i, t);
      if (!f.is_zero()) out.emplace_back(c, f);
    }
    return out;
  }

private:
  const EquationSpec* spec_;
  std::map<std::pair<int, int>, SymbolicFunction> base_;
  mutable std::map<std::pair<int, DecoratedTree>, SymbolicFunction> cache_;
};

// ---------------------------------------------------------------------------
// Counter-terms

class HypothesisError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One summand coefficient(x) F_i(tree) xi_l of the renormalised right-hand side.
struct CounterTerm {
  int component = 1;
  int noise = 0;
  DecoratedTree tree;
  std::uint64_t symmetry = 1;
  SymbolPoly coefficient;
  SymbolicFunction function;
};

/// F_i((R* - Id) zeta_l) for every component i and noise l. Throws
/// HypothesisError when R moves polynomials or planted trees I_(t,0)(tau);
/// softer findings are appended to diags.
inline std::vector<CounterTerm> counter_terms(const EquationSpec& spec, const Basis& basis,
                                              const PreparationMap<SymbolPoly>& R,
                                              std::vector<Diagnostic>* diags = nullptr) {
  auto hyp = hypothesis_diagnostics(R, basis.tree_list());
  for (const auto& d : hyp)
    if (d.level == Diagnostic::Level::Error) throw HypothesisError(d.code + ": " + d.message);
  if (diags) diags->insert(diags->end(), hyp.begin(), hyp.end());

  ElementaryDifferential F(spec);
  std::vector<CounterTerm> out;
  for (int i = 1; i <= spec.k0(); ++i)
    for (int l = 0; l <= spec.n0(); ++l) {
      DecoratedTree z = DecoratedTree::noise(l);
      LinComb<SymbolPoly> v = R.dual(z);
      v.add(z, SymbolPoly(-1));
      for (const auto& [t, c] : v) {
        const auto& f = F(i, t);
        if (f.is_zero()) continue;
        out.push_back({i, l, t, symmetry_factor(t), c, f});
      }
    }
  return out;
}

namespace detail {

inline std::string noise_latex(int l) { return l == 0 ? "" : "\\,\\xi_{" + std::to_string(l) + "}"; }

inline bool single_term(const std::string& s) {
  int depth = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    char c = s[i];
    if (c == '(' || c == '{') ++depth;
    else if (c == ')' || c == '}') --depth;
    else if (depth == 0 && (c == '+' || c == '-') && s[i - 1] == ' ') return false;
  }
  return true;
}

inline std::string wrap(const std::string& s) { return single_term(s) ? s : "\\left(" + s + "\\right)"; }

} // namespace detail

/// (d_0 - L^i) u_i = sum_l F_i^l xi_l + counter-terms, one line per component.
inline std::vector<std::string> renormalized_equation_latex(const EquationSpec& spec, const std::vector<CounterTerm>& terms) {
  std::vector<std::string> lines;
  const int k0 = spec.k0();
  for (int i = 1; i <= k0; ++i) {
    std::string lhs = k0 == 1 ? "\\left(\\partial_{x_0} - L\\right) u"
                              : "\\left(\\partial_{x_0} - L^{" + std::to_string(i) + "}\\right) u_{" + std::to_string(i) + "}";
    std::vector<std::pair<bool, std::string>> parts; // (negative, body)
    for (int l = 1; l <= spec.n0(); ++l) {
      SymbolicFunction f = SymbolicFunction::from_nonlinearity(spec.nonlinearity(i, l));
      if (!f.is_zero()) parts.push_back({false, detail::wrap(to_latex(f, k0)) + detail::noise_latex(l)});
    }
    SymbolicFunction g = SymbolicFunction::from_nonlinearity(spec.nonlinearity(i, 0));
    if (!g.is_zero()) parts.push_back({false, to_latex(g, k0)});
    for (const auto& t : terms) {
      if (t.component != i) continue;
      std::string c = to_latex(t.coefficient);
      bool neg = false;
      if (detail::single_term(c) && c.front() == '-') {
        neg = true;
        c = c.substr(1);
      }
      std::string f = detail::wrap(to_latex(t.function, k0));
      std::string body = c == "1" ? f : detail::wrap(c) + "\\, " + f;
      parts.push_back({neg, body + detail::noise_latex(t.noise)});
    }
    std::string rhs;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      if (j == 0) rhs = (parts[j].first ? "-" : "") + parts[j].second;
      else rhs += (parts[j].first ? " - " : " + ") + parts[j].second;
    }
    lines.push_back(lhs + " = " + (rhs.empty() ? "0" : rhs));
  }
  return lines;
}

inline nlohmann::json counter_terms_json(const EquationSpec& spec, const std::vector<CounterTerm>& terms) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : terms)
    arr.push_back({{"component", t.component},
                   {"noise", t.noise},
                   {"tree", to_string(t.tree)},
                   {"symmetry", t.symmetry},
                   {"coefficient", to_latex(t.coefficient)},
                   {"function", to_latex(t.function, spec.k0())}});
  return {{"equation", renormalized_equation_latex(spec, terms)}, {"counter_terms", arr}};
}

// ---------------------------------------------------------------------------
// BPHZ-type character

/// Character values on a grid of base points, one vector per tree.
using GridCharacter = std::map<DecoratedTree, std::vector<double>>;

/// Returns (Pi^{R_l} tau)(x) on the base-point grid for one noise sample,
/// given the character values built so far.
using ModelEvaluator = std::function<std::vector<double>(const DecoratedTree&, const GridCharacter&)>;

/// l(x, tau) = -E[(Pi^{R_l} tau)(x)], built inductively over B- ordered by
/// noise count then size; the expectation is the empirical mean over samples.
inline GridCharacter bphz_character(std::vector<DecoratedTree> minus, const std::vector<ModelEvaluator>& samples) {
  if (samples.empty()) throw std::invalid_argument("bphz_character: no samples");
  std::sort(minus.begin(), minus.end(), [](const DecoratedTree& a, const DecoratedTree& b) {
    if (a.noise_count() != b.noise_count()) return a.noise_count() < b.noise_count();
    if (a.node_count() != b.node_count()) return a.node_count() < b.node_count();
    return a < b;
  });
  GridCharacter ell;
  for (const auto& tau : minus) {
    std::vector<double> mean;
    for (const auto& eval : samples) {
      std::vector<double> v = eval(tau, ell);
      if (mean.empty()) mean.assign(v.size(), 0.0);
      if (v.size() != mean.size()) throw std::runtime_error("bphz_character: inconsistent grid sizes");
      for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k];
    }
    for (auto& m : mean) m = -m / static_cast<double>(samples.size());
    ell[tau] = std::move(mean);
  }
  return ell;
}

} // namespace locrs

#endif // LOCRS_RENORM_HPP
