#ifndef LOCRS_RULES_HPP
#define LOCRS_RULES_HPP

// Equation files and the tree basis they generate.
//
// A system of k0 scalar equations
//   (d_0 - a_i(x1) d_1^2 - b_i(x1) d_1) u_i = sum_l f_{i,l}(u) xi_l + g_i(u, d_1 u)
// generates right-hand-side trees per component: a node zeta_l (l >= 1)
// carries f_{i,l}, a node zeta_0 carries g_i, and children are planted
// trees I_{(s,k)}(tau) for every variable u_s (k = 0) or d_1 u_s (k = (0,1))
// the node's function depends on.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "locrs/expr.hpp"
#include "locrs/rational.hpp"
#include "locrs/trees.hpp"

namespace locrs {

class SpecError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Index of a solution jet variable: Z_{(sort, deriv)}.
struct VarIndex {
  int sort = 1;
  MultiIndex deriv{};
  friend constexpr auto operator<=>(const VarIndex&, const VarIndex&) = default;
};

/// One of f_{i,l} or g_i: zero, a closed-form expression, or an abstract
/// smooth function of declared arguments.
struct Nonlinearity {
  enum class Kind { Zero, Expression, Abstract };
  Kind kind = Kind::Zero;
  std::optional<Expr> expr;
  std::string name;           ///< display name for abstract functions
  std::vector<VarIndex> args; ///< variables the function depends on
  /// Exact polynomial form in args, when the expression is one.
  std::optional<Polynomial> poly;
  /// Cap on the number of derivative-labeled children (d_1 u arguments).
  int du_order = -1;

  bool is_zero() const { return kind == Kind::Zero; }
  bool depends_on(VarIndex v) const { return std::find(args.begin(), args.end(), v) != args.end(); }

  /// Whether D_{v_1}...D_{v_n} of this function can be nonzero, where
  /// counts[j] is how often args[j] appears among the v's.
  bool admits(const std::vector<int>& counts) const {
    if (kind == Kind::Zero) return std::all_of(counts.begin(), counts.end(), [](int c) { return c == 0; });
    if (du_order >= 0) {
      int du = 0;
      for (std::size_t j = 0; j < args.size(); ++j)
        if (!args[j].deriv.is_zero()) du += counts[j];
      if (du > du_order) return false;
    }
    if (!poly) return true;
    for (const auto& [e, c] : *poly) {
      bool ok = true;
      for (std::size_t j = 0; j < counts.size(); ++j) ok = ok && e[j] >= counts[j];
      if (ok) return true;
    }
    return false;
  }
};

struct Component {
  Expr a = Expr::parse("1");
  Expr b = Expr::parse("0");
  std::vector<Nonlinearity> f; ///< f[l-1] multiplies xi_l
  Nonlinearity g;
};

struct EquationSpec {
  std::string name = "unnamed";
  std::vector<Component> components;
  std::vector<Rational> alpha; ///< raw noise regularities alpha_l, l = 1..n0
  Rational kappa{0};
  Rational gamma{1, 10};
  int max_nodes = 8;

  int k0() const { return static_cast<int>(components.size()); }
  int n0() const { return static_cast<int>(alpha.size()); }

  /// F_i^l: l = 0 is g_i.
  const Nonlinearity& nonlinearity(int i, int l) const {
    const Component& c = components.at(static_cast<std::size_t>(i - 1));
    return l == 0 ? c.g : c.f.at(static_cast<std::size_t>(l - 1));
  }

  /// alpha_l - kappa for every noise, alpha_0 = 0, beta = 2.
  DegreeAssignment degrees() const {
    DegreeAssignment d;
    for (const auto& a : alpha) d.noise_degrees.push_back(a - kappa);
    return d;
  }

  /// Variable name for Z_v as used in expressions: u, du (scalar) or u2, du2.
  std::string var_name(VarIndex v) const {
    std::string base = v.deriv.is_zero() ? "u" : "du";
    return k0() == 1 ? base : base + std::to_string(v.sort);
  }
};

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline Rational json_rational(const nlohmann::json& j, const std::string& what) {
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (j.is_string()) {
    try {
      return Rational::parse(j.get<std::string>());
    } catch (const std::exception&) {
    }
  }
  throw SpecError(what + ": expected an integer or a rational string such as \"-3/2\"");
}

inline Nonlinearity load_nonlinearity(const nlohmann::json& j, const EquationSpec& spec, bool is_g,
                                      const std::string& default_name) {
  Nonlinearity n;
  if (j.is_null()) return n;
  std::string text;
  bool depends_on_du = false;
  int du_order = -1;
  if (j.is_string()) {
    text = j.get<std::string>();
  } else if (j.is_object()) {
    text = j.value("expr", std::string("abstract"));
    depends_on_du = j.value("depends_on_du", false);
    du_order = j.value("du_order", -1);
    n.name = j.value("name", default_name);
  } else {
    throw SpecError("nonlinearity must be a string or an object");
  }
  if (n.name.empty()) n.name = default_name;
  if (!is_g && depends_on_du) throw SpecError("f may depend on u only");

  std::vector<VarIndex> all;
  for (int s = 1; s <= spec.k0(); ++s) all.push_back({s, {0, 0}});
  if (is_g)
    for (int s = 1; s <= spec.k0(); ++s) all.push_back({s, {0, 1}});

  if (text == "abstract") {
    n.kind = Nonlinearity::Kind::Abstract;
    for (const auto& v : all)
      if (v.deriv.is_zero() || depends_on_du) n.args.push_back(v);
    n.du_order = depends_on_du ? du_order : 0;
    return n;
  }
  try {
    n.expr = Expr::parse(text);
  } catch (const ExprError& e) {
    throw SpecError(e.what());
  }
  std::set<std::string> vars = n.expr->variables();
  if (vars.count("x1") || vars.count("x0")) throw SpecError("nonlinearities may not depend on x: '" + text + "'");
  std::vector<std::string> names;
  for (const auto& v : all)
    if (vars.count(spec.var_name(v))) {
      n.args.push_back(v);
      names.push_back(spec.var_name(v));
      vars.erase(spec.var_name(v));
    }
  if (!vars.empty()) throw SpecError("unknown variable '" + *vars.begin() + "' in '" + text + "'");
  try {
    Polynomial p = n.expr->to_polynomial(names);
    if (p.empty()) return Nonlinearity{};
    n.poly = std::move(p);
  } catch (const ExprError&) {
  }
  n.kind = Nonlinearity::Kind::Expression;
  n.du_order = du_order;
  return n;
}

} // namespace detail

/// Parses an equation file. Fields:
///   components: [{a, b, f: {"l": expr | "abstract"}, g: expr | {expr, depends_on_du, du_order, name}}]
///   noises: [{alpha}], kappa, gamma, max_nodes, name
inline EquationSpec load_spec(const nlohmann::json& j) {
  EquationSpec spec;
  try {
    spec.name = j.value("name", std::string("unnamed"));
    if (j.contains("noises"))
      for (const auto& n : j.at("noises")) spec.alpha.push_back(detail::json_rational(n.at("alpha"), "noise alpha"));
    if (j.contains("kappa")) spec.kappa = detail::json_rational(j.at("kappa"), "kappa");
    if (j.contains("gamma")) spec.gamma = detail::json_rational(j.at("gamma"), "gamma");
    spec.max_nodes = j.value("max_nodes", 8);
    const auto& comps = j.at("components");
    if (!comps.is_array() || comps.empty()) throw SpecError("components must be a non-empty array");
    spec.components.resize(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const auto& c = comps[i];
      Component& out = spec.components[i];
      try {
        out.a = Expr::parse(c.value("a", std::string("1")));
        out.b = Expr::parse(c.value("b", std::string("0")));
      } catch (const ExprError& e) {
        throw SpecError(e.what());
      }
    }
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const auto& c = comps[i];
      Component& out = spec.components[i];
      std::string suffix = comps.size() == 1 ? "" : "_" + std::to_string(i + 1);
      out.f.resize(spec.alpha.size());
      if (c.contains("f")) {
        for (const auto& [key, val] : c.at("f").items()) {
          int l = std::stoi(key);
          if (l < 1 || l > spec.n0()) throw SpecError("f refers to unknown noise " + key);
          std::string nm = spec.n0() == 1 ? "f" + suffix : "f" + suffix + "^{" + key + "}";
          out.f[static_cast<std::size_t>(l - 1)] = detail::load_nonlinearity(val, spec, false, nm);
        }
      }
      if (c.contains("g")) out.g = detail::load_nonlinearity(c.at("g"), spec, true, "g" + suffix);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed equation file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SpecError(std::string("malformed equation file: ") + e.what());
  }
  return spec;
}

inline EquationSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open equation file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return load_spec(j);
}

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
  enum class Level { Warning, Error };
  Level level;
  std::string code;
  std::string message;
};

inline bool has_errors(const std::vector<Diagnostic>& ds) {
  return std::any_of(ds.begin(), ds.end(), [](const Diagnostic& d) { return d.level == Diagnostic::Level::Error; });
}

/// Node types for the subcriticality graph: (sort, noise index) pairs.
struct NodeType {
  int sort;
  int noise;
};

inline std::vector<NodeType> node_types(const EquationSpec& spec) {
  std::vector<NodeType> out;
  for (int s = 1; s <= spec.k0(); ++s)
    for (int l = 0; l <= spec.n0(); ++l)
      if (!spec.nonlinearity(s, l).is_zero()) out.push_back({s, l});
  return out;
}

inline std::vector<Diagnostic> validate_spec(const EquationSpec& spec) {
  using L = Diagnostic::Level;
  std::vector<Diagnostic> out;
  if (spec.k0() < 1) out.push_back({L::Error, "components", "at least one component is required"});
  if (spec.gamma <= Rational(0)) out.push_back({L::Warning, "cutoff", "gamma is not positive; only trees of negative degree are kept"});
  if (spec.kappa < Rational(0)) out.push_back({L::Error, "kappa", "kappa must be non-negative"});
  if (spec.max_nodes < 1) out.push_back({L::Error, "cutoff", "max_nodes must be at least 1"});

  for (int i = 1; i <= spec.k0(); ++i) {
    const Component& c = spec.components[static_cast<std::size_t>(i - 1)];
    for (const Expr* e : {&c.a, &c.b}) {
      auto vars = e->variables();
      vars.erase("x1");
      if (!vars.empty())
        out.push_back({L::Error, "coefficients",
                       "component " + std::to_string(i) + ": coefficients may depend on x1 only ('" + e->text() + "')"});
    }
    double amin = std::numeric_limits<double>::infinity();
    bool finite = true;
    for (int k = 0; k < 512; ++k) {
      double x = 2 * std::numbers::pi * k / 512.0;
      try {
        double av = c.a(x), bv = c.b(x);
        finite = finite && std::isfinite(av) && std::isfinite(bv);
        amin = std::min(amin, av);
      } catch (const ExprError&) {
        finite = false;
      }
    }
    if (!finite)
      out.push_back({L::Error, "coefficients", "component " + std::to_string(i) + ": a or b is not finite on the torus"});
    else if (!(amin > 1e-8))
      out.push_back({L::Error, "ellipticity",
                     "component " + std::to_string(i) + ": a(x1) = " + c.a.text() + " is not bounded away from 0 (min " +
                         std::to_string(amin) + ")"});
  }

  // Every edge from a node of type A to a child rooted at type B adds
  // deg(B-node) + beta - |k|_s. Generation terminates iff every cycle has
  // positive total gain and every uncapped edge has positive gain.
  if (spec.k0() >= 1) {
    DegreeAssignment d = spec.degrees();
    auto types = node_types(spec);
    const std::size_t n = types.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> w(n, std::vector<double>(n, inf));
    for (std::size_t A = 0; A < n; ++A) {
      const Nonlinearity& fa = spec.nonlinearity(types[A].sort, types[A].noise);
      for (const VarIndex& v : fa.args)
        for (std::size_t B = 0; B < n; ++B) {
          if (types[B].sort != v.sort) continue;
          Rational gain = d.alpha(types[B].noise) + d.beta - Rational(v.deriv.scaled());
          w[A][B] = std::min(w[A][B], gain.to_double());
          bool capped = fa.poly.has_value() || (!v.deriv.is_zero() && fa.du_order >= 0);
          if (types[B].noise != 0 && gain <= Rational(0) && !capped)
            out.push_back({L::Error, "subcriticality",
                           "edge (" + std::to_string(v.sort) + ",(" + std::to_string(v.deriv.k0) + "," +
                               std::to_string(v.deriv.k1) + ")) onto noise " + std::to_string(types[B].noise) +
                               " has non-positive gain " + gain.str() + " and unbounded multiplicity"});
        }
    }
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (w[i][k] + w[k][j] < w[i][j]) w[i][j] = w[i][k] + w[k][j];
    for (std::size_t i = 0; i < n; ++i)
      if (w[i][i] <= 1e-12) {
        out.push_back({L::Error, "subcriticality",
                       "a chain of insertions through noise " + std::to_string(types[i].noise) + " of component " +
                           std::to_string(types[i].sort) + " never gains regularity (cycle gain " +
                           std::to_string(w[i][i]) + "); tree generation would not terminate"});
        break;
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Basis generation

struct BasisEntry {
  DecoratedTree tree;
  Rational degree;
};

struct Basis {
  DegreeAssignment degrees;
  std::vector<BasisEntry> trees;                    ///< sorted by (degree, tree)
  std::vector<BasisEntry> minus;                    ///< B-: deg <= 0 and at least one noise
  std::map<int, std::vector<BasisEntry>> rhs;       ///< right-hand-side trees per component
  std::vector<EdgeLabel> planted_edges;             ///< edge labels used for planted trees
  bool truncated_by_nodes = false;                  ///< some tree at max_nodes has deg < gamma

  bool contains(const DecoratedTree& t) const {
    return std::any_of(trees.begin(), trees.end(), [&](const BasisEntry& e) { return e.tree == t; });
  }
  std::vector<DecoratedTree> tree_list() const {
    std::vector<DecoratedTree> out;
    for (const auto& e : trees) out.push_back(e.tree);
    return out;
  }
  std::vector<DecoratedTree> minus_list() const {
    std::vector<DecoratedTree> out;
    for (const auto& e : minus) out.push_back(e.tree);
    return out;
  }
};

namespace detail {

class BasisGenerator {
public:
  explicit BasisGenerator(const EquationSpec& s) : spec_(s) {}

  /// Noisy right-hand-side trees of component s with exactly n nodes.
  const std::vector<DecoratedTree>& rhs(int s, int n) {
    auto key = std::make_pair(s, n);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    std::set<DecoratedTree> out;
    for (int l = 0; l <= spec_.n0(); ++l) {
      const Nonlinearity& F = spec_.nonlinearity(s, l);
      if (F.is_zero()) continue;
      if (n == 1) {
        if (l != 0) out.insert(DecoratedTree::noise(l));
        continue;
      }
      // Candidate branches: (argument index j, subtree) with subtree size < n.
      std::vector<std::pair<std::size_t, Branch>> cands;
      std::vector<int> sizes;
      for (std::size_t j = 0; j < F.args.size(); ++j)
        for (int m = 1; m < n; ++m)
          for (const auto& t : rhs(F.args[j].sort, m)) {
            cands.push_back({j, Branch{EdgeLabel{F.args[j].sort, F.args[j].deriv}, t}});
            sizes.push_back(m);
          }
      std::vector<std::size_t> chosen;
      std::vector<int> counts(F.args.size(), 0);
      choose(cands, sizes, 0, n - 1, chosen, counts, F, l, out);
    }
    return memo_.emplace(key, std::vector<DecoratedTree>(out.begin(), out.end())).first->second;
  }

private:
  void choose(const std::vector<std::pair<std::size_t, Branch>>& cands, const std::vector<int>& sizes,
              std::size_t start, int remaining, std::vector<std::size_t>& chosen, std::vector<int>& counts,
              const Nonlinearity& F, int l, std::set<DecoratedTree>& out) {
    if (remaining == 0) {
      if (chosen.empty()) return;
      std::vector<Branch> kids;
      for (auto c : chosen) kids.push_back(cands[c].second);
      out.insert(DecoratedTree(NodeDeco{l, {}}, std::move(kids)));
      return;
    }
    for (std::size_t c = start; c < cands.size(); ++c) {
      if (sizes[c] > remaining) continue;
      ++counts[cands[c].first];
      if (F.admits(counts)) {
        chosen.push_back(c);
        choose(cands, sizes, c, remaining - sizes[c], chosen, counts, F, l, out);
        chosen.pop_back();
      }
      --counts[cands[c].first];
    }
  }

  const EquationSpec& spec_;
  std::map<std::pair<int, int>, std::vector<DecoratedTree>> memo_;
};

} // namespace detail

/// All conforming trees of degree < gamma with at most max_nodes nodes,
/// the planted trees I_a(tau) over them, and the polynomials X^k with
/// |k|_s <= 2. Throws SpecError when validate_spec reports an error.
inline Basis generate_basis(const EquationSpec& spec) {
  auto diags = validate_spec(spec);
  for (const auto& d : diags)
    if (d.level == Diagnostic::Level::Error) throw SpecError(d.code + ": " + d.message);

  Basis basis;
  basis.degrees = spec.degrees();
  const DegreeAssignment& d = basis.degrees;
  detail::BasisGenerator gen(spec);
  std::set<DecoratedTree> all;

  for (int s = 1; s <= spec.k0(); ++s) {
    std::set<DecoratedTree> rhs_s;
    for (int n = 1; n <= spec.max_nodes; ++n)
      for (const auto& t : gen.rhs(s, n)) {
        if (degree(t, d) >= spec.gamma) continue;
        rhs_s.insert(t);
        if (n == spec.max_nodes) basis.truncated_by_nodes = true;
      }
    for (const auto& t : rhs_s) basis.rhs[s].push_back({t, degree(t, d)});
    all.insert(rhs_s.begin(), rhs_s.end());
  }

  std::set<EdgeLabel> edges;
  for (int s = 1; s <= spec.k0(); ++s) {
    edges.insert(EdgeLabel{s, {0, 0}});
    for (int i = 1; i <= spec.k0(); ++i)
      for (int l = 0; l <= spec.n0(); ++l)
        if (spec.nonlinearity(i, l).depends_on({s, {0, 1}})) edges.insert(EdgeLabel{s, {0, 1}});
  }
  basis.planted_edges.assign(edges.begin(), edges.end());
  for (const auto& e : edges)
    for (const auto& entry : basis.rhs[e.sort]) all.insert(DecoratedTree::planted(e, entry.tree));

  for (const auto& k : multi_indices_below(Rational(2), false)) all.insert(DecoratedTree::poly(k));

  for (const auto& t : all) basis.trees.push_back({t, degree(t, d)});
  auto by_degree = [](const BasisEntry& a, const BasisEntry& b) {
    if (a.degree != b.degree) return a.degree < b.degree;
    return a.tree < b.tree;
  };
  std::sort(basis.trees.begin(), basis.trees.end(), by_degree);
  for (const auto& e : basis.trees)
    if (e.degree <= Rational(0) && e.tree.noise_count() >= 1) basis.minus.push_back(e);
  for (auto& [s, v] : basis.rhs) std::sort(v.begin(), v.end(), by_degree);
  return basis;
}

} // namespace locrs

#endif // LOCRS_RULES_HPP
