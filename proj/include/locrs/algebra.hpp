#ifndef LOCRS_ALGEBRA_HPP
#define LOCRS_ALGEBRA_HPP

// Hopf-algebraic operations on decorated trees: the coaction
// Delta : T -> T (x) T+, the positive coproduct and antipode on T+, the
// root-extraction map delta_r, the grafting product and characters.
//
// Elements of T+ (products X^k prod I+_a(tau)) are stored as trees whose
// root carries no noise; the tree product at the root is the product of T+.

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "locrs/lincomb.hpp"
#include "locrs/rational.hpp"
#include "locrs/trees.hpp"

namespace locrs {

/// Coproducts, antipode and extraction for a fixed degree assignment.
/// Results are memoized; an instance is not meant to be shared across
/// threads.
class HopfStructure {
public:
  explicit HopfStructure(DegreeAssignment d) : deg_(std::move(d)) {}

  const DegreeAssignment& degrees() const { return deg_; }
  Rational degree(const DecoratedTree& t) const { return locrs::degree(t, deg_); }

  /// I+_a(tau) as an element of T+, or nullopt when deg(I_a tau) <= 0 or
  /// tau is a polynomial (I_a X^k = 0).
  std::optional<DecoratedTree> plus_planted(EdgeLabel a, const DecoratedTree& tau) const {
    if (tau.is_polynomial()) return std::nullopt;
    if (degree(tau) + deg_.beta - Rational(a.deriv.scaled()) <= Rational(0)) return std::nullopt;
    return DecoratedTree::planted(a, tau);
  }

  /// Delta X^k = sum binom(k,p) X^p (x) X^(k-p); the noise stays on the left.
  TensorSum<Rational> coproduct_root(NodeDeco r) const {
    TensorSum<Rational> out;
    for (MultiIndex p : sub_indices(r.poly))
      out.add(DecoratedTree(NodeDeco{r.noise, p}, {}), DecoratedTree::poly(r.poly - p), binomial(r.poly, p));
    return out;
  }

  /// Coaction on T: multiplicative at the root, and for a planted tree
  /// Delta I_a tau = (I_a (x) Id) Delta tau
  ///               + sum_{|l|_s < deg(I_a tau)} X^l/l! (x) I+_{a+l}(tau),
  /// with I_a X^k = 0.
  const TensorSum<Rational>& coproduct(const DecoratedTree& t) const {
    if (auto it = delta_cache_.find(t); it != delta_cache_.end()) return it->second;
    TensorSum<Rational> out = coproduct_root(t.root());
    for (const auto& b : t.children()) out = out * coproduct_planted(b.edge, b.tree);
    return delta_cache_.emplace(t, std::move(out)).first->second;
  }

  TensorSum<Rational> coproduct_planted(EdgeLabel a, const DecoratedTree& tau) const {
    TensorSum<Rational> out;
    for (const auto& [k, c] : coproduct(tau).terms())
      if (!k.first.is_polynomial()) out.add(DecoratedTree::planted(a, k.first), k.second, c);
    Rational d = degree(tau) + deg_.beta - Rational(a.deriv.scaled());
    for (MultiIndex l : multi_indices_below(d))
      out.add(DecoratedTree::poly(l), DecoratedTree::planted({a.sort, a.deriv + l}, tau), Rational(1) / factorial(l));
    return out;
  }

  /// Checks that t is a product of X^k and planted factors of positive degree.
  bool is_positive_element(const DecoratedTree& t) const {
    if (t.root().noise != 0) return false;
    for (const auto& b : t.children())
      if (!plus_planted(b.edge, b.tree)) return false;
    return true;
  }

  /// Coproduct on T+:
  /// Delta+ I+_a tau = (I+_a (x) Id) Delta tau + sum_{|l|_s < deg} X^l/l! (x) I+_{a+l}(tau).
  const TensorSum<Rational>& coproduct_plus(const DecoratedTree& t) const {
    if (!is_positive_element(t)) throw std::invalid_argument("coproduct_plus: not an element of T+: " + to_string(t));
    if (auto it = delta_plus_cache_.find(t); it != delta_plus_cache_.end()) return it->second;
    TensorSum<Rational> out = coproduct_root(t.root());
    for (const auto& b : t.children()) out = out * coproduct_plus_planted(b.edge, b.tree);
    return delta_plus_cache_.emplace(t, std::move(out)).first->second;
  }

  /// Antipode of T+, from m(S+ (x) Id) Delta+ = 1 eps, extended multiplicatively.
  const LinComb<Rational>& antipode_plus(const DecoratedTree& t) const {
    if (!is_positive_element(t)) throw std::invalid_argument("antipode_plus: not an element of T+: " + to_string(t));
    if (auto it = antipode_cache_.find(t); it != antipode_cache_.end()) return it->second;
    LinComb<Rational> out;
    if (t.is_unit()) {
      out.add(t, Rational(1));
    } else {
      std::vector<DecoratedTree> factors;
      for (int i = 0; i < t.root().poly.k0; ++i) factors.push_back(DecoratedTree::poly({1, 0}));
      for (int i = 0; i < t.root().poly.k1; ++i) factors.push_back(DecoratedTree::poly({0, 1}));
      for (const auto& b : t.children()) factors.push_back(DecoratedTree::planted(b.edge, b.tree));
      if (factors.size() == 1) {
        // S(t) = -t - sum' S(t') t''
        out.add(t, Rational(-1));
        for (const auto& [k, c] : coproduct_plus(t).terms()) {
          if ((k.first == t && k.second.is_unit()) || (k.first.is_unit() && k.second == t)) continue;
          LinComb<Rational> s = antipode_plus(k.first) * LinComb<Rational>(k.second);
          out.add(s, -c);
        }
      } else {
        out.add(DecoratedTree::unit(), Rational(1));
        for (const auto& f : factors) out = out * antipode_plus(f);
      }
    }
    return antipode_cache_.emplace(t, std::move(out)).first->second;
  }

  /// delta_r: one extraction at the root at a time. Sums, over root
  /// subtrees sigma with at least one noise and deg(sigma) <= 0, the terms
  /// sigma (x) tau/sigma, plus 1 (x) tau. Polynomial decorations of the
  /// extracted nodes are split binomially between sigma and the contracted
  /// node; edge derivative decorations are never transferred.
  const TensorSum<Rational>& delta_r(const DecoratedTree& t) const {
    if (auto it = delta_r_cache_.find(t); it != delta_r_cache_.end()) return it->second;
    TensorSum<Rational> out;
    out.add(DecoratedTree::unit(), t, Rational(1));
    for (const auto& e : root_subtrees(t)) {
      if (e.sigma.noise_count() < 1) continue;
      if (degree(e.sigma) > Rational(0)) continue;
      out.add(e.sigma, DecoratedTree(NodeDeco{0, e.contracted_poly}, e.leftovers), e.weight);
    }
    return delta_r_cache_.emplace(t, std::move(out)).first->second;
  }

  /// A root subtree of a tree with the data needed to contract it.
  struct Extraction {
    DecoratedTree sigma;
    std::vector<Branch> leftovers;  ///< branches hanging off sigma
    MultiIndex contracted_poly;     ///< polynomial decoration left behind
    Rational weight{1};             ///< product of binomial split factors
  };

  /// Every connected subtree containing the root, with every polynomial split.
  static std::vector<Extraction> root_subtrees(const DecoratedTree& t) {
    std::vector<Extraction> out;
    for (MultiIndex p : sub_indices(t.root().poly)) {
      // partial: included branches + leftovers
      struct Partial {
        std::vector<Branch> kept;
        std::vector<Branch> left;
        MultiIndex poly;
        Rational w;
      };
      std::vector<Partial> partials{{{}, {}, t.root().poly - p, binomial(t.root().poly, p)}};
      for (const auto& b : t.children()) {
        std::vector<Partial> next;
        auto subs = root_subtrees(b.tree);
        for (const auto& pa : partials) {
          Partial ex = pa;
          ex.left.push_back(b);
          next.push_back(std::move(ex));
          for (const auto& s : subs) {
            Partial in = pa;
            in.kept.push_back({b.edge, s.sigma});
            in.left.insert(in.left.end(), s.leftovers.begin(), s.leftovers.end());
            in.poly = in.poly + s.contracted_poly;
            in.w = in.w * s.weight;
            next.push_back(std::move(in));
          }
        }
        partials = std::move(next);
      }
      for (auto& pa : partials)
        out.push_back({DecoratedTree(NodeDeco{t.root().noise, p}, std::move(pa.kept)), std::move(pa.left), pa.poly, pa.w});
    }
    return out;
  }

private:
  TensorSum<Rational> coproduct_plus_planted(EdgeLabel a, const DecoratedTree& tau) const {
    TensorSum<Rational> out;
    for (const auto& [k, c] : coproduct(tau).terms()) {
      auto p = plus_planted(a, k.first);
      if (p) out.add(*p, k.second, c);
    }
    Rational d = degree(tau) + deg_.beta - Rational(a.deriv.scaled());
    for (MultiIndex l : multi_indices_below(d))
      out.add(DecoratedTree::poly(l), DecoratedTree::planted({a.sort, a.deriv + l}, tau), Rational(1) / factorial(l));
    return out;
  }

  DegreeAssignment deg_;
  mutable std::map<DecoratedTree, TensorSum<Rational>> delta_cache_;
  mutable std::map<DecoratedTree, TensorSum<Rational>> delta_plus_cache_;
  mutable std::map<DecoratedTree, LinComb<Rational>> antipode_cache_;
  mutable std::map<DecoratedTree, TensorSum<Rational>> delta_r_cache_;
};

/// Counit of T+: eps(1) = 1, zero on every other basis element.
inline Rational counit(const DecoratedTree& t) { return t.is_unit() ? Rational(1) : Rational(0); }

// ---------------------------------------------------------------------------
// Grafting product

namespace detail {

struct FlatTree {
  struct Node {
    NodeDeco deco;
    std::vector<std::pair<EdgeLabel, int>> kids;  // index into nodes
    std::vector<Branch> extra;                    // grafted branches
  };
  std::vector<Node> nodes;

  explicit FlatTree(const DecoratedTree& t) { add(t); }

  int add(const DecoratedTree& t) {
    int id = static_cast<int>(nodes.size());
    nodes.push_back({t.root(), {}, {}});
    for (const auto& b : t.children()) {
      int c = add(b.tree);
      nodes[static_cast<std::size_t>(id)].kids.push_back({b.edge, c});
    }
    return id;
  }

  DecoratedTree build(int id = 0) const {
    const Node& n = nodes[static_cast<std::size_t>(id)];
    std::vector<Branch> kids = n.extra;
    for (const auto& [e, c] : n.kids) kids.push_back({e, build(c)});
    return DecoratedTree(n.deco, std::move(kids));
  }
};

inline void distribute_poly(MultiIndex k, std::size_t nodes, std::vector<MultiIndex>& cur,
                            const std::function<void(const std::vector<MultiIndex>&)>& emit) {
  if (cur.size() + 1 == nodes) {
    cur.push_back(k);
    emit(cur);
    cur.pop_back();
    return;
  }
  for (MultiIndex p : sub_indices(k)) {
    cur.push_back(p);
    distribute_poly(k - p, nodes, cur, emit);
    cur.pop_back();
  }
}

} // namespace detail

/// sigma * tau: every branch I_{a_i}(sigma_i) of sigma = X^k prod I_{a_i}(sigma_i)
/// is grafted onto some node of tau, then X^k is distributed over the nodes
/// of tau (sum over k = sum_v k_v with Leibniz weights k! / prod k_v!).
inline LinComb<Rational> graft(const DecoratedTree& sigma, const DecoratedTree& tau) {
  if (sigma.root().noise != 0) throw std::invalid_argument("graft: sigma must be of the form X^k prod I_a(sigma_i)");
  detail::FlatTree base(tau);
  const std::size_t n = base.nodes.size();
  const auto& branches = sigma.children();
  LinComb<Rational> out;
  std::vector<std::size_t> site(branches.size(), 0);
  while (true) {
    detail::FlatTree g = base;
    for (std::size_t i = 0; i < branches.size(); ++i) g.nodes[site[i]].extra.push_back(branches[i]);
    std::vector<MultiIndex> cur;
    detail::distribute_poly(sigma.root().poly, n, cur, [&](const std::vector<MultiIndex>& ks) {
      detail::FlatTree h = g;
      Rational w = factorial(sigma.root().poly);
      for (std::size_t v = 0; v < n; ++v) {
        h.nodes[v].deco.poly = h.nodes[v].deco.poly + ks[v];
        w = w / factorial(ks[v]);
      }
      out.add(h.build(), w);
    });
    std::size_t i = 0;
    while (i < site.size() && ++site[i] == n) site[i++] = 0;
    if (i == site.size()) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Characters evaluated at one point x

/// Values of a character at a fixed spacetime point on basis trees of T-.
/// The unit has value 1 and unlisted trees value 0.
template <class C>
class PointCharacter {
public:
  PointCharacter() = default;
  void set(const DecoratedTree& t, C v) { values_[t] = std::move(v); }
  C operator()(const DecoratedTree& t) const {
    if (t.is_unit()) return C(1);
    auto it = values_.find(t);
    return it == values_.end() ? C(0) : it->second;
  }
  /// Multiplicative extension to forests.
  C operator()(const std::vector<DecoratedTree>& forest) const {
    C r(1);
    for (const auto& t : forest) r = r * (*this)(t);
    return r;
  }
  const std::map<DecoratedTree, C>& values() const { return values_; }

private:
  std::map<DecoratedTree, C> values_;
};

/// Rational structure constants as coefficients of type C.
template <class C>
C coeff_cast(const Rational& r) {
  if constexpr (std::is_same_v<C, double>)
    return r.to_double();
  else
    return C(r);
}

template <class C>
LinComb<C> lift(const LinComb<Rational>& v) {
  LinComb<C> out;
  for (const auto& [t, c] : v) out.add(t, coeff_cast<C>(c));
  return out;
}

/// (l (x) Id) t
template <class C>
LinComb<C> char_apply_tensor(const PointCharacter<C>& l, const TensorSum<Rational>& t) {
  LinComb<C> out;
  for (const auto& [k, c] : t.terms()) {
    C v = l(k.first);
    if (is_zero_coeff(v)) continue;
    out.add(k.second, v * coeff_cast<C>(c));
  }
  return out;
}

/// (l o lbar)(tau) = (l (x) lbar) delta_r(tau), on the given trees.
template <class C>
PointCharacter<C> char_convolve(const PointCharacter<C>& l, const PointCharacter<C>& lbar,
                                const std::vector<DecoratedTree>& support, const HopfStructure& h) {
  PointCharacter<C> out;
  for (const auto& t : support) {
    C v(0);
    for (const auto& [k, c] : h.delta_r(t).terms()) v = v + l(k.first) * lbar(k.second) * coeff_cast<C>(c);
    if (!is_zero_coeff(v)) out.set(t, v);
  }
  return out;
}

} // namespace locrs

#endif // LOCRS_ALGEBRA_HPP
