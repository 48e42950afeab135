#ifndef LOCRS_TREES_HPP
#define LOCRS_TREES_HPP

// Decorated rooted trees: the basis symbols of the regularity structure.
//
// A tree is X^k zeta_l prod_j I_{a_j}(tau_j): a root carrying a noise index
// l (0 stands for the unit) and a polynomial exponent k = (k0, k1), with an
// ordered list of planted branches. Children are always kept in canonical
// order, so two isomorphic trees compare equal.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "locrs/rational.hpp"

namespace locrs {

/// Spacetime multi-index (k0, k1); k0 counts time derivatives/powers.
struct MultiIndex {
  int k0 = 0;
  int k1 = 0;

  /// Parabolic length |k|_s = 2 k0 + k1.
  constexpr int scaled() const { return 2 * k0 + k1; }
  constexpr bool is_zero() const { return k0 == 0 && k1 == 0; }
  friend constexpr MultiIndex operator+(MultiIndex a, MultiIndex b) { return {a.k0 + b.k0, a.k1 + b.k1}; }
  friend constexpr MultiIndex operator-(MultiIndex a, MultiIndex b) { return {a.k0 - b.k0, a.k1 - b.k1}; }
  constexpr bool leq(MultiIndex o) const { return k0 <= o.k0 && k1 <= o.k1; }
  friend constexpr auto operator<=>(const MultiIndex&, const MultiIndex&) = default;
};

/// k! = k0! k1!
inline Rational factorial(MultiIndex k) { return factorial(k.k0) * factorial(k.k1); }
inline Rational binomial(MultiIndex n, MultiIndex k) { return binomial(n.k0, k.k0) * binomial(n.k1, k.k1); }

/// All multi-indices m with |m|_s < bound (strict) when strict, else <= bound.
inline std::vector<MultiIndex> multi_indices_below(const Rational& bound, bool strict = true) {
  std::vector<MultiIndex> out;
  for (int k0 = 0; Rational(2 * k0) < bound || (!strict && Rational(2 * k0) == bound); ++k0)
    for (int k1 = 0;; ++k1) {
      Rational s(2 * k0 + k1);
      if (strict ? !(s < bound) : (s > bound)) break;
      out.push_back({k0, k1});
    }
  return out;
}

/// Decomposes n into ordered pairs (p, n - p) with p <= n componentwise.
inline std::vector<MultiIndex> sub_indices(MultiIndex n) {
  std::vector<MultiIndex> out;
  for (int a = 0; a <= n.k0; ++a)
    for (int b = 0; b <= n.k1; ++b) out.push_back({a, b});
  return out;
}

struct NodeDeco {
  int noise = 0;      ///< l in {0..n0}; zeta_0 is the unit
  MultiIndex poly{};  ///< X^k decoration
  friend constexpr auto operator<=>(const NodeDeco&, const NodeDeco&) = default;
};

struct EdgeLabel {
  int sort = 1;        ///< which operator (d_0 - L^i)^{-1}; 1-based
  MultiIndex deriv{};  ///< derivative decoration
  friend constexpr auto operator<=>(const EdgeLabel&, const EdgeLabel&) = default;
};

struct Branch;

class DecoratedTree {
public:
  DecoratedTree() = default;
  /// Builds a tree and sorts the children into canonical order. Child
  /// subtrees are assumed canonical already (true for every tree built
  /// through this constructor).
  DecoratedTree(NodeDeco root, std::vector<Branch> children);

  /// Builds a tree without touching child order; see canonicalize().
  static DecoratedTree raw(NodeDeco root, std::vector<Branch> children);

  static DecoratedTree unit() { return DecoratedTree(NodeDeco{}, {}); }
  static DecoratedTree noise(int l) { return DecoratedTree(NodeDeco{l, {}}, {}); }
  static DecoratedTree poly(MultiIndex k) { return DecoratedTree(NodeDeco{0, k}, {}); }
  static DecoratedTree planted(EdgeLabel a, DecoratedTree t);

  const NodeDeco& root() const { return root_; }
  const std::vector<Branch>& children() const { return children_; }

  bool is_unit() const { return root_.noise == 0 && root_.poly.is_zero() && children_.empty(); }
  bool is_polynomial() const { return root_.noise == 0 && children_.empty(); }
  bool is_planted() const;

  std::size_t node_count() const;
  int noise_count() const;

  DecoratedTree with_root(NodeDeco r) const;

  friend bool operator==(const DecoratedTree& a, const DecoratedTree& b);
  friend std::strong_ordering operator<=>(const DecoratedTree& a, const DecoratedTree& b);

private:
  NodeDeco root_{};
  std::vector<Branch> children_;
};

struct Branch {
  EdgeLabel edge;
  DecoratedTree tree;
};

inline std::strong_ordering operator<=>(const Branch& a, const Branch& b) {
  if (auto c = a.edge <=> b.edge; c != 0) return c;
  return a.tree <=> b.tree;
}
inline bool operator==(const Branch& a, const Branch& b) { return a.edge == b.edge && a.tree == b.tree; }

inline DecoratedTree::DecoratedTree(NodeDeco root, std::vector<Branch> children)
    : root_(root), children_(std::move(children)) {
  std::sort(children_.begin(), children_.end(), [](const Branch& a, const Branch& b) { return (a <=> b) < 0; });
}

inline DecoratedTree DecoratedTree::raw(NodeDeco root, std::vector<Branch> children) {
  DecoratedTree t;
  t.root_ = root;
  t.children_ = std::move(children);
  return t;
}

inline DecoratedTree DecoratedTree::planted(EdgeLabel a, DecoratedTree t) {
  return DecoratedTree(NodeDeco{}, {Branch{a, std::move(t)}});
}

inline bool DecoratedTree::is_planted() const {
  return root_.noise == 0 && root_.poly.is_zero() && children_.size() == 1;
}

inline std::size_t DecoratedTree::node_count() const {
  std::size_t n = 1;
  for (const auto& b : children_) n += b.tree.node_count();
  return n;
}

inline int DecoratedTree::noise_count() const {
  int n = root_.noise != 0 ? 1 : 0;
  for (const auto& b : children_) n += b.tree.noise_count();
  return n;
}

inline DecoratedTree DecoratedTree::with_root(NodeDeco r) const {
  DecoratedTree t = *this;
  t.root_ = r;
  return t;
}

inline bool operator==(const DecoratedTree& a, const DecoratedTree& b) {
  return a.root_ == b.root_ && a.children_ == b.children_;
}

inline std::strong_ordering operator<=>(const DecoratedTree& a, const DecoratedTree& b) {
  if (auto c = a.root_ <=> b.root_; c != 0) return c;
  std::size_t n = std::min(a.children_.size(), b.children_.size());
  for (std::size_t i = 0; i < n; ++i)
    if (auto c = a.children_[i] <=> b.children_[i]; c != 0) return c;
  return a.children_.size() <=> b.children_.size();
}

/// Recursively sorts children into canonical order.
inline DecoratedTree canonicalize(const DecoratedTree& t) {
  std::vector<Branch> kids;
  kids.reserve(t.children().size());
  for (const auto& b : t.children()) kids.push_back({b.edge, canonicalize(b.tree)});
  return DecoratedTree(t.root(), std::move(kids));
}

/// Product at the root: polynomial decorations add and branches are merged.
/// At most one of the two roots may carry a noise.
inline DecoratedTree tree_product(const DecoratedTree& a, const DecoratedTree& b) {
  if (a.root().noise != 0 && b.root().noise != 0)
    throw std::invalid_argument("tree_product: both roots carry a noise");
  NodeDeco r{a.root().noise != 0 ? a.root().noise : b.root().noise, a.root().poly + b.root().poly};
  std::vector<Branch> kids = a.children();
  kids.insert(kids.end(), b.children().begin(), b.children().end());
  return DecoratedTree(r, std::move(kids));
}

// ---------------------------------------------------------------------------
// Degrees

/// Noise regularities alpha_l (alpha_0 = 0) and the kernel gain beta.
struct DegreeAssignment {
  std::vector<Rational> noise_degrees{Rational(0)};
  Rational beta{2};

  const Rational& alpha(int l) const {
    if (l < 0 || static_cast<std::size_t>(l) >= noise_degrees.size())
      throw std::out_of_range("degree: unknown noise index " + std::to_string(l));
    return noise_degrees[static_cast<std::size_t>(l)];
  }
};

/// deg(X^k zeta_l prod I_{a_j} tau_j) = |k|_s + alpha_l + sum (deg tau_j + beta - |k_j|_s)
inline Rational degree(const DecoratedTree& t, const DegreeAssignment& d) {
  Rational r = Rational(t.root().poly.scaled()) + d.alpha(t.root().noise);
  for (const auto& b : t.children()) r += degree(b.tree, d) + d.beta - Rational(b.edge.deriv.scaled());
  return r;
}

inline int noise_count(const DecoratedTree& t) { return t.noise_count(); }

/// S(tau): product over nodes of k_v! times m_b! for every group of m_b
/// identical (edge label, subtree) branches at that node.
inline std::uint64_t symmetry_factor(const DecoratedTree& t) {
  std::uint64_t s = 1;
  auto fact = [](int n) {
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
    return f;
  };
  s *= fact(t.root().poly.k0) * fact(t.root().poly.k1);
  const auto& kids = t.children();
  for (std::size_t i = 0; i < kids.size();) {
    std::size_t j = i;
    while (j < kids.size() && kids[j] == kids[i]) ++j;
    s *= fact(static_cast<int>(j - i));
    for (std::size_t m = i; m < j; ++m) s *= symmetry_factor(kids[m].tree);
    i = j;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Text form:  tree := ("X^(k0,k1)")? "z"l ( "I[" sort "," (k0,k1) "](" tree ")" )*

inline std::string to_string(const DecoratedTree& t) {
  std::string s;
  if (!t.root().poly.is_zero())
    s += "X^(" + std::to_string(t.root().poly.k0) + "," + std::to_string(t.root().poly.k1) + ")";
  s += "z" + std::to_string(t.root().noise);
  for (const auto& b : t.children()) {
    s += " I[" + std::to_string(b.edge.sort) + ",(" + std::to_string(b.edge.deriv.k0) + "," +
         std::to_string(b.edge.deriv.k1) + ")](" + to_string(b.tree) + ")";
  }
  return s;
}

class TreeParseError : public std::runtime_error {
public:
  TreeParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " at position " + std::to_string(pos)), pos_(pos) {}
  std::size_t position() const { return pos_; }

private:
  std::size_t pos_;
};

namespace detail {

class TreeParser {
public:
  explicit TreeParser(const std::string& s) : s_(s) {}

  DecoratedTree parse_all() {
    DecoratedTree t = parse_tree();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing input");
    return t;
  }

private:
  [[noreturn]] void fail(const std::string& m) const { throw TreeParseError("tree syntax error: " + m, pos_); }
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n')) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  void expect(char c) {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  int parse_int() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail("expected integer");
    return std::stoi(s_.substr(start, pos_ - start));
  }
  MultiIndex parse_pair() {
    expect('(');
    int a = parse_int();
    expect(',');
    int b = parse_int();
    expect(')');
    return {a, b};
  }
  DecoratedTree parse_tree() {
    NodeDeco root;
    if (peek('X')) {
      ++pos_;
      expect('^');
      root.poly = parse_pair();
    }
    expect('z');
    root.noise = parse_int();
    std::vector<Branch> kids;
    while (peek('I')) {
      ++pos_;
      expect('[');
      EdgeLabel e;
      e.sort = parse_int();
      expect(',');
      e.deriv = parse_pair();
      expect(']');
      expect('(');
      DecoratedTree sub = parse_tree();
      expect(')');
      kids.push_back({e, std::move(sub)});
    }
    return DecoratedTree(root, std::move(kids));
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

} // namespace detail

inline DecoratedTree parse_tree(const std::string& text) { return detail::TreeParser(text).parse_all(); }

inline std::ostream& operator<<(std::ostream& os, const DecoratedTree& t) { return os << to_string(t); }

// JSON mirrors the fields: {"noise":l,"poly":[k0,k1],"children":[{"sort":s,"deriv":[k0,k1],"tree":{...}}]}
inline nlohmann::json to_json(const DecoratedTree& t) {
  nlohmann::json j;
  j["noise"] = t.root().noise;
  j["poly"] = {t.root().poly.k0, t.root().poly.k1};
  j["children"] = nlohmann::json::array();
  for (const auto& b : t.children())
    j["children"].push_back({{"sort", b.edge.sort}, {"deriv", {b.edge.deriv.k0, b.edge.deriv.k1}}, {"tree", to_json(b.tree)}});
  return j;
}

inline DecoratedTree tree_from_json(const nlohmann::json& j) {
  NodeDeco r{j.at("noise").get<int>(), {j.at("poly").at(0).get<int>(), j.at("poly").at(1).get<int>()}};
  std::vector<Branch> kids;
  for (const auto& c : j.at("children")) {
    EdgeLabel e{c.at("sort").get<int>(), {c.at("deriv").at(0).get<int>(), c.at("deriv").at(1).get<int>()}};
    kids.push_back({e, tree_from_json(c.at("tree"))});
  }
  return DecoratedTree(r, std::move(kids));
}

} // namespace locrs

#endif // LOCRS_TREES_HPP
