#ifndef LOCRS_LINCOMB_HPP
#define LOCRS_LINCOMB_HPP

#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>

#include "locrs/rational.hpp"
#include "locrs/trees.hpp"

namespace locrs {

inline bool is_zero_coeff(const Rational& r) { return r.is_zero(); }
inline bool is_zero_coeff(double d) { return d == 0.0; }
template <class C>
bool is_zero_coeff(const C& c) {
  return c.is_zero();
}

/// Finite formal sum of canonical trees. Zero coefficients are never stored.
template <class C>
class LinComb {
public:
  using map_type = std::map<DecoratedTree, C>;

  LinComb() = default;
  explicit LinComb(const DecoratedTree& t, C c = C(1)) { add(t, std::move(c)); }

  void add(const DecoratedTree& t, const C& c) {
    if (is_zero_coeff(c)) return;
    auto it = terms_.find(t);
    if (it == terms_.end()) {
      terms_.emplace(t, c);
      return;
    }
    it->second = it->second + c;
    if (is_zero_coeff(it->second)) terms_.erase(it);
  }
  void add(const LinComb& o, const C& scale) {
    for (const auto& [t, c] : o.terms_) add(t, c * scale);
  }

  C coeff(const DecoratedTree& t) const {
    auto it = terms_.find(t);
    return it == terms_.end() ? C(0) : it->second;
  }

  const map_type& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  auto begin() const { return terms_.begin(); }
  auto end() const { return terms_.end(); }

  LinComb& operator+=(const LinComb& o) {
    for (const auto& [t, c] : o.terms_) add(t, c);
    return *this;
  }
  LinComb& operator-=(const LinComb& o) {
    for (const auto& [t, c] : o.terms_) add(t, C(0) - c);
    return *this;
  }
  friend LinComb operator+(LinComb a, const LinComb& b) { return a += b; }
  friend LinComb operator-(LinComb a, const LinComb& b) { return a -= b; }
  friend LinComb operator*(const C& s, const LinComb& a) {
    LinComb r;
    for (const auto& [t, c] : a.terms_) r.add(t, s * c);
    return r;
  }
  friend bool operator==(const LinComb& a, const LinComb& b) { return a.terms_ == b.terms_; }

  /// Bilinear extension of the root product.
  friend LinComb operator*(const LinComb& a, const LinComb& b) {
    LinComb r;
    for (const auto& [s, cs] : a.terms_)
      for (const auto& [t, ct] : b.terms_) r.add(tree_product(s, t), cs * ct);
    return r;
  }

  /// Applies a tree-level map t -> LinComb linearly.
  template <class F>
  LinComb map_linear(F&& f) const {
    LinComb r;
    for (const auto& [t, c] : terms_) r.add(f(t), c);
    return r;
  }

private:
  map_type terms_;
};

template <class C>
std::string to_string(const LinComb<C>& v) {
  if (v.empty()) return "0";
  std::string s;
  bool first = true;
  for (const auto& [t, c] : v) {
    if (!first) s += " + ";
    first = false;
    if constexpr (std::is_same_v<C, double>)
      s += "(" + std::to_string(c) + ")";
    else
      s += "(" + c.str() + ")";
    s += "[" + to_string(t) + "]";
  }
  return s;
}

/// Element of a tensor product of two tree spaces; both slots canonical.
template <class C>
class TensorSum {
public:
  using key_type = std::pair<DecoratedTree, DecoratedTree>;
  using map_type = std::map<key_type, C>;

  TensorSum() = default;

  void add(const DecoratedTree& l, const DecoratedTree& r, const C& c) {
    if (is_zero_coeff(c)) return;
    key_type k{l, r};
    auto it = terms_.find(k);
    if (it == terms_.end()) {
      terms_.emplace(std::move(k), c);
      return;
    }
    it->second = it->second + c;
    if (is_zero_coeff(it->second)) terms_.erase(it);
  }
  void add(const TensorSum& o, const C& scale = C(1)) {
    for (const auto& [k, c] : o.terms_) add(k.first, k.second, c * scale);
  }

  C coeff(const DecoratedTree& l, const DecoratedTree& r) const {
    auto it = terms_.find({l, r});
    return it == terms_.end() ? C(0) : it->second;
  }

  const map_type& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  auto begin() const { return terms_.begin(); }
  auto end() const { return terms_.end(); }

  /// Slotwise root product (the algebra structure on T (x) T+).
  friend TensorSum operator*(const TensorSum& a, const TensorSum& b) {
    TensorSum r;
    for (const auto& [ka, ca] : a.terms_)
      for (const auto& [kb, cb] : b.terms_)
        r.add(tree_product(ka.first, kb.first), tree_product(ka.second, kb.second), ca * cb);
    return r;
  }
  friend bool operator==(const TensorSum& a, const TensorSum& b) { return a.terms_ == b.terms_; }

private:
  map_type terms_;
};

template <class C>
std::string to_string(const TensorSum<C>& v) {
  if (v.empty()) return "0";
  std::string s;
  bool first = true;
  for (const auto& [k, c] : v) {
    if (!first) s += " + ";
    first = false;
    if constexpr (std::is_same_v<C, double>)
      s += "(" + std::to_string(c) + ")";
    else
      s += "(" + c.str() + ")";
    s += "[" + to_string(k.first) + "] (x) [" + to_string(k.second) + "]";
  }
  return s;
}

template <class C>
std::ostream& operator<<(std::ostream& os, const LinComb<C>& v) {
  return os << to_string(v);
}
template <class C>
std::ostream& operator<<(std::ostream& os, const TensorSum<C>& v) {
  return os << to_string(v);
}

/// Three-slot tensors, used only to state coassociativity.
template <class C>
using Tensor3 = std::map<std::tuple<DecoratedTree, DecoratedTree, DecoratedTree>, C>;

template <class C>
void add_to(Tensor3<C>& t, const DecoratedTree& a, const DecoratedTree& b, const DecoratedTree& c, const C& v) {
  if (is_zero_coeff(v)) return;
  auto key = std::make_tuple(a, b, c);
  auto it = t.find(key);
  if (it == t.end()) {
    t.emplace(std::move(key), v);
    return;
  }
  it->second = it->second + v;
  if (is_zero_coeff(it->second)) t.erase(it);
}

} // namespace locrs

#endif // LOCRS_LINCOMB_HPP
