#include <gtest/gtest.h>

#include <functional>

#include "locrs/algebra.hpp"
#include "locrs/rules.hpp"
#include "test_util.hpp"

using namespace locrs;

namespace {

const EdgeLabel kI{1, {0, 0}};

DegreeAssignment she_exact() {
  DegreeAssignment d;
  d.noise_degrees = {Rational(0), Rational(-3, 2)};
  return d;
}

DecoratedTree Iz() { return DecoratedTree::planted(kI, DecoratedTree::noise(1)); }

Tensor3<Rational> left_coassoc(const HopfStructure& h, const DecoratedTree& t) {
  Tensor3<Rational> out;
  for (const auto& [k, c] : h.coproduct(t))
    for (const auto& [k2, c2] : h.coproduct(k.first)) add_to(out, k2.first, k2.second, k.second, c * c2);
  return out;
}

Tensor3<Rational> right_coassoc(const HopfStructure& h, const DecoratedTree& t) {
  Tensor3<Rational> out;
  for (const auto& [k, c] : h.coproduct(t))
    for (const auto& [k2, c2] : h.coproduct_plus(k.second)) add_to(out, k.first, k2.first, k2.second, c * c2);
  return out;
}

// Root subtrees by explicit node subsets: counts those with deg <= 0 and a noise.
int brute_negative_root_subtrees(const DecoratedTree& t, const DegreeAssignment& d) {
  struct N {
    int parent;
    NodeDeco deco;
    int edge_deriv;
  };
  std::vector<N> nodes;
  std::function<void(const DecoratedTree&, int, int)> flat = [&](const DecoratedTree& s, int parent, int dv) {
    int id = static_cast<int>(nodes.size());
    nodes.push_back({parent, s.root(), dv});
    for (const auto& b : s.children()) flat(b.tree, id, b.edge.deriv.scaled());
  };
  flat(t, -1, 0);
  const int n = static_cast<int>(nodes.size());
  int count = 0;
  for (int mask = 1; mask < (1 << n); mask += 2) {
    bool closed = true;
    for (int v = 1; v < n; ++v)
      if ((mask >> v & 1) && !(mask >> nodes[static_cast<std::size_t>(v)].parent & 1)) closed = false;
    if (!closed) continue;
    Rational deg(0);
    int noises = 0;
    for (int v = 0; v < n; ++v) {
      if (!(mask >> v & 1)) continue;
      const auto& nd = nodes[static_cast<std::size_t>(v)];
      deg += Rational(nd.deco.poly.scaled()) + d.alpha(nd.deco.noise);
      if (v > 0) deg += d.beta - Rational(nd.edge_deriv);
      if (nd.deco.noise) ++noises;
    }
    if (noises >= 1 && deg <= Rational(0)) ++count;
  }
  return count;
}

std::vector<DecoratedTree> generated(const std::string& file, std::size_t max_nodes) {
  auto basis = generate_basis(testutil::load(file));
  std::vector<DecoratedTree> out;
  for (const auto& e : basis.trees)
    if (e.tree.node_count() <= max_nodes) out.push_back(e.tree);
  return out;
}

} // namespace

TEST(Algebra, CoproductExamples) {
  HopfStructure h(she_exact());
  auto z = DecoratedTree::noise(1);
  TensorSum<Rational> e1;
  e1.add(z, DecoratedTree::unit(), Rational(1));
  EXPECT_EQ(h.coproduct(z), e1);
  TensorSum<Rational> e0;
  e0.add(DecoratedTree::unit(), DecoratedTree::unit(), Rational(1));
  EXPECT_EQ(h.coproduct(DecoratedTree::unit()), e0);
  TensorSum<Rational> e2;
  e2.add(Iz(), DecoratedTree::unit(), Rational(1));
  e2.add(DecoratedTree::unit(), Iz(), Rational(1));
  EXPECT_EQ(h.coproduct(Iz()), e2);
}

TEST(Algebra, PolynomialCoproductIsPrimitive) {
  HopfStructure h(she_exact());
  TensorSum<Rational> e;
  auto X = DecoratedTree::poly({0, 1});
  e.add(X, DecoratedTree::unit(), Rational(1));
  e.add(DecoratedTree::unit(), X, Rational(1));
  EXPECT_EQ(h.coproduct(X), e);
}

TEST(Algebra, CoproductTaylorTermsEnumerated) {
  // deg I(I(z)z) = 1 - 0 + ... = 1: Taylor terms with |l+m|_s < 1 only.
  HopfStructure h(she_exact());
  auto t = DecoratedTree::planted(kI, parse_tree("z1 I[1,(0,0)](z1)"));
  ASSERT_EQ(h.degree(t), Rational(1));
  auto d = h.coproduct(t);
  int taylor = 0;
  for (const auto& [k, c] : d)
    if (k.first.is_polynomial() && !k.second.is_unit()) ++taylor;
  EXPECT_EQ(taylor, 1);
  // deg I(z) the Taylor part is X^l/l! (x) I+_{l}, with no X on the right.
  DegreeAssignment d2;
  d2.noise_degrees = {Rational(0), Rational(-1, 2)};
  HopfStructure h2(d2);
  auto s = DecoratedTree::planted(kI, DecoratedTree::noise(1));
  ASSERT_EQ(h2.degree(s), Rational(3, 2));
  auto ds = h2.coproduct(s);
  EXPECT_EQ(ds.coeff(DecoratedTree::poly({0, 1}), DecoratedTree::unit().with_root(NodeDeco{})), Rational(0));
  EXPECT_EQ(ds.coeff(DecoratedTree::poly({0, 1}), DecoratedTree::planted({1, {0, 1}}, DecoratedTree::noise(1))),
            Rational(1));
  EXPECT_EQ(ds.coeff(DecoratedTree::unit(),
                     tree_product(DecoratedTree::poly({0, 1}), DecoratedTree::planted({1, {0, 1}}, DecoratedTree::noise(1)))),
            Rational(0));
  EXPECT_EQ(ds.coeff(DecoratedTree::unit(), DecoratedTree::planted(kI, DecoratedTree::noise(1))), Rational(1));
}

TEST(Algebra, CoproductIsMultiplicative) {
  HopfStructure h(she_exact());
  auto a = parse_tree("z1 I[1,(0,0)](z1)");
  auto b = DecoratedTree::planted(kI, a);
  auto c = Iz();
  EXPECT_EQ(h.coproduct(tree_product(a, b)), h.coproduct(a) * h.coproduct(b));
  EXPECT_EQ(h.coproduct(tree_product(c, b)), h.coproduct(c) * h.coproduct(b));
}

TEST(Algebra, CoassociativityOnGeneratedTrees) {
  for (const char* file : {"she.json", "gkpz.json"}) {
    auto spec = testutil::load(file);
    HopfStructure h(spec.degrees());
    for (const auto& t : generated(file, 6)) EXPECT_EQ(left_coassoc(h, t), right_coassoc(h, t)) << to_string(t);
  }
}

TEST(Algebra, AntipodeExamples) {
  HopfStructure h(she_exact());
  EXPECT_EQ(h.antipode_plus(DecoratedTree::unit()), LinComb<Rational>(DecoratedTree::unit()));
  auto X = DecoratedTree::poly({0, 1});
  EXPECT_EQ(h.antipode_plus(X), LinComb<Rational>(X, Rational(-1)));
  EXPECT_THROW(h.antipode_plus(DecoratedTree::noise(1)), std::invalid_argument);
  // I+(z z) with deg(I(z)z) + 2 = 1 > 0 but I+ of a negative planted tree is rejected.
  DegreeAssignment d;
  d.noise_degrees = {Rational(0), Rational(-5, 2)};
  HopfStructure h2(d);
  EXPECT_THROW(h2.antipode_plus(Iz()), std::invalid_argument);
}

TEST(Algebra, AntipodeIdentityOnPositiveElements) {
  for (const char* file : {"she.json", "gkpz.json"}) {
    auto spec = testutil::load(file);
    HopfStructure h(spec.degrees());
    std::set<DecoratedTree> plus;
    for (const auto& t : generated(file, 6))
      for (const auto& [k, c] : h.coproduct(t))
        if (k.second.node_count() <= 5) plus.insert(k.second);
    ASSERT_GT(plus.size(), 3u);
    for (const auto& t : plus) {
      LinComb<Rational> left, right;
      for (const auto& [k, c] : h.coproduct_plus(t)) {
        left.add(h.antipode_plus(k.first) * LinComb<Rational>(k.second), c);
        right.add(LinComb<Rational>(k.first) * h.antipode_plus(k.second), c);
      }
      LinComb<Rational> eps;
      eps.add(DecoratedTree::unit(), counit(t));
      EXPECT_EQ(left, eps) << to_string(t);
      EXPECT_EQ(right, eps) << to_string(t);
    }
  }
}

TEST(Algebra, DeltaRExamples) {
  HopfStructure h(she_exact());
  TensorSum<Rational> e0;
  e0.add(DecoratedTree::unit(), DecoratedTree::unit(), Rational(1));
  EXPECT_EQ(h.delta_r(DecoratedTree::unit()), e0);

  auto z = DecoratedTree::noise(1);
  TensorSum<Rational> e1;
  e1.add(DecoratedTree::unit(), z, Rational(1));
  e1.add(z, DecoratedTree::unit(), Rational(1));
  EXPECT_EQ(h.delta_r(z), e1);

  auto t = parse_tree("z1 I[1,(0,0)](z1)");
  TensorSum<Rational> e2;
  e2.add(DecoratedTree::unit(), t, Rational(1));
  e2.add(z, Iz(), Rational(1));
  e2.add(t, DecoratedTree::unit(), Rational(1));
  EXPECT_EQ(h.delta_r(t), e2);
}

TEST(Algebra, DeltaRCountMatchesBruteForce) {
  for (const char* file : {"she.json", "gkpz.json"}) {
    auto spec = testutil::load(file);
    HopfStructure h(spec.degrees());
    for (const auto& t : generated(file, 7)) {
      Rational total(0);
      for (const auto& [k, c] : h.delta_r(t)) total += c;
      EXPECT_EQ(total, Rational(brute_negative_root_subtrees(t, spec.degrees()) + 1)) << to_string(t);
    }
  }
}

TEST(Algebra, DeltaRSplitsPolynomials) {
  HopfStructure h(she_exact());
  auto t = parse_tree("X^(0,2)z1");
  auto d = h.delta_r(t);
  // X^p z1 with deg <= 0 is kept for p in {0, 1}: 2 weights binom(2,p).
  EXPECT_EQ(d.coeff(DecoratedTree::noise(1), DecoratedTree::poly({0, 2})), Rational(1));
  EXPECT_EQ(d.coeff(parse_tree("X^(0,1)z1"), DecoratedTree::poly({0, 1})), Rational(2));
  EXPECT_EQ(d.coeff(t, DecoratedTree::unit()), Rational(0));
}

TEST(Algebra, GraftExamples) {
  auto z = DecoratedTree::noise(1);
  auto t = parse_tree("z1 I[1,(0,1)](z1)");
  EXPECT_EQ(graft(DecoratedTree::unit(), t), LinComb<Rational>(t));
  EXPECT_EQ(graft(Iz(), z), LinComb<Rational>(parse_tree("z1 I[1,(0,0)](z1)")));
  auto g = graft(Iz(), t);
  LinComb<Rational> e;
  e.add(parse_tree("z1 I[1,(0,0)](z1) I[1,(0,1)](z1)"), Rational(1));
  e.add(parse_tree("z1 I[1,(0,1)](z1 I[1,(0,0)](z1))"), Rational(1));
  EXPECT_EQ(g, e);
  auto gp = graft(DecoratedTree::poly({0, 1}), t);
  LinComb<Rational> ep;
  ep.add(parse_tree("X^(0,1)z1 I[1,(0,1)](z1)"), Rational(1));
  ep.add(parse_tree("z1 I[1,(0,1)](X^(0,1)z1)"), Rational(1));
  EXPECT_EQ(gp, ep);
  // X^(0,2) split over two nodes carries the binomial weight 2
  auto g2 = graft(DecoratedTree::poly({0, 2}), t);
  EXPECT_EQ(g2.coeff(parse_tree("X^(0,1)z1 I[1,(0,1)](X^(0,1)z1)")), Rational(2));
  EXPECT_EQ(g2.coeff(parse_tree("X^(0,2)z1 I[1,(0,1)](z1)")), Rational(1));
}

TEST(Algebra, GraftDegreeBookkeeping) {
  auto spec = testutil::load("gkpz.json");
  auto d = spec.degrees();
  auto trees = generated("gkpz.json", 4);
  for (const auto& s : trees) {
    if (s.root().noise != 0) continue;
    for (const auto& t : trees)
      for (const auto& [r, c] : graft(s, t)) EXPECT_EQ(degree(r, d), degree(s, d) + degree(t, d));
  }
}

TEST(Algebra, CharacterConvolutionWithCounit) {
  auto spec = testutil::load("gkpz.json");
  auto basis = generate_basis(spec);
  HopfStructure h(spec.degrees());
  PointCharacter<Rational> l, eps;
  int i = 1;
  for (const auto& t : basis.minus_list()) l.set(t, Rational(i++, 7));
  auto a = char_convolve(l, eps, basis.minus_list(), h);
  auto b = char_convolve(eps, l, basis.minus_list(), h);
  for (const auto& t : basis.minus_list()) {
    EXPECT_EQ(a(t), l(t));
    EXPECT_EQ(b(t), l(t));
  }
  EXPECT_EQ(l(std::vector<DecoratedTree>{basis.minus_list()[0], basis.minus_list()[1]}),
            l(basis.minus_list()[0]) * l(basis.minus_list()[1]));
}

TEST(Algebra, CharacterConvolutionByHand) {
  // l(z) = 2, lbar(z I(z)) = 3, lbar(I(z)) = 5: (l o lbar)(z I(z)) = l(z) lbar(I(z)) + lbar(z I(z)).
  HopfStructure h(she_exact());
  auto z = DecoratedTree::noise(1);
  auto t = parse_tree("z1 I[1,(0,0)](z1)");
  PointCharacter<Rational> l, lb;
  l.set(z, Rational(2));
  lb.set(t, Rational(3));
  lb.set(Iz(), Rational(5));
  auto m = char_convolve(l, lb, {t}, h);
  EXPECT_EQ(m(t), Rational(2 * 5 + 3));
}
