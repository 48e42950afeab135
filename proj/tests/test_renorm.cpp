#include <random>

#include <gtest/gtest.h>

#include "locrs/renorm.hpp"
#include "test_util.hpp"

using namespace locrs;

namespace {

const DecoratedTree kZ = DecoratedTree::noise(1);
const DecoratedTree kOne = DecoratedTree::unit();

DecoratedTree tree(const char* s) { return parse_tree(s); }

struct Env {
  EquationSpec spec;
  Basis basis;
  HopfStructure h;
  explicit Env(const std::string& file)
      : spec(testutil::load(file)), basis(generate_basis(spec)), h(spec.degrees()) {}
};

std::vector<DecoratedTree> up_to(const Basis& b, std::size_t nodes) {
  std::vector<DecoratedTree> out;
  for (const auto& e : b.trees)
    if (e.tree.node_count() <= nodes) out.push_back(e.tree);
  return out;
}

PointCharacter<Rational> random_character(const Basis& b, std::mt19937& rng) {
  std::uniform_int_distribution<int> num(-5, 5), den(1, 4);
  PointCharacter<Rational> l;
  for (const auto& t : b.minus_list())
    if (int n = num(rng); n != 0) l.set(t, Rational(n, den(rng)));
  return l;
}

} // namespace

TEST(PreparationMap, IdentityAndCounit) {
  Env s("she.json");
  auto id = PreparationMap<Rational>::identity(s.h);
  auto eps = PreparationMap<Rational>::from_character(s.h, PointCharacter<Rational>{});
  for (const auto& t : s.basis.tree_list()) {
    EXPECT_EQ(id.apply(t), LinComb<Rational>(t));
    EXPECT_EQ(eps.apply(t), LinComb<Rational>(t));
    EXPECT_EQ(eps.dual(t), LinComb<Rational>(t));
  }
}

TEST(PreparationMap, SingleTreeCharacter) {
  Env s("she.json");
  auto tau = tree("z1 I[1,(0,0)](z1)");
  PointCharacter<SymbolPoly> l;
  l.set(tau, SymbolPoly::symbol("c(x)"));
  auto R = PreparationMap<SymbolPoly>::from_character(s.h, l);
  LinComb<SymbolPoly> expected(tau);
  expected.add(kOne, SymbolPoly::symbol("c(x)"));
  EXPECT_EQ(R.apply(tau), expected);
  EXPECT_EQ(R.dual(kZ), LinComb<SymbolPoly>(kZ));
  LinComb<SymbolPoly> dual_one(kOne);
  dual_one.add(tau, SymbolPoly::symbol("c(x)"));
  EXPECT_EQ(R.dual(kOne), dual_one);
}

TEST(PreparationMap, RejectsSupportOutsideMinus) {
  Env s("she.json");
  PointCharacter<Rational> l;
  l.set(DecoratedTree::planted({1, {0, 0}}, kZ), Rational(1));
  EXPECT_THROW(PreparationMap<Rational>::from_character(s.h, l), std::invalid_argument);
}

TEST(PreparationMap, DualPairing) {
  // <R v, tau> = <v, R* tau> with <t, s> = S(t) delta_{ts}
  Env s("she.json");
  std::mt19937 rng(7);
  auto R = PreparationMap<Rational>::from_character(s.h, random_character(s.basis, rng));
  auto trees = s.basis.tree_list();
  std::uniform_int_distribution<std::size_t> pick(0, trees.size() - 1);
  std::uniform_int_distribution<int> coef(-3, 3);
  auto pair = [](const LinComb<Rational>& a, const LinComb<Rational>& b) {
    Rational r(0);
    for (const auto& [t, c] : a) r += c * b.coeff(t) * Rational(static_cast<std::int64_t>(symmetry_factor(t)));
    return r;
  };
  for (int trial = 0; trial < 50; ++trial) {
    LinComb<Rational> v;
    for (int j = 0; j < 3; ++j) v.add(trees[pick(rng)], Rational(coef(rng)));
    DecoratedTree tau = trees[pick(rng)];
    EXPECT_EQ(pair(R.apply(v), LinComb<Rational>(tau)), pair(v, R.dual(tau))) << to_string(tau);
  }
}

TEST(PreparationMap, AnalyticFormAndCommutation) {
  for (const char* file : {"she.json", "gkpz.json"}) {
    Env s(file);
    std::mt19937 rng(11);
    auto R = PreparationMap<Rational>::from_character(s.h, random_character(s.basis, rng));
    auto trees = up_to(s.basis, 6);
    EXPECT_TRUE(check_analytic(R, trees, s.h).empty()) << file;
    auto bad = check_commutation(R, trees, s.h);
    EXPECT_FALSE(bad.has_value()) << file << ": " << to_string(*bad);
  }
}

TEST(PreparationMap, StrongForCharacters) {
  for (const char* file : {"she.json", "gkpz.json"}) {
    Env s(file);
    std::mt19937 rng(3);
    auto R = PreparationMap<Rational>::from_character(s.h, random_character(s.basis, rng));
    R.set_node_cap(s.spec.max_nodes);
    auto w = check_strong(R, s.basis.tree_list(), s.spec.gamma, s.h);
    EXPECT_FALSE(w.has_value()) << file << ": sigma=" << to_string(w->sigma) << " tau=" << to_string(w->tau);
    // a generous cutoff admits planted and polynomial sigma
    auto wide = check_strong(R, up_to(s.basis, 4), Rational(3), s.h);
    EXPECT_FALSE(wide.has_value()) << file << ": sigma=" << to_string(wide->sigma) << " tau=" << to_string(wide->tau)
                                   << "\nlhs=" << wide->lhs << "\nrhs=" << wide->rhs;
  }
}

TEST(PreparationMap, AdversarialMapIsNotStrong) {
  Env s("she.json");
  auto target = tree("z1 I[1,(0,0)](z1) I[1,(0,0)](z1)");
  auto R = PreparationMap<Rational>::custom(
      s.h,
      [&](const DecoratedTree& t) {
        LinComb<Rational> v(t);
        if (t == target) v.add(kOne, Rational(1));
        return v;
      },
      s.basis.tree_list());
  R.set_node_cap(s.spec.max_nodes);
  EXPECT_TRUE(check_analytic(R, s.basis.tree_list(), s.h).empty());
  auto w = check_strong(R, up_to(s.basis, 4), Rational(3), s.h);
  ASSERT_TRUE(w.has_value());
  EXPECT_NE(w->lhs, w->rhs);
}

TEST(PreparationMap, GroupLawOrder) {
  // R_l R_lbar against R_{l o lbar} and R_{lbar o l}, l o lbar = (l (x) lbar) delta_r
  for (const char* file : {"she.json", "gkpz.json"}) {
    Env s(file);
    std::mt19937 rng(5);
    auto minus = s.basis.minus_list();
    for (int trial = 0; trial < 10; ++trial) {
      auto l = random_character(s.basis, rng);
      auto lbar = random_character(s.basis, rng);
      auto Rl = PreparationMap<Rational>::from_character(s.h, l);
      auto Rlbar = PreparationMap<Rational>::from_character(s.h, lbar);
      auto Rcomp = PreparationMap<Rational>::from_character(s.h, char_convolve(lbar, l, minus, s.h));
      for (const auto& t : s.basis.tree_list())
        EXPECT_EQ(Rl.apply(Rlbar.apply(t)), Rcomp.apply(t)) << file << " " << to_string(t);
    }
  }
}

TEST(Counterterms, IdentityGivesNone) {
  Env s("she.json");
  auto R = PreparationMap<SymbolPoly>::identity(s.h);
  EXPECT_TRUE(counter_terms(s.spec, s.basis, R).empty());
}

TEST(Counterterms, SheSingleTree) {
  Env s("she.json");
  PointCharacter<SymbolPoly> l;
  l.set(tree("z1 I[1,(0,0)](z1)"), SymbolPoly::symbol("c(x)"));
  auto R = PreparationMap<SymbolPoly>::from_character(s.h, l);
  auto terms = counter_terms(s.spec, s.basis, R);
  ASSERT_EQ(terms.size(), 1u);
  EXPECT_EQ(terms[0].noise, 0);
  EXPECT_EQ(terms[0].coefficient, SymbolPoly::symbol("c(x)"));
  auto f = SymbolicFunction::function("f", {{1, {0, 0}}});
  EXPECT_EQ(terms[0].function, f.derivative({1, {0, 0}}) * f);
  auto eq = renormalized_equation_latex(s.spec, terms);
  ASSERT_EQ(eq.size(), 1u);
  EXPECT_EQ(eq[0], "\\left(\\partial_{x_0} - L\\right) u = f(u)\\,\\xi_{1} + c(x)\\, f'(u) f(u)");
}

TEST(Counterterms, SymmetryFactorDividesCoefficient) {
  Env s("she.json");
  PointCharacter<SymbolPoly> l;
  l.set(tree("z1 I[1,(0,0)](z1) I[1,(0,0)](z1)"), SymbolPoly::symbol("c"));
  auto R = PreparationMap<SymbolPoly>::from_character(s.h, l);
  auto terms = counter_terms(s.spec, s.basis, R);
  bool found = false;
  for (const auto& t : terms)
    if (t.tree == tree("z1 I[1,(0,0)](z1) I[1,(0,0)](z1)")) {
      found = true;
      EXPECT_EQ(t.coefficient, SymbolPoly(Rational(1, 2)) * SymbolPoly::symbol("c"));
    }
  EXPECT_TRUE(found);
}

TEST(Counterterms, NoNoiseFactorsForCharacterMaps) {
  Env s("gkpz.json");
  PointCharacter<SymbolPoly> l;
  for (const auto& t : s.basis.minus_list()) l.set(t, SymbolPoly::symbol("c_" + std::to_string(t.node_count())));
  auto R = PreparationMap<SymbolPoly>::from_character(s.h, l);
  for (const auto& t : counter_terms(s.spec, s.basis, R)) EXPECT_EQ(t.noise, 0) << to_string(t.tree);
}

TEST(Counterterms, RefusesMapsMovingPlantedTrees) {
  Env s("she.json");
  auto planted = DecoratedTree::planted({1, {0, 0}}, kZ);
  auto R = PreparationMap<SymbolPoly>::custom(
      s.h,
      [&](const DecoratedTree& t) {
        LinComb<SymbolPoly> v(t);
        if (t == planted) v.add(kOne, SymbolPoly(1));
        return v;
      },
      s.basis.tree_list());
  EXPECT_THROW(counter_terms(s.spec, s.basis, R), HypothesisError);
}

TEST(Character, JsonValues) {
  auto c = Character::from_json(nlohmann::json::parse(
      R"J({"values": [{"tree": "z1 I[1,(0,0)](z1)", "value": "c(x)"}, {"tree": "z1", "value": "-1/2"},
                     {"tree": "z1 I[1,(0,0)](z1) I[1,(0,0)](z1)", "value": "sin(x1)"}]})J"));
  ASSERT_EQ(c.values().size(), 3u);
  EXPECT_EQ(c.values().at(tree("z1 I[1,(0,0)](z1)")).kind, CharValue::Kind::Symbol);
  EXPECT_EQ(c.values().at(tree("z1")).constant, Rational(-1, 2));
  EXPECT_NEAR(c.values().at(tree("z1 I[1,(0,0)](z1) I[1,(0,0)](z1)")).at(0, 1.0), std::sin(1.0), 1e-15);
  EXPECT_THROW(c.at(0, 0), std::invalid_argument);
  auto round = Character::from_json(c.to_json());
  EXPECT_EQ(round.values().size(), 3u);
}

TEST(Bphz, RecursionBaseAndZeroNoise) {
  Env s("she.json");
  auto minus = s.basis.minus_list();
  // Pi^{R_l} tau = l(tau) + (value with l(tau) = 0); zero noise makes every tree vanish.
  ModelEvaluator zero = [](const DecoratedTree&, const GridCharacter&) { return std::vector<double>(4, 0.0); };
  for (const auto& [t, v] : bphz_character(minus, {zero}))
    for (double x : v) EXPECT_EQ(x, 0.0);
  std::vector<double> xi{0.5, -1.0, 2.0, 0.0};
  ModelEvaluator noise_only = [&](const DecoratedTree& t, const GridCharacter&) {
    return t == kZ ? xi : std::vector<double>(4, 0.0);
  };
  auto ell = bphz_character(minus, {noise_only});
  for (std::size_t k = 0; k < xi.size(); ++k) EXPECT_EQ(ell.at(kZ)[k], -xi[k]);
}

TEST(Character, ExpressionsAreNotReadAsNumbers) {
  auto v = CharValue::from_json("0.4*cos(x1) + 2*x0");
  EXPECT_EQ(v.kind, CharValue::Kind::Expression);
  EXPECT_NEAR(v.at(0.5, 0.0), 1.4, 1e-15);
  EXPECT_EQ(CharValue::from_json("3/4").kind, CharValue::Kind::Constant);
}
