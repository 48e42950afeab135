#include <set>

#include <gtest/gtest.h>

#include "locrs/rules.hpp"
#include "test_util.hpp"

using namespace locrs;

namespace {

EquationSpec she_with(const std::string& a, const std::string& alpha, const std::string& gamma = "1/10") {
  return load_spec(nlohmann::json::parse(R"({"components": [{"a": ")" + a + R"(", "f": {"1": "abstract"}}],
      "noises": [{"alpha": ")" + alpha + R"("}], "kappa": "1/100", "gamma": ")" + gamma + R"(", "max_nodes": 8})"));
}

bool has_code(const std::vector<Diagnostic>& ds, const std::string& code) {
  for (const auto& d : ds)
    if (d.code == code && d.level == Diagnostic::Level::Error) return true;
  return false;
}

// Every zeta_1-rooted tree with I_(1,0) edges and at most n nodes.
std::set<DecoratedTree> brute_she(std::size_t n) {
  std::set<DecoratedTree> level{DecoratedTree::noise(1)};
  std::set<DecoratedTree> all = level;
  bool grew = true;
  while (grew) {
    grew = false;
    std::set<DecoratedTree> next;
    for (const auto& t : all)
      for (const auto& s : all) {
        auto g = tree_product(t, DecoratedTree::planted({1, {0, 0}}, s));
        if (g.node_count() <= n && !all.count(g)) next.insert(g);
      }
    for (const auto& t : next) grew = all.insert(t).second || grew;
  }
  return all;
}

} // namespace

TEST(Rules, SheMinusTrees) {
  auto basis = generate_basis(testutil::load("she.json"));
  std::map<DecoratedTree, Rational> minus;
  for (const auto& e : basis.minus) minus[e.tree] = e.degree;
  const Rational k(1, 100);
  EXPECT_EQ(minus.at(parse_tree("z1")), Rational(-3, 2) - k);
  EXPECT_EQ(minus.at(parse_tree("z1 I[1,(0,0)](z1)")), Rational(-1) - Rational(2) * k);
  EXPECT_EQ(minus.at(parse_tree("z1 I[1,(0,0)](z1) I[1,(0,0)](z1)")), Rational(-1, 2) - Rational(3) * k);
  EXPECT_EQ(minus.at(parse_tree("z1 I[1,(0,0)](z1) I[1,(0,0)](z1) I[1,(0,0)](z1)")), Rational(-4) * k);
  for (const auto& e : basis.minus) {
    EXPECT_GE(e.tree.noise_count(), 1);
    EXPECT_LE(e.degree, Rational(0));
  }
}

TEST(Rules, SheMatchesBruteForce) {
  auto spec = testutil::load("she.json");
  spec.max_nodes = 6;
  auto basis = generate_basis(spec);
  std::set<DecoratedTree> expected;
  for (const auto& t : brute_she(6))
    if (degree(t, spec.degrees()) < spec.gamma) expected.insert(t);
  std::set<DecoratedTree> got;
  for (const auto& e : basis.rhs.at(1)) got.insert(e.tree);
  EXPECT_EQ(got, expected);
}

TEST(Rules, SortedAndDeterministic) {
  auto spec = testutil::load("gkpz.json");
  auto a = generate_basis(spec), b = generate_basis(spec);
  ASSERT_EQ(a.trees.size(), b.trees.size());
  for (std::size_t i = 0; i < a.trees.size(); ++i) EXPECT_EQ(a.trees[i].tree, b.trees[i].tree);
  for (std::size_t i = 1; i < a.trees.size(); ++i) EXPECT_LE(a.trees[i - 1].degree, a.trees[i].degree);
}

TEST(Rules, GkpzUsesGradientEdges) {
  auto basis = generate_basis(testutil::load("gkpz.json"));
  EXPECT_TRUE(basis.contains(parse_tree("z0 I[1,(0,1)](z1) I[1,(0,1)](z1)")));
  EXPECT_FALSE(basis.contains(parse_tree("z0 I[1,(0,1)](z1) I[1,(0,1)](z1) I[1,(0,1)](z1)")));
}

TEST(Rules, CutoffBelowEveryDegree) {
  auto basis = generate_basis(she_with("2", "-3/2", "-2"));
  for (const auto& e : basis.trees) EXPECT_TRUE(e.tree.is_polynomial()) << to_string(e.tree);
  EXPECT_TRUE(basis.minus.empty());
}

TEST(Rules, NoNoisesGivesPolynomials) {
  auto spec = load_spec(nlohmann::json::parse(R"({"components": [{"a": "1"}], "noises": []})"));
  auto basis = generate_basis(spec);
  ASSERT_FALSE(basis.trees.empty());
  for (const auto& e : basis.trees) EXPECT_TRUE(e.tree.is_polynomial());
}

TEST(Rules, Validation) {
  EXPECT_FALSE(has_errors(validate_spec(she_with("2 + sin(x1)", "-3/2"))));
  EXPECT_TRUE(has_code(validate_spec(she_with("sin(x1)", "-3/2")), "ellipticity"));
  EXPECT_TRUE(has_code(validate_spec(she_with("1", "-2")), "subcriticality"));
  EXPECT_TRUE(has_code(validate_spec(she_with("2 + x0", "-3/2")), "coefficients"));
  EXPECT_THROW(generate_basis(she_with("sin(x1)", "-3/2")), SpecError);
}

TEST(Rules, MalformedSpecs) {
  EXPECT_THROW(load_spec(nlohmann::json::parse(R"({"noises": []})")), SpecError);
  EXPECT_THROW(load_spec(nlohmann::json::parse(R"({"components": [{"a": "2 +"}]})")), SpecError);
  EXPECT_THROW(load_spec(nlohmann::json::parse(R"({"components": [{"f": {"2": "u"}}], "noises": [{"alpha": "-1"}]})")),
               SpecError);
  EXPECT_THROW(load_spec_file(testutil::spec_path("does_not_exist.json")), SpecError);
}

TEST(Rules, PolynomialNonlinearityCapsFanIn) {
  auto spec = testutil::load("she_quadratic.json");
  auto basis = generate_basis(spec);
  // f = u^2/2 has vanishing third derivative: no node with three children.
  for (const auto& e : basis.trees) {
    std::function<bool(const DecoratedTree&)> ok = [&](const DecoratedTree& t) {
      if (t.children().size() > 2) return false;
      for (const auto& b : t.children())
        if (!ok(b.tree)) return false;
      return true;
    };
    EXPECT_TRUE(ok(e.tree)) << to_string(e.tree);
  }
}
