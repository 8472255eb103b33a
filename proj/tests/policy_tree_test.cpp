#include <cmath>

#include <gtest/gtest.h>

#include "fuzzyrl/gp_operators.hpp"
#include "fuzzyrl/pso.hpp"

using namespace fuzzyrl;
using namespace fuzzyrl::gp;

namespace {

PolicyTree minimal_tree(double alpha = 1.0, double o = 0.5) {
  return {{Node::make(NodeKind::Policy), Node::constant(NodeKind::Slope, alpha), Node::make(NodeKind::Rule),
           Node::make(NodeKind::DimEnd), Node::constant(NodeKind::Consequent, o), Node::make(NodeKind::RuleEnd)}};
}

FixedStructure uniform_structure(std::size_t actions, std::size_t dims, std::size_t rules) {
  std::vector<std::vector<std::size_t>> feats(actions);
  for (auto& f : feats)
    for (std::size_t d = 0; d < dims; ++d) f.push_back(d);
  return make_structure(feats, rules, std::vector<Interval>(actions, Interval{-1, 1}));
}

int fixed_complexity(std::size_t actions, std::size_t dims, std::size_t rules) {
  auto s = uniform_structure(actions, dims, rules);
  std::vector<double> v(parameter_count(s), 0.5);
  return complexity(from_policy(decode(v, s)));
}

}  // namespace

TEST(Complexity, MinimalTree) { EXPECT_EQ(complexity(minimal_tree()), 12); }

TEST(Complexity, SingleActionFourDims) {
  EXPECT_EQ(fixed_complexity(1, 4, 2), 63);
  EXPECT_EQ(fixed_complexity(1, 4, 4), 125);
  EXPECT_EQ(fixed_complexity(1, 4, 6), 187);
  EXPECT_EQ(fixed_complexity(1, 4, 8), 249);
}

TEST(Complexity, ThreeActionsTwoRules) {
  EXPECT_EQ(fixed_complexity(3, 1, 2), 99);
  EXPECT_EQ(fixed_complexity(3, 2, 2), 129);
  EXPECT_EQ(fixed_complexity(3, 3, 2), 159);
  EXPECT_EQ(fixed_complexity(3, 4, 2), 189);
}

TEST(Complexity, TreeAndPolicyAgree) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    TreeLimits lim{5, 2, 4, 4, {}};
    auto t = tree_correction(random_tree(rng, lim));
    ASSERT_EQ(complexity(t), complexity(to_policy(t, {{-1, 1}, {-1, 1}})));
  }
}

TEST(TypeCheck, AcceptsWellFormedTree) { EXPECT_TRUE(well_typed(minimal_tree(), 1, 1)); }

TEST(TypeCheck, RejectsSlotMismatch) {
  auto t = minimal_tree();
  t.nodes[1] = Node::constant(NodeKind::Center, 0.1);
  EXPECT_FALSE(well_typed(t, 1, 1));
}

TEST(TypeCheck, RejectsVariableOutOfRange) {
  PolicyTree t{{Node::make(NodeKind::Policy), Node::constant(NodeKind::Slope, 1), Node::make(NodeKind::Rule),
                Node::make(NodeKind::Dim), Node::var(3), Node::constant(NodeKind::Center, 0),
                Node::constant(NodeKind::Width, 1), Node::make(NodeKind::DimEnd),
                Node::constant(NodeKind::Consequent, 0), Node::make(NodeKind::RuleEnd)}};
  EXPECT_TRUE(well_typed(t, 4, 1));
  EXPECT_FALSE(well_typed(t, 3, 1));
}

TEST(TypeCheck, RejectsNonPositiveWidthAndNonFinite) {
  auto t = minimal_tree(0.0);
  EXPECT_FALSE(well_typed(t, 1, 1));
  t = minimal_tree(1.0, NAN);
  EXPECT_FALSE(well_typed(t, 1, 1));
}

TEST(TypeCheck, RejectsTruncationAndRootCount) {
  auto t = minimal_tree();
  t.nodes.pop_back();
  EXPECT_FALSE(well_typed(t, 1, 1));
  auto two = minimal_tree();
  two.nodes.insert(two.nodes.end(), two.nodes.begin(), two.nodes.end());
  EXPECT_TRUE(well_typed(two, 1, 2));
  EXPECT_FALSE(well_typed(two, 1, 1));
}

TEST(TypeCheck, RejectsEmptyRuleChain) {
  PolicyTree t{{Node::make(NodeKind::Policy), Node::constant(NodeKind::Slope, 1), Node::make(NodeKind::RuleEnd)}};
  EXPECT_FALSE(well_typed(t, 1, 1));
  EXPECT_TRUE(has_empty_policy(t));
}

TEST(Conversion, RoundTripThroughPolicy) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    auto t = random_tree(rng, {3, 2, 4, 3, {}});
    ASSERT_EQ(from_policy(to_policy(t, {{-1, 1}, {-2, 2}})), t);
  }
}

TEST(Conversion, InterpretMatchesPolicyOutput) {
  Rng rng(3);
  const std::vector<Interval> bounds{{-30, 30}, {-1, 2}};
  const StateScaling scaling{{-2, -5, -1, 0}, {2, 5, 3, 10}};
  for (int i = 0; i < 1000; ++i) {
    auto t = random_tree(rng, {4, 2, 4, 4, {}});
    State s(4);
    for (auto& x : s) x = uniform(rng, -5, 5);
    const auto direct = interpret(t, bounds, scaling, s);
    const auto via = policy_output(to_policy(t, bounds, scaling), s);
    ASSERT_EQ(direct.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) ASSERT_NEAR(direct[k], via[k], 1e-12);
  }
}

TEST(Conversion, RootCountMustMatchBounds) {
  EXPECT_THROW(to_policy(minimal_tree(), {{-1, 1}, {-1, 1}}), StructureError);
}

TEST(Fingerprint, IgnoresConstants) {
  EXPECT_EQ(structure_fingerprint(minimal_tree(1.0, 0.5)), structure_fingerprint(minimal_tree(2.0, -1.0)));
  auto t = minimal_tree();
  t.nodes.insert(t.nodes.begin() + 2, t.nodes.begin() + 2, t.nodes.begin() + 5);
  EXPECT_NE(structure_fingerprint(t), structure_fingerprint(minimal_tree()));
}

TEST(Inspection, ConstantIndicesAndDuplicates) {
  EXPECT_EQ(constant_indices(minimal_tree()), (std::vector<std::size_t>{1, 4}));
  PolicyTree t{{Node::make(NodeKind::Policy), Node::constant(NodeKind::Slope, 1), Node::make(NodeKind::Rule),
                Node::make(NodeKind::Dim), Node::var(0), Node::constant(NodeKind::Center, 0),
                Node::constant(NodeKind::Width, 1), Node::make(NodeKind::Dim), Node::var(0),
                Node::constant(NodeKind::Center, 1), Node::constant(NodeKind::Width, 1),
                Node::make(NodeKind::DimEnd), Node::constant(NodeKind::Consequent, 0), Node::make(NodeKind::RuleEnd)}};
  EXPECT_TRUE(has_duplicate_variables(t));
  EXPECT_FALSE(has_duplicate_variables(minimal_tree()));
}
