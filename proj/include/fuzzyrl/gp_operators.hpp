#pragma once

// Variation operators on policy trees: random generation, type-safe subtree
// crossover, Gaussian constant mutation and duplicate-variable correction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fuzzyrl/policy_tree.hpp"

namespace fuzzyrl::gp {

struct TreeLimits {
  std::size_t state_dim = 1;
  std::size_t action_dim = 1;
  std::size_t max_rules = 4;
  std::size_t max_dims = 4;
  TerminalBox box;
};

inline const Interval& range_of(const TerminalBox& box, NodeKind k) {
  switch (k) {
    case NodeKind::Center: return box.center;
    case NodeKind::Width: return box.width;
    case NodeKind::Consequent: return box.consequent;
    default: return box.slope;
  }
}

/// Uniform rule count in [1, max_rules] and clause count in [0, max_dims] per
/// rule, variables uniform over the state, constants uniform in their box.
inline PolicyTree random_tree(Rng& rng, const TreeLimits& limits) {
  if (limits.max_rules < 1) throw StructureError("max_rules must be at least 1");
  if (limits.state_dim < 1) throw StructureError("state_dim must be at least 1");
  std::uniform_int_distribution<std::size_t> rules_dist(1, limits.max_rules);
  std::uniform_int_distribution<std::size_t> dims_dist(0, limits.max_dims);
  std::uniform_int_distribution<std::size_t> var_dist(0, limits.state_dim - 1);
  auto constant = [&](NodeKind k) {
    const auto& iv = range_of(limits.box, k);
    return Node::constant(k, uniform(rng, iv.lo, iv.hi));
  };
  PolicyTree tree;
  auto& n = tree.nodes;
  for (std::size_t a = 0; a < limits.action_dim; ++a) {
    n.push_back(Node::make(NodeKind::Policy));
    n.push_back(constant(NodeKind::Slope));
    const std::size_t rules = rules_dist(rng);
    for (std::size_t r = 0; r < rules; ++r) {
      n.push_back(Node::make(NodeKind::Rule));
      const std::size_t dims = dims_dist(rng);
      for (std::size_t d = 0; d < dims; ++d) {
        n.push_back(Node::make(NodeKind::Dim));
        n.push_back(Node::var(var_dist(rng)));
        n.push_back(constant(NodeKind::Center));
        n.push_back(constant(NodeKind::Width));
      }
      n.push_back(Node::make(NodeKind::DimEnd));
      n.push_back(constant(NodeKind::Consequent));
    }
    n.push_back(Node::make(NodeKind::RuleEnd));
  }
  return tree;
}

namespace detail {

inline PolicyTree splice(const PolicyTree& target, std::size_t at, const PolicyTree& donor, std::size_t from) {
  const std::size_t at_end = subtree_end(target.nodes, at);
  const std::size_t from_end = subtree_end(donor.nodes, from);
  PolicyTree out;
  out.nodes.reserve(target.nodes.size() - (at_end - at) + (from_end - from));
  out.nodes.insert(out.nodes.end(), target.nodes.begin(), target.nodes.begin() + at);
  out.nodes.insert(out.nodes.end(), donor.nodes.begin() + from, donor.nodes.begin() + from_end);
  out.nodes.insert(out.nodes.end(), target.nodes.begin() + at_end, target.nodes.end());
  return out;
}

}  // namespace detail

/// Swaps the subtree at `cut_a` in `a` with the one at `cut_b` in `b`.
/// Both cut points must carry the same type.
inline std::pair<PolicyTree, PolicyTree> swap_subtrees(const PolicyTree& a, std::size_t cut_a, const PolicyTree& b,
                                                       std::size_t cut_b) {
  if (type_of(a.nodes.at(cut_a).kind) != type_of(b.nodes.at(cut_b).kind))
    throw StructureError("crossover cut points differ in type");
  return {detail::splice(a, cut_a, b, cut_b), detail::splice(b, cut_b, a, cut_a)};
}

/// Uniform cut in `a`, then a uniform cut of the same type in `b`. Without a
/// compatible cut, or when a child would lose all rules of some action, the
/// children are plain copies.
inline std::pair<PolicyTree, PolicyTree> crossover(const PolicyTree& a, const PolicyTree& b, Rng& rng) {
  if (a.nodes.empty() || b.nodes.empty()) return {a, b};
  const std::size_t cut_a = std::uniform_int_distribution<std::size_t>{0, a.nodes.size() - 1}(rng);
  const NodeType t = type_of(a.nodes[cut_a].kind);
  std::vector<std::size_t> compatible;
  for (std::size_t j = 0; j < b.nodes.size(); ++j)
    if (type_of(b.nodes[j].kind) == t) compatible.push_back(j);
  if (compatible.empty()) return {a, b};
  const std::size_t cut_b = compatible[std::uniform_int_distribution<std::size_t>{0, compatible.size() - 1}(rng)];
  auto children = swap_subtrees(a, cut_a, b, cut_b);
  if (has_empty_policy(children.first) || has_empty_policy(children.second)) return {a, b};
  return children;
}

/// Replaces every constant z by a draw from N(z, max(0.1|z|, 1e-3)), clamped
/// to its role's box. Structure is untouched.
inline PolicyTree gaussian_mutate(const PolicyTree& tree, Rng& rng, const TerminalBox& box = {}) {
  PolicyTree out = tree;
  for (auto& n : out.nodes) {
    if (!is_constant(n.kind)) continue;
    const double stddev = std::max(0.1 * std::abs(n.value), 1e-3);
    const double z = std::normal_distribution<double>{n.value, stddev}(rng);
    n.value = range_of(box, n.kind).clamp(z);
  }
  return out;
}

/// Within each rule keeps only the first clause on every state variable;
/// later duplicates are cut out together with their constants.
inline PolicyTree tree_correction(const PolicyTree& tree) {
  PolicyTree out;
  out.nodes.reserve(tree.nodes.size());
  std::unordered_set<std::uint32_t> seen;
  const auto& n = tree.nodes;
  for (std::size_t i = 0; i < n.size();) {
    if (n[i].kind == NodeKind::Rule) seen.clear();
    if (n[i].kind == NodeKind::Dim && !seen.insert(n[i + 1].variable).second) {
      i += 4;  // drop d, s, c, sigma; the chain continues with the next clause
      continue;
    }
    out.nodes.push_back(n[i]);
    ++i;
  }
  return out;
}

}  // namespace fuzzyrl::gp
