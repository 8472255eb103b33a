#pragma once

// Strongly-typed GP genome for fuzzy policies. A tree is stored as a prefix
// (pre-order) node array; an individual holds one policy root per action
// dimension, laid out consecutively.
//
//   policy     pi(alpha, rule)
//   rule       m(dimension, o, rule) | m_end
//   dimension  d(s, c, sigma, dimension) | d_end

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "fuzzyrl/errors.hpp"
#include "fuzzyrl/fuzzy.hpp"
#include "fuzzyrl/random.hpp"

namespace fuzzyrl::gp {

enum class NodeKind : std::uint8_t { Policy, Rule, RuleEnd, Dim, DimEnd, Variable, Center, Width, Consequent, Slope };

/// Crossover compatibility classes. Floating-point terminals are split by
/// role so that exchanged constants always stay inside their valid range.
enum class NodeType : std::uint8_t { Policy, Rule, Dimension, Variable, Center, Width, Consequent, Slope };

constexpr NodeType type_of(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::Policy: return NodeType::Policy;
    case NodeKind::Rule:
    case NodeKind::RuleEnd: return NodeType::Rule;
    case NodeKind::Dim:
    case NodeKind::DimEnd: return NodeType::Dimension;
    case NodeKind::Variable: return NodeType::Variable;
    case NodeKind::Center: return NodeType::Center;
    case NodeKind::Width: return NodeType::Width;
    case NodeKind::Consequent: return NodeType::Consequent;
    case NodeKind::Slope: return NodeType::Slope;
  }
  return NodeType::Policy;
}

constexpr std::size_t arity(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::Policy: return 2;
    case NodeKind::Rule: return 3;
    case NodeKind::Dim: return 4;
    default: return 0;
  }
}

/// Required type of child `slot` of a node of kind `k`.
constexpr NodeType child_type(NodeKind k, std::size_t slot) noexcept {
  constexpr std::array<NodeType, 2> policy{NodeType::Slope, NodeType::Rule};
  constexpr std::array<NodeType, 3> rule{NodeType::Dimension, NodeType::Consequent, NodeType::Rule};
  constexpr std::array<NodeType, 4> dim{NodeType::Variable, NodeType::Center, NodeType::Width, NodeType::Dimension};
  switch (k) {
    case NodeKind::Policy: return policy[slot];
    case NodeKind::Rule: return rule[slot];
    case NodeKind::Dim: return dim[slot];
    default: return NodeType::Policy;
  }
}

/// Complexity weight of one building block.
constexpr int weight(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::Policy:
    case NodeKind::RuleEnd:
    case NodeKind::DimEnd: return 0;
    case NodeKind::Dim: return 2;
    case NodeKind::Rule: return 10;
    default: return 1;
  }
}

constexpr bool is_constant(NodeKind k) noexcept {
  return k == NodeKind::Center || k == NodeKind::Width || k == NodeKind::Consequent || k == NodeKind::Slope;
}

struct Node {
  NodeKind kind = NodeKind::RuleEnd;
  std::uint32_t variable = 0;  // Variable nodes only
  double value = 0.0;          // constants only

  static Node make(NodeKind k) { return {k, 0, 0.0}; }
  static Node constant(NodeKind k, double v) { return {k, 0, v}; }
  static Node var(std::size_t index) { return {NodeKind::Variable, static_cast<std::uint32_t>(index), 0.0}; }

  friend bool operator==(const Node&, const Node&) = default;
};

struct PolicyTree {
  std::vector<Node> nodes;

  friend bool operator==(const PolicyTree&, const PolicyTree&) = default;
};

/// One past the last node of the subtree rooted at `i`.
inline std::size_t subtree_end(std::span<const Node> nodes, std::size_t i) {
  std::size_t open = 1;
  while (open > 0) {
    if (i >= nodes.size()) throw StructureError("truncated policy tree");
    open += arity(nodes[i].kind);
    --open;
    ++i;
  }
  return i;
}

inline std::vector<std::size_t> root_indices(const PolicyTree& tree) {
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < tree.nodes.size(); i = subtree_end(tree.nodes, i)) roots.push_back(i);
  return roots;
}

inline int complexity(const PolicyTree& tree) {
  int total = 0;
  for (const auto& n : tree.nodes) total += weight(n.kind);
  return total;
}

/// Empty when well-typed; otherwise a description of the first violation.
inline std::optional<std::string> type_error(const PolicyTree& tree, std::size_t state_dim, std::size_t action_dim) {
  std::vector<NodeType> expected;  // stack of required types, top = next node
  std::size_t roots = 0;
  std::size_t i = 0;
  for (; i < tree.nodes.size(); ++i) {
    const Node& n = tree.nodes[i];
    if (expected.empty()) {
      ++roots;
      expected.push_back(NodeType::Policy);
    }
    const NodeType want = expected.back();
    expected.pop_back();
    if (type_of(n.kind) != want) return "node " + std::to_string(i) + " has the wrong type";
    if (n.kind == NodeKind::RuleEnd && i > 0 && tree.nodes[i - 1].kind == NodeKind::Slope)
      return "policy ending at node " + std::to_string(i) + " has no rules";
    if (n.kind == NodeKind::Variable && n.variable >= state_dim)
      return "node " + std::to_string(i) + " references state " + std::to_string(n.variable);
    if (is_constant(n.kind)) {
      if (!std::isfinite(n.value)) return "node " + std::to_string(i) + " holds a non-finite constant";
      if ((n.kind == NodeKind::Width || n.kind == NodeKind::Slope) && !(n.value > 0.0))
        return "node " + std::to_string(i) + " holds a non-positive width or slope";
    }
    for (std::size_t slot = arity(n.kind); slot-- > 0;) expected.push_back(child_type(n.kind, slot));
  }
  if (!expected.empty()) return std::string("tree is truncated");
  if (roots != action_dim) return "tree has " + std::to_string(roots) + " roots, expected " + std::to_string(action_dim);
  return std::nullopt;
}

/// True if some policy root has an empty rule chain.
inline bool has_empty_policy(const PolicyTree& tree) {
  for (std::size_t i = 1; i < tree.nodes.size(); ++i)
    if (tree.nodes[i].kind == NodeKind::RuleEnd && tree.nodes[i - 1].kind == NodeKind::Slope) return true;
  return false;
}

inline bool well_typed(const PolicyTree& tree, std::size_t state_dim, std::size_t action_dim) {
  return !type_error(tree, state_dim, action_dim).has_value();
}

// ---------------------------------------------------------------------------
// Conversion

namespace detail {

inline std::size_t read_rule_chain(std::span<const Node> nodes, std::size_t i, std::vector<FuzzyRule>& rules) {
  while (nodes[i].kind == NodeKind::Rule) {
    ++i;
    FuzzyRule rule;
    while (nodes[i].kind == NodeKind::Dim) {
      rule.clauses.push_back({nodes[i + 1].variable, nodes[i + 2].value, nodes[i + 3].value});
      i += 4;
    }
    ++i;  // DimEnd
    rule.consequent = nodes[i++].value;
    rules.push_back(std::move(rule));
  }
  return i + 1;  // RuleEnd
}

}  // namespace detail

/// Flattens a well-typed tree into an evaluable policy.
inline FuzzyPolicy to_policy(const PolicyTree& tree, const std::vector<Interval>& bounds,
                             const StateScaling& scaling = {}) {
  FuzzyPolicy policy;
  policy.scaling = scaling;
  const std::span<const Node> nodes = tree.nodes;
  std::size_t i = 0;
  while (i < nodes.size()) {
    if (nodes[i].kind != NodeKind::Policy) throw StructureError("expected a policy root");
    ActionRules ar;
    ar.alpha = nodes[i + 1].value;
    i = detail::read_rule_chain(nodes, i + 2, ar.rules);
    policy.actions.push_back(std::move(ar));
  }
  if (policy.actions.size() != bounds.size()) throw StructureError("tree root count does not match action bounds");
  for (std::size_t k = 0; k < bounds.size(); ++k) policy.actions[k].bounds = bounds[k];
  return policy;
}

inline PolicyTree from_policy(const FuzzyPolicy& policy) {
  PolicyTree tree;
  auto& n = tree.nodes;
  for (const auto& ar : policy.actions) {
    n.push_back(Node::make(NodeKind::Policy));
    n.push_back(Node::constant(NodeKind::Slope, ar.alpha));
    for (const auto& rule : ar.rules) {
      n.push_back(Node::make(NodeKind::Rule));
      for (const auto& c : rule.clauses) {
        n.push_back(Node::make(NodeKind::Dim));
        n.push_back(Node::var(c.state_index));
        n.push_back(Node::constant(NodeKind::Center, c.center));
        n.push_back(Node::constant(NodeKind::Width, c.sigma));
      }
      n.push_back(Node::make(NodeKind::DimEnd));
      n.push_back(Node::constant(NodeKind::Consequent, rule.consequent));
    }
    n.push_back(Node::make(NodeKind::RuleEnd));
  }
  return tree;
}

/// Evaluates the tree directly from its node array, without conversion.
inline Action interpret(const PolicyTree& tree, const std::vector<Interval>& bounds, const StateScaling& scaling,
                        std::span<const double> s) {
  Action out;
  const auto& nodes = tree.nodes;
  std::size_t i = 0;
  while (i < nodes.size()) {
    const double alpha = nodes[i + 1].value;
    i += 2;
    std::vector<double> logs, consequents;
    while (nodes[i].kind == NodeKind::Rule) {
      ++i;
      double e = 0.0;
      while (nodes[i].kind == NodeKind::Dim) {
        const std::size_t idx = nodes[i + 1].variable;
        const double d = nodes[i + 2].value - scaling.apply(idx, s[idx]);
        const double sigma = nodes[i + 3].value;
        e -= (d * d) / (2.0 * sigma * sigma);
        i += 4;
      }
      ++i;
      logs.push_back(e);
      consequents.push_back(nodes[i++].value);
    }
    ++i;
    double max_log = -std::numeric_limits<double>::infinity();
    for (double l : logs) max_log = std::max(max_log, l);
    double num = 0.0, den = 0.0;
    for (std::size_t r = 0; r < logs.size(); ++r) {
      const double w = std::exp(logs[r] - max_log);
      num += w * consequents[r];
      den += w;
    }
    const Interval& b = bounds.at(out.size());
    out.push_back(rescale_to(b, std::tanh(alpha * num / den)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inspection helpers

/// Hash of node kinds and variable indices, ignoring constant values.
inline std::uint64_t structure_fingerprint(const PolicyTree& tree) {
  std::uint64_t h = 0x5354525543ULL;
  for (const auto& n : tree.nodes)
    h = mix64(h ^ (static_cast<std::uint64_t>(n.kind) << 32 | (n.kind == NodeKind::Variable ? n.variable : 0)));
  return h;
}

inline std::vector<std::size_t> constant_indices(const PolicyTree& tree) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    if (is_constant(tree.nodes[i].kind)) out.push_back(i);
  return out;
}

/// True if some rule has two clauses on the same state variable.
inline bool has_duplicate_variables(const PolicyTree& tree) {
  std::unordered_set<std::uint32_t> seen;
  for (const auto& n : tree.nodes) {
    if (n.kind == NodeKind::Rule) seen.clear();
    if (n.kind == NodeKind::Variable && !seen.insert(n.variable).second) return true;
  }
  return false;
}

}  // namespace fuzzyrl::gp
