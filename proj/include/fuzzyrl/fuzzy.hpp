#pragma once

// Gaussian fuzzy rule policies: membership, rule activation, tanh defuzzifier,
// and the flat parameter-vector encoding used for swarm tuning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fuzzyrl/errors.hpp"

namespace fuzzyrl {

using State = std::vector<double>;
using Action = std::vector<double>;

struct Interval {
  double lo = -1.0;
  double hi = 1.0;

  double width() const noexcept { return hi - lo; }
  double center() const noexcept { return 0.5 * (lo + hi); }
  double clamp(double x) const noexcept { return std::clamp(x, lo, hi); }
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Affine map of raw state features onto [-1, 1]. Empty means identity.
struct StateScaling {
  std::vector<double> lo;
  std::vector<double> hi;

  bool is_identity() const noexcept { return lo.empty(); }

  double apply(std::size_t index, double x) const noexcept {
    if (is_identity() || index >= lo.size()) return x;
    const double w = hi[index] - lo[index];
    if (!(w > 0.0)) return 0.0;
    return 2.0 * (x - lo[index]) / w - 1.0;
  }

  State apply(std::span<const double> s) const {
    State out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = apply(i, s[i]);
    return out;
  }

  friend bool operator==(const StateScaling&, const StateScaling&) = default;
};

struct MembershipClause {
  std::size_t state_index = 0;
  double center = 0.0;
  double sigma = 1.0;

  friend bool operator==(const MembershipClause&, const MembershipClause&) = default;
};

struct FuzzyRule {
  std::vector<MembershipClause> clauses;
  double consequent = 0.0;

  friend bool operator==(const FuzzyRule&, const FuzzyRule&) = default;
};

/// Rule set driving one action dimension.
struct ActionRules {
  std::vector<FuzzyRule> rules;
  double alpha = 1.0;
  Interval bounds;

  friend bool operator==(const ActionRules&, const ActionRules&) = default;
};

/// exp(-(c - s)^2 / (2 sigma^2)) on s[state_index].
inline double membership(const MembershipClause& clause, std::span<const double> s) {
  const double d = clause.center - s[clause.state_index];
  return std::exp(-(d * d) / (2.0 * clause.sigma * clause.sigma));
}

inline double rule_activation(const FuzzyRule& rule, std::span<const double> s) {
  double m = 1.0;
  for (const auto& clause : rule.clauses) m *= membership(clause, s);
  return m;
}

namespace detail {

inline double rule_log_activation(const FuzzyRule& rule, std::span<const double> s,
                                  const StateScaling& scaling) {
  double e = 0.0;
  for (const auto& clause : rule.clauses) {
    const double d = clause.center - scaling.apply(clause.state_index, s[clause.state_index]);
    e -= (d * d) / (2.0 * clause.sigma * clause.sigma);
  }
  return e;
}

}  // namespace detail

/// tanh(alpha * weighted mean of consequents), in (-1, 1) before rescaling.
/// Weights are normalized in the log domain so that activations which would
/// underflow individually still produce the exact ratio.
inline double defuzzify(const ActionRules& ar, std::span<const double> s,
                        const StateScaling& scaling = {}) {
  double max_log = -std::numeric_limits<double>::infinity();
  // Rule counts are small; a fixed stack buffer avoids allocation per step.
  constexpr std::size_t kStack = 64;
  double stack_logs[kStack];
  std::vector<double> heap_logs;
  double* logs = stack_logs;
  if (ar.rules.size() > kStack) {
    heap_logs.resize(ar.rules.size());
    logs = heap_logs.data();
  }
  for (std::size_t i = 0; i < ar.rules.size(); ++i) {
    logs[i] = detail::rule_log_activation(ar.rules[i], s, scaling);
    max_log = std::max(max_log, logs[i]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < ar.rules.size(); ++i) {
    const double w = std::exp(logs[i] - max_log);
    num += w * ar.rules[i].consequent;
    den += w;
  }
  return std::tanh(ar.alpha * num / den);
}

inline double rescale_to(const Interval& bounds, double unit) noexcept {
  return std::clamp(bounds.lo + 0.5 * (unit + 1.0) * bounds.width(), bounds.lo, bounds.hi);
}

inline double unit_from(const Interval& bounds, double x) noexcept {
  return 2.0 * (x - bounds.lo) / bounds.width() - 1.0;
}

struct FuzzyPolicy {
  std::vector<ActionRules> actions;
  StateScaling scaling;

  std::size_t action_dim() const noexcept { return actions.size(); }

  void act(std::span<const double> s, std::span<double> out) const {
    for (std::size_t k = 0; k < actions.size(); ++k)
      out[k] = rescale_to(actions[k].bounds, defuzzify(actions[k], s, scaling));
  }

  Action act(std::span<const double> s) const {
    Action a(actions.size());
    act(s, a);
    return a;
  }

  friend bool operator==(const FuzzyPolicy&, const FuzzyPolicy&) = default;
};

inline Action policy_output(const FuzzyPolicy& policy, std::span<const double> s) { return policy.act(s); }

/// Weighted node count: per action alpha (1); per rule m (10) + o (1);
/// per clause d (2) + s (1) + c (1) + sigma (1).
inline int complexity(const FuzzyPolicy& policy) {
  int total = 0;
  for (const auto& ar : policy.actions) {
    total += 1;
    for (const auto& rule : ar.rules) total += 11 + 5 * static_cast<int>(rule.clauses.size());
  }
  return total;
}

// ---------------------------------------------------------------------------
// Fixed-structure parameter vectors

/// Per action: the same D state features in every rule, C rules.
struct FixedStructure {
  struct Channel {
    std::vector<std::size_t> features;
    std::size_t rules = 1;
    Interval bounds;
  };
  std::vector<Channel> channels;
};

constexpr std::size_t parameter_count(std::size_t dims, std::size_t rules) noexcept {
  return (2 * dims + 1) * rules + 1;
}

inline std::size_t parameter_count(const FixedStructure& structure) noexcept {
  std::size_t n = 0;
  for (const auto& ch : structure.channels) n += parameter_count(ch.features.size(), ch.rules);
  return n;
}

/// Recovers the fixed structure of a policy; throws if rules of one action
/// dimension do not share the same clause indices.
inline FixedStructure structure_of(const FuzzyPolicy& policy) {
  FixedStructure out;
  for (std::size_t k = 0; k < policy.actions.size(); ++k) {
    const auto& ar = policy.actions[k];
    if (ar.rules.empty()) throw StructureError("action " + std::to_string(k) + " has no rules");
    FixedStructure::Channel ch;
    for (const auto& c : ar.rules.front().clauses) ch.features.push_back(c.state_index);
    ch.rules = ar.rules.size();
    ch.bounds = ar.bounds;
    for (const auto& rule : ar.rules) {
      if (rule.clauses.size() != ch.features.size())
        throw StructureError("rules of action " + std::to_string(k) + " differ in dimension count");
      for (std::size_t j = 0; j < ch.features.size(); ++j)
        if (rule.clauses[j].state_index != ch.features[j])
          throw StructureError("rules of action " + std::to_string(k) + " reference different features");
    }
    out.channels.push_back(std::move(ch));
  }
  return out;
}

/// Layout per action: for each rule D centers, D widths, consequent; then alpha.
inline std::vector<double> encode(const FuzzyPolicy& policy) {
  const auto structure = structure_of(policy);
  std::vector<double> v;
  v.reserve(parameter_count(structure));
  for (const auto& ar : policy.actions) {
    for (const auto& rule : ar.rules) {
      for (const auto& c : rule.clauses) v.push_back(c.center);
      for (const auto& c : rule.clauses) v.push_back(c.sigma);
      v.push_back(rule.consequent);
    }
    v.push_back(ar.alpha);
  }
  return v;
}

inline FuzzyPolicy decode(std::span<const double> v, const FixedStructure& structure,
                          const StateScaling& scaling = {}, Interval sigma_range = {1e-3, 10.0}) {
  if (v.size() != parameter_count(structure))
    throw StructureError("parameter vector has length " + std::to_string(v.size()) + ", expected " +
                         std::to_string(parameter_count(structure)));
  FuzzyPolicy policy;
  policy.scaling = scaling;
  std::size_t pos = 0;
  for (const auto& ch : structure.channels) {
    ActionRules ar;
    ar.bounds = ch.bounds;
    const std::size_t dims = ch.features.size();
    for (std::size_t r = 0; r < ch.rules; ++r) {
      FuzzyRule rule;
      rule.clauses.resize(dims);
      for (std::size_t j = 0; j < dims; ++j) {
        rule.clauses[j].state_index = ch.features[j];
        rule.clauses[j].center = v[pos + j];
        rule.clauses[j].sigma = sigma_range.clamp(v[pos + dims + j]);
      }
      rule.consequent = v[pos + 2 * dims];
      pos += 2 * dims + 1;
      ar.rules.push_back(std::move(rule));
    }
    ar.alpha = v[pos++];
    policy.actions.push_back(std::move(ar));
  }
  return policy;
}

/// Per-role ranges of the floating-point terminals, in normalized units.
struct TerminalBox {
  Interval center{-1.0, 1.0};
  Interval width{1e-3, 2.0};
  Interval consequent{-3.0, 3.0};
  Interval slope{0.1, 10.0};
};

/// Search box matching the encode() layout.
inline void parameter_bounds(const FixedStructure& structure, const TerminalBox& box,
                             std::vector<double>& lower, std::vector<double>& upper) {
  lower.clear();
  upper.clear();
  auto push = [&](const Interval& iv, std::size_t n) {
    lower.insert(lower.end(), n, iv.lo);
    upper.insert(upper.end(), n, iv.hi);
  };
  for (const auto& ch : structure.channels) {
    for (std::size_t r = 0; r < ch.rules; ++r) {
      push(box.center, ch.features.size());
      push(box.width, ch.features.size());
      push(box.consequent, 1);
    }
    push(box.slope, 1);
  }
}

}  // namespace fuzzyrl
