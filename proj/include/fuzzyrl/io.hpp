#pragma once

// JSON / JSON-lines / CSV serialization of policies, trees, datasets,
// archives and rankings.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuzzyrl/environment.hpp"
#include "fuzzyrl/errors.hpp"
#include "fuzzyrl/feature_selection.hpp"
#include "fuzzyrl/fuzzy.hpp"
#include "fuzzyrl/pareto.hpp"
#include "fuzzyrl/policy_tree.hpp"

namespace fuzzyrl::io {

using json = nlohmann::json;

struct PolicyMetadata {
  std::optional<int> complexity;
  std::optional<double> fitness;
  std::optional<std::uint64_t> seed;
  std::string provenance;
};

inline json to_json(const FuzzyPolicy& p, const PolicyMetadata& meta = {}) {
  json actions = json::array();
  for (const auto& ar : p.actions) {
    json rules = json::array();
    for (const auto& r : ar.rules) {
      json clauses = json::array();
      for (const auto& c : r.clauses) clauses.push_back({{"state_index", c.state_index}, {"center", c.center}, {"sigma", c.sigma}});
      rules.push_back({{"clauses", clauses}, {"consequent", r.consequent}});
    }
    actions.push_back({{"rules", rules}, {"alpha", ar.alpha}, {"bounds", {ar.bounds.lo, ar.bounds.hi}}});
  }
  json j{{"actions", actions}};
  if (!p.scaling.is_identity()) j["scaling"] = {{"lo", p.scaling.lo}, {"hi", p.scaling.hi}};
  json m{{"complexity", meta.complexity.value_or(complexity(p))}};
  if (meta.fitness) m["fitness"] = *meta.fitness;
  if (meta.seed) m["seed"] = *meta.seed;
  if (!meta.provenance.empty()) m["provenance"] = meta.provenance;
  j["metadata"] = m;
  return j;
}

inline FuzzyPolicy policy_from_json(const json& j) {
  FuzzyPolicy p;
  for (const auto& ja : j.at("actions")) {
    ActionRules ar;
    ar.alpha = ja.at("alpha").get<double>();
    ar.bounds = {ja.at("bounds").at(0).get<double>(), ja.at("bounds").at(1).get<double>()};
    for (const auto& jr : ja.at("rules")) {
      FuzzyRule r;
      r.consequent = jr.at("consequent").get<double>();
      for (const auto& jc : jr.at("clauses"))
        r.clauses.push_back({jc.at("state_index").get<std::size_t>(), jc.at("center").get<double>(), jc.at("sigma").get<double>()});
      ar.rules.push_back(std::move(r));
    }
    p.actions.push_back(std::move(ar));
  }
  if (j.contains("scaling")) {
    p.scaling.lo = j["scaling"].at("lo").get<std::vector<double>>();
    p.scaling.hi = j["scaling"].at("hi").get<std::vector<double>>();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Trees: one [tag] or [tag, value] entry per node in prefix order.

inline const char* tag_of(gp::NodeKind k) {
  using gp::NodeKind;
  switch (k) {
    case NodeKind::Policy: return "pi";
    case NodeKind::Rule: return "m";
    case NodeKind::RuleEnd: return "m_end";
    case NodeKind::Dim: return "d";
    case NodeKind::DimEnd: return "d_end";
    case NodeKind::Variable: return "s";
    case NodeKind::Center: return "c";
    case NodeKind::Width: return "sigma";
    case NodeKind::Consequent: return "o";
    case NodeKind::Slope: return "alpha";
  }
  return "?";
}

inline gp::NodeKind kind_of(const std::string& tag) {
  using gp::NodeKind;
  for (auto k : {NodeKind::Policy, NodeKind::Rule, NodeKind::RuleEnd, NodeKind::Dim, NodeKind::DimEnd,
                 NodeKind::Variable, NodeKind::Center, NodeKind::Width, NodeKind::Consequent, NodeKind::Slope})
    if (tag == tag_of(k)) return k;
  throw StructureError("unknown tree node tag '" + tag + "'");
}

inline json to_json(const gp::PolicyTree& t) {
  json arr = json::array();
  for (const auto& n : t.nodes) {
    if (n.kind == gp::NodeKind::Variable)
      arr.push_back({tag_of(n.kind), n.variable});
    else if (gp::is_constant(n.kind))
      arr.push_back({tag_of(n.kind), n.value});
    else
      arr.push_back(json::array({tag_of(n.kind)}));
  }
  return arr;
}

inline gp::PolicyTree tree_from_json(const json& j) {
  gp::PolicyTree t;
  for (const auto& e : j) {
    gp::Node n = gp::Node::make(kind_of(e.at(0).get<std::string>()));
    if (n.kind == gp::NodeKind::Variable) n.variable = e.at(1).get<std::uint32_t>();
    if (gp::is_constant(n.kind)) n.value = e.at(1).get<double>();
    t.nodes.push_back(n);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Datasets

inline void write_dataset(std::ostream& os, const TransitionDataset& d) {
  json header{{"env", d.env_name},         {"state_dim", d.state_dim}, {"action_dim", d.action_dim},
              {"seed", d.seed},            {"generator", d.generator}, {"n_traj", d.n_traj},
              {"traj_len", d.traj_len},    {"size", d.size()}};
  os << header.dump() << '\n';
  for (const auto& t : d.tuples)
    os << json{{"s", t.s}, {"a", t.a}, {"s_next", t.s_next}, {"r", t.r}, {"traj_id", t.traj_id}}.dump() << '\n';
}

inline TransitionDataset read_dataset(std::istream& is) {
  TransitionDataset d;
  std::string line;
  if (!std::getline(is, line)) throw StructureError("dataset file is empty");
  const auto h = json::parse(line);
  d.env_name = h.at("env").get<std::string>();
  d.state_dim = h.at("state_dim").get<std::size_t>();
  d.action_dim = h.at("action_dim").get<std::size_t>();
  d.seed = h.value("seed", std::uint64_t{0});
  d.generator = h.value("generator", std::string("random"));
  d.n_traj = h.value("n_traj", std::size_t{0});
  d.traj_len = h.value("traj_len", std::size_t{0});
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    TransitionRecord t;
    t.s = j.at("s").get<State>();
    t.a = j.at("a").get<Action>();
    t.s_next = j.at("s_next").get<State>();
    t.r = j.at("r").get<double>();
    t.traj_id = j.at("traj_id").get<std::size_t>();
    if (t.s.size() != d.state_dim || t.s_next.size() != d.state_dim || t.a.size() != d.action_dim)
      throw StructureError("dataset tuple has inconsistent dimensions");
    d.tuples.push_back(std::move(t));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Archives

inline json to_json(const gp::ArchiveEntry& e, const std::vector<Interval>& bounds, const StateScaling& scaling) {
  json j{{"complexity", e.complexity},
         {"fitness_model", e.fitness},
         {"generation_found", e.generation_found},
         {"tree", to_json(e.tree)},
         {"policy", to_json(gp::to_policy(e.tree, bounds, scaling), {e.complexity, e.fitness, std::nullopt, {}})}};
  if (e.fitness_real) j["fitness_real"] = *e.fitness_real;
  return j;
}

inline gp::ArchiveEntry entry_from_json(const json& j) {
  gp::ArchiveEntry e;
  e.complexity = j.at("complexity").get<int>();
  e.fitness = j.at("fitness_model").get<double>();
  e.generation_found = j.value("generation_found", std::size_t{0});
  e.tree = tree_from_json(j.at("tree"));
  if (j.contains("fitness_real") && !j["fitness_real"].is_null()) e.fitness_real = j["fitness_real"].get<double>();
  return e;
}

inline void write_archive(std::ostream& os, const std::vector<gp::ArchiveEntry>& entries,
                          const std::vector<Interval>& bounds, const StateScaling& scaling, const json& provenance = {}) {
  for (const auto& e : entries) {
    auto j = to_json(e, bounds, scaling);
    if (!provenance.is_null()) j["provenance"] = provenance;
    os << j.dump() << '\n';
  }
}

struct ArchiveFile {
  std::vector<gp::ArchiveEntry> entries;
  std::vector<Interval> bounds;
  StateScaling scaling;
  json provenance;
};

inline ArchiveFile read_archive(std::istream& is) {
  ArchiveFile out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    out.entries.push_back(entry_from_json(j));
    if (out.bounds.empty()) {
      const auto p = policy_from_json(j.at("policy"));
      for (const auto& ar : p.actions) out.bounds.push_back(ar.bounds);
      out.scaling = p.scaling;
      if (j.contains("provenance")) out.provenance = j["provenance"];
    }
  }
  return out;
}

/// Complexity vs penalty (= -fitness) for plotting.
inline void write_front_csv(std::ostream& os, const std::vector<gp::ArchiveEntry>& entries) {
  os << "complexity,penalty_model,penalty_real\n";
  os << std::setprecision(17);
  for (const auto& e : entries) {
    os << e.complexity << ',' << -e.fitness << ',';
    if (e.fitness_real) os << -*e.fitness_real;
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Rankings

inline json to_json(const FeatureRanking& r) {
  json j = json::object();
  for (std::size_t a = 0; a < r.per_action.size(); ++a) {
    json list = json::array();
    for (const auto& f : r.per_action[a]) list.push_back({{"feature", f.feature}, {"score", f.score}});
    j[std::to_string(a)] = list;
  }
  return j;
}

inline FeatureRanking ranking_from_json(const json& j) {
  FeatureRanking r;
  for (std::size_t a = 0; j.contains(std::to_string(a)); ++a) {
    std::vector<ScoredFeature> list;
    for (const auto& e : j[std::to_string(a)]) list.push_back({e.at("feature").get<std::size_t>(), e.at("score").get<double>()});
    r.per_action.push_back(std::move(list));
  }
  return r;
}

// ---------------------------------------------------------------------------

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace fuzzyrl::io
