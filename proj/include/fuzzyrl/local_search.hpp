#pragma once

// Post-evolution tuning: swarm search over a tree's floating-point terminals
// with its structure frozen.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "fuzzyrl/fgprl.hpp"
#include "fuzzyrl/pareto.hpp"
#include "fuzzyrl/pso.hpp"

namespace fuzzyrl::gp {

struct TuneResult {
  PolicyTree tree;
  double fitness = -std::numeric_limits<double>::infinity();
  bool improved = false;
  std::uint64_t evaluations = 0;
};

inline std::vector<double> terminal_values(const PolicyTree& tree) {
  std::vector<double> v;
  for (const auto& n : tree.nodes)
    if (is_constant(n.kind)) v.push_back(n.value);
  return v;
}

inline PolicyTree with_terminal_values(const PolicyTree& tree, std::span<const double> values) {
  PolicyTree out = tree;
  std::size_t k = 0;
  for (auto& n : out.nodes)
    if (is_constant(n.kind)) {
      if (k >= values.size()) throw StructureError("too few terminal values");
      n.value = values[k++];
    }
  if (k != values.size()) throw StructureError("too many terminal values");
  return out;
}

/// Swarm-tunes the constants of `tree`, one particle seeded at the current
/// values. Returns the tuned tree only on strict improvement over
/// `current_fitness`. `swarm` supplies everything except the bounds.
inline TuneResult tune_terminals(const PolicyTree& tree, double current_fitness, const TreeFitness& fitness,
                                 SwarmConfig swarm, const TerminalBox& box = {}) {
  TuneResult out{tree, current_fitness, false, 0};
  swarm.lower.clear();
  swarm.upper.clear();
  for (const auto& n : tree.nodes)
    if (is_constant(n.kind)) {
      const auto& iv = range_of(box, n.kind);
      swarm.lower.push_back(iv.lo);
      swarm.upper.push_back(iv.hi);
    }
  if (swarm.lower.empty() || swarm.iterations == 0) return out;
  auto objective = [&](std::span<const double> v) {
    try {
      return fitness(with_terminal_values(tree, v));
    } catch (const EvaluationError&) {
      return -std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  const auto pso = pso_maximize(objective, swarm, {terminal_values(tree)});
  out.evaluations = pso.evaluations;
  if (pso.best_fitness > current_fitness) {
    out.tree = with_terminal_values(tree, pso.best_position);
    out.fitness = pso.best_fitness;
    out.improved = true;
  }
  return out;
}

struct TuneFrontResult {
  ParetoArchive archive;
  std::vector<ArchiveEntry> tuned;  // one per input front member, same order
  std::uint64_t evaluations = 0;
  std::size_t failures = 0;
};

/// Tunes every member of the archive's front and re-extracts the front.
inline TuneFrontResult tune_front(const ParetoArchive& archive, const TreeFitness& fitness, const SwarmConfig& swarm,
                                  const TerminalBox& box = {}) {
  if (archive.empty()) throw StructureError("cannot tune an empty archive");
  TuneFrontResult out;
  const auto front = archive.front();
  out.tuned.resize(front.size());
  std::vector<std::uint64_t> evals(front.size(), 0);
  std::vector<char> failed(front.size(), 0);
  parallel_for(front.size(), swarm.workers, [&](std::size_t i) {
    out.tuned[i] = front[i];
    SwarmConfig cfg = swarm;
    cfg.seed = derive_seed({swarm.seed, i});
    cfg.workers = 1;
    try {
      auto r = tune_terminals(front[i].tree, front[i].fitness, fitness, cfg, box);
      evals[i] = r.evaluations;
      if (r.improved) {
        out.tuned[i].tree = std::move(r.tree);
        out.tuned[i].fitness = r.fitness;
        out.tuned[i].fitness_real.reset();
      }
    } catch (const EvaluationError&) {
      failed[i] = 1;
    }
  });
  for (std::size_t i = 0; i < front.size(); ++i) {
    out.evaluations += evals[i];
    out.failures += failed[i];
    out.archive.offer(out.tuned[i]);
  }
  ParetoArchive reduced;
  for (const auto& e : out.archive.front()) reduced.offer(e);
  out.archive = std::move(reduced);
  return out;
}

}  // namespace fuzzyrl::gp
