#pragma once

// Particle swarm maximization over a bounded box, and FPSRL: swarm tuning of
// a fixed-structure fuzzy policy's parameter vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fuzzyrl/errors.hpp"
#include "fuzzyrl/fitness.hpp"
#include "fuzzyrl/fuzzy.hpp"
#include "fuzzyrl/parallel.hpp"
#include "fuzzyrl/random.hpp"

namespace fuzzyrl {

enum class Topology { Ring, Global };

struct SwarmConfig {
  std::size_t swarm_size = 50;
  /// Iteration 1 evaluates the initial positions; total evaluations are
  /// swarm_size * iterations.
  std::size_t iterations = 100;
  double inertia = 0.7298;
  double cognitive = 1.49618;
  double social = 1.49618;
  Topology topology = Topology::Ring;
  std::size_t ring_radius = 2;
  std::vector<double> lower;
  std::vector<double> upper;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const {
    if (swarm_size < 2) throw ConfigError("swarm_size", "must be at least 2");
    if (lower.size() != upper.size() || lower.empty()) throw ConfigError("bounds", "lower/upper must be nonempty and equal length");
    for (std::size_t d = 0; d < lower.size(); ++d)
      if (!(std::isfinite(lower[d]) && std::isfinite(upper[d]) && lower[d] < upper[d]))
        throw ConfigError("bounds", "dimension " + std::to_string(d) + " needs finite lo < hi");
  }
};

/// Read-only view of the swarm handed to an observer after each iteration.
struct SwarmSnapshot {
  std::size_t iteration = 0;  // 1-based
  std::span<const std::vector<double>> positions;
  std::span<const std::vector<double>> personal_best;
  std::span<const double> personal_best_fitness;
  double global_best_fitness = 0.0;
};

struct PsoResult {
  std::vector<double> best_position;
  double best_fitness = -std::numeric_limits<double>::infinity();
  /// Global best fitness after each iteration.
  std::vector<double> history;
  std::uint64_t evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;
using SwarmObserver = std::function<void(const SwarmSnapshot&)>;

/// Maximizes `objective` over [lower, upper]. Personal bests move only on
/// strict improvement. `seed_positions` (clamped) replace the first random
/// initial positions. Deterministic given cfg.seed for any worker count.
inline PsoResult pso_maximize(const Objective& objective, const SwarmConfig& cfg,
                              const std::vector<std::vector<double>>& seed_positions = {},
                              const SwarmObserver& observer = {}) {
  cfg.validate();
  const std::size_t n = cfg.swarm_size;
  const std::size_t dim = cfg.lower.size();
  PsoResult result;
  if (cfg.iterations == 0) return result;

  std::vector<double> vmax(dim);
  for (std::size_t d = 0; d < dim; ++d) vmax[d] = 0.5 * (cfg.upper[d] - cfg.lower[d]);

  std::vector<std::vector<double>> x(n, std::vector<double>(dim)), v(n, std::vector<double>(dim)), y;
  std::vector<double> fx(n), fy(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng({cfg.seed, i, 0});
    for (std::size_t d = 0; d < dim; ++d) {
      x[i][d] = uniform(rng, cfg.lower[d], cfg.upper[d]);
      v[i][d] = 0.5 * uniform(rng, cfg.lower[d] - x[i][d], cfg.upper[d] - x[i][d]);
    }
    if (i < seed_positions.size()) {
      if (seed_positions[i].size() != dim) throw StructureError("seed position has wrong dimension");
      for (std::size_t d = 0; d < dim; ++d) x[i][d] = std::clamp(seed_positions[i][d], cfg.lower[d], cfg.upper[d]);
    }
  }

  auto evaluate_all = [&] {
    parallel_for(n, cfg.workers, [&](std::size_t i) {
      const double f = objective(x[i]);
      fx[i] = std::isfinite(f) ? f : -std::numeric_limits<double>::infinity();
    });
    result.evaluations += n;
  };

  auto global_best = [&]() -> std::size_t {
    std::size_t g = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (fy[i] > fy[g]) g = i;
    return g;
  };

  auto notify = [&](std::size_t iteration, double gbest) {
    if (!observer) return;
    observer(SwarmSnapshot{iteration, x, y, fy, gbest});
  };

  evaluate_all();
  y = x;
  fy = fx;
  std::size_t g = global_best();
  result.history.push_back(fy[g]);
  notify(1, fy[g]);

  std::vector<std::size_t> informant(n);
  for (std::size_t it = 2; it <= cfg.iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      if (cfg.topology == Topology::Global) {
        informant[i] = g;
        continue;
      }
      std::size_t best = i;
      const std::size_t radius = std::min(cfg.ring_radius, (n - 1) / 2);
      for (std::size_t off = 1; off <= radius; ++off) {
        for (std::size_t j : {(i + off) % n, (i + n - off) % n})
          if (fy[j] > fy[best]) best = j;
      }
      informant[i] = best;
    }
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = make_rng({cfg.seed, i, it});
      const auto& nb = y[informant[i]];
      for (std::size_t d = 0; d < dim; ++d) {
        const double r1 = uniform(rng, 0.0, 1.0);
        const double r2 = uniform(rng, 0.0, 1.0);
        double vel = cfg.inertia * v[i][d] + cfg.cognitive * r1 * (y[i][d] - x[i][d]) +
                     cfg.social * r2 * (nb[d] - x[i][d]);
        vel = std::clamp(vel, -vmax[d], vmax[d]);
        double pos = x[i][d] + vel;
        if (pos < cfg.lower[d] || pos > cfg.upper[d]) {
          pos = std::clamp(pos, cfg.lower[d], cfg.upper[d]);
          vel = 0.0;
        }
        x[i][d] = pos;
        v[i][d] = vel;
      }
    }
    evaluate_all();
    for (std::size_t i = 0; i < n; ++i)
      if (fx[i] > fy[i]) {
        y[i] = x[i];
        fy[i] = fx[i];
      }
    g = global_best();
    result.history.push_back(fy[g]);
    notify(it, fy[g]);
  }
  result.best_position = y[g];
  result.best_fitness = fy[g];
  return result;
}

// ---------------------------------------------------------------------------
// FPSRL

struct FpsrlResult {
  FuzzyPolicy policy;
  double fitness = 0.0;
  std::uint64_t evaluations = 0;
  std::vector<double> history;
};

/// Fixed structure with the same features and rule count for every action.
inline FixedStructure make_structure(std::span<const std::vector<std::size_t>> features_per_action,
                                     std::size_t rules, const std::vector<Interval>& action_bounds) {
  if (features_per_action.size() != action_bounds.size())
    throw StructureError("one feature list per action dimension is required");
  FixedStructure s;
  for (std::size_t k = 0; k < action_bounds.size(); ++k)
    s.channels.push_back({features_per_action[k], rules, action_bounds[k]});
  return s;
}

/// Swarm-tunes the parameter vector of `structure`; `swarm` supplies
/// everything except the bounds, which come from `box`.
inline FpsrlResult fpsrl_train(const FixedStructure& structure, const FitnessEvaluator& evaluator,
                               SwarmConfig swarm, const StateScaling& scaling = {}, const TerminalBox& box = {},
                               const SwarmObserver& observer = {}) {
  for (const auto& ch : structure.channels) {
    if (ch.rules < 1) throw StructureError("each action needs at least one rule");
    for (auto f : ch.features)
      if (f >= evaluator.model().state_dim()) throw StructureError("feature index out of range");
  }
  if (structure.channels.size() != evaluator.model().action_dim())
    throw StructureError("structure and model disagree on action dimension");
  parameter_bounds(structure, box, swarm.lower, swarm.upper);
  auto objective = [&](std::span<const double> v) {
    try {
      return evaluator(decode(v, structure, scaling));
    } catch (const EvaluationError&) {
      return -std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  auto pso = pso_maximize(objective, swarm, {}, observer);
  FpsrlResult out;
  out.policy = decode(pso.best_position, structure, scaling);
  out.fitness = pso.best_fitness;
  out.evaluations = pso.evaluations;
  out.history = std::move(pso.history);
  return out;
}

}  // namespace fuzzyrl
