#pragma once

// FGPRL: generational strongly-typed GP over fuzzy policy trees with
// per-complexity elitist mutation and a complexity/fitness archive.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "fuzzyrl/errors.hpp"
#include "fuzzyrl/fitness.hpp"
#include "fuzzyrl/gp_operators.hpp"
#include "fuzzyrl/parallel.hpp"
#include "fuzzyrl/pareto.hpp"

namespace fuzzyrl::gp {

struct GpConfig {
  std::size_t population = 1000;
  std::size_t generations = 100;
  std::size_t tournament_size = 4;
  double crossover_ratio = 0.45;
  double reproduction_ratio = 0.05;
  double mutation_ratio = 0.10;
  double random_ratio = 0.40;
  double elite_fraction = 0.05;
  std::size_t max_elites = 20;
  std::size_t elite_copies = 5;
  int max_complexity = 400;
  std::size_t init_max_rules = 4;
  /// Upper clause count for random trees; 0 means the state dimension.
  std::size_t init_max_dims = 0;
  TerminalBox box;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const {
    for (auto [name, r] : {std::pair{"crossover_ratio", crossover_ratio}, {"reproduction_ratio", reproduction_ratio},
                           {"mutation_ratio", mutation_ratio}, {"random_ratio", random_ratio}})
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError(std::string("fgprl.") + name, "must lie in [0, 1]");
    const double sum = crossover_ratio + reproduction_ratio + mutation_ratio + random_ratio;
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("fgprl.ratios", "crossover + reproduction + mutation + random must sum to 1");
    if (tournament_size < 1) throw ConfigError("fgprl.tournament_size", "must be at least 1");
    if (population < tournament_size) throw ConfigError("fgprl.population", "must be at least the tournament size");
    if (!(elite_fraction >= 0.0 && elite_fraction <= 1.0)) throw ConfigError("fgprl.elite_fraction", "must lie in [0, 1]");
    if (init_max_rules < 1) throw ConfigError("fgprl.init_max_rules", "must be at least 1");
  }
};

/// Offspring counts per generation; random immigrants absorb rounding.
struct GenerationPlan {
  std::size_t crossover = 0;
  std::size_t reproduction = 0;
  std::size_t mutation = 0;
  std::size_t random = 0;

  static GenerationPlan from(const GpConfig& cfg) {
    const auto n = static_cast<double>(cfg.population);
    GenerationPlan p;
    p.crossover = static_cast<std::size_t>(std::llround(cfg.crossover_ratio * n));
    p.reproduction = static_cast<std::size_t>(std::llround(cfg.reproduction_ratio * n));
    p.mutation = static_cast<std::size_t>(std::llround(cfg.mutation_ratio * n));
    const std::size_t used = p.crossover + p.reproduction + p.mutation;
    if (used > cfg.population) {
      // Rounding overshoot: trim crossover, which is the largest share.
      p.crossover -= used - cfg.population;
    }
    p.random = cfg.population - (p.crossover + p.reproduction + p.mutation);
    return p;
  }
};

struct Individual {
  PolicyTree tree;
  int complexity = 0;
  double fitness = -std::numeric_limits<double>::infinity();
};

struct GenerationStats {
  std::size_t generation = 0;
  std::uint64_t evaluations_used = 0;
  double best_fitness = -std::numeric_limits<double>::infinity();
  std::size_t elites = 0;
  std::size_t elites_admitted = 0;
  /// Archive best fitness per complexity level after this generation.
  std::map<int, double> level_best;
};

struct EvolveResult {
  ParetoArchive archive;
  std::vector<GenerationStats> generations;
  /// Evaluations planned by the engine, counted independently of the
  /// evaluator's atomic counter.
  std::uint64_t population_evaluations = 0;
  std::uint64_t elite_evaluations = 0;
  std::uint64_t planned_evaluations() const noexcept { return population_evaluations + elite_evaluations; }
};

using TreeFitness = std::function<double(const PolicyTree&)>;

class Engine {
 public:
  Engine(TreeFitness fitness, GpConfig cfg, std::size_t state_dim, std::size_t action_dim)
      : fitness_(std::move(fitness)), cfg_(std::move(cfg)), state_dim_(state_dim), action_dim_(action_dim),
        rng_(derive_seed({cfg_.seed, 0x4750ULL})) {
    cfg_.validate();
  }

  EvolveResult run(const std::function<void(const GenerationStats&)>& on_generation = {}) {
    EvolveResult result;
    const auto plan = GenerationPlan::from(cfg_);

    std::vector<Individual> population(cfg_.population);
    for (auto& ind : population) ind.tree = ramped_random();
    prepare_and_evaluate(population);
    result.population_evaluations += population.size();
    offer_all(result.archive, population, 0);
    record(result, 0, population, 0, 0, on_generation);

    for (std::size_t gen = 1; gen <= cfg_.generations; ++gen) {
      std::vector<Individual> next;
      std::vector<Individual> fresh;
      next.reserve(cfg_.population + cfg_.max_elites);
      fresh.reserve(cfg_.population);

      for (std::size_t made = 0; made < plan.crossover; made += 2) {
        const auto& pa = tournament(population);
        const auto& pb = tournament(population);
        auto [ca, cb] = crossover(pa.tree, pb.tree, rng_);
        fresh.push_back({std::move(ca)});
        if (made + 1 < plan.crossover) fresh.push_back({std::move(cb)});
      }
      for (std::size_t i = 0; i < plan.mutation; ++i)
        fresh.push_back({gaussian_mutate(tournament(population).tree, rng_, cfg_.box)});
      for (std::size_t i = 0; i < plan.random; ++i) fresh.push_back({ramped_random()});
      for (std::size_t i = 0; i < plan.reproduction; ++i) next.push_back(tournament(population));

      // Elitist local mutation on the parent generation.
      const auto elites = select_elites(population);
      std::vector<Individual> copies;
      copies.reserve(elites.size() * cfg_.elite_copies);
      for (std::size_t e : elites)
        for (std::size_t c = 0; c < cfg_.elite_copies; ++c)
          copies.push_back({gaussian_mutate(population[e].tree, rng_, cfg_.box)});

      prepare_and_evaluate(fresh);
      prepare_and_evaluate(copies);
      result.population_evaluations += fresh.size();
      result.elite_evaluations += copies.size();

      std::size_t admitted = 0;
      for (std::size_t k = 0; k < elites.size(); ++k) {
        const Individual* best = nullptr;
        for (std::size_t c = 0; c < cfg_.elite_copies; ++c) {
          const auto& cand = copies[k * cfg_.elite_copies + c];
          if (!best || cand.fitness > best->fitness) best = &cand;
        }
        if (best && best->fitness > population[elites[k]].fitness) {
          next.push_back(*best);
          ++admitted;
        }
      }
      offer_all(result.archive, fresh, gen);
      offer_all(result.archive, copies, gen);
      for (auto& f : fresh) next.push_back(std::move(f));
      population = std::move(next);
      record(result, gen, population, elites.size(), admitted, on_generation);
    }
    return result;
  }

  /// Random tree with limits drawn uniformly from the ramp.
  PolicyTree ramped_random() {
    TreeLimits limits;
    limits.state_dim = state_dim_;
    limits.action_dim = action_dim_;
    limits.box = cfg_.box;
    limits.max_rules = std::uniform_int_distribution<std::size_t>{1, cfg_.init_max_rules}(rng_);
    const std::size_t dims_cap = cfg_.init_max_dims ? cfg_.init_max_dims : state_dim_;
    limits.max_dims = std::uniform_int_distribution<std::size_t>{0, dims_cap}(rng_);
    return random_tree(rng_, limits);
  }

 private:
  const Individual& tournament(const std::vector<Individual>& pop) {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    const Individual* best = &pop[pick(rng_)];
    for (std::size_t t = 1; t < cfg_.tournament_size; ++t) {
      const Individual* c = &pop[pick(rng_)];
      if (c->fitness > best->fitness) best = c;
    }
    return *best;
  }

  /// Top elite_fraction of each complexity level (at least one), then the
  /// fittest max_elites of those.
  std::vector<std::size_t> select_elites(const std::vector<Individual>& pop) const {
    if (cfg_.elite_copies == 0 || cfg_.max_elites == 0 || cfg_.elite_fraction <= 0.0) return {};
    std::map<int, std::vector<std::size_t>> by_level;
    for (std::size_t i = 0; i < pop.size(); ++i)
      if (std::isfinite(pop[i].fitness)) by_level[pop[i].complexity].push_back(i);
    auto fitter = [&](std::size_t a, std::size_t b) {
      return pop[a].fitness != pop[b].fitness ? pop[a].fitness > pop[b].fitness : a < b;
    };
    std::vector<std::size_t> candidates;
    for (auto& [level, members] : by_level) {
      std::sort(members.begin(), members.end(), fitter);
      const auto take = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(cfg_.elite_fraction * static_cast<double>(members.size()))));
      candidates.insert(candidates.end(), members.begin(), members.begin() + std::min(take, members.size()));
    }
    std::sort(candidates.begin(), candidates.end(), fitter);
    if (candidates.size() > cfg_.max_elites) candidates.resize(cfg_.max_elites);
    return candidates;
  }

  /// Corrects, enforces the size cap, then evaluates in parallel. Replacement
  /// trees for oversize offspring are drawn here, before any evaluation, so
  /// RNG consumption does not depend on the worker count.
  void prepare_and_evaluate(std::vector<Individual>& batch) {
    for (auto& ind : batch) {
      ind.tree = tree_correction(ind.tree);
      ind.complexity = complexity(ind.tree);
      while (ind.complexity > cfg_.max_complexity) {
        ind.tree = tree_correction(ramped_random());
        ind.complexity = complexity(ind.tree);
      }
    }
    parallel_for(batch.size(), cfg_.workers, [&](std::size_t i) {
      double f;
      try {
        f = fitness_(batch[i].tree);
      } catch (const EvaluationError&) {
        f = -std::numeric_limits<double>::infinity();
      } catch (const DomainError&) {
        f = -std::numeric_limits<double>::infinity();
      }
      batch[i].fitness = std::isfinite(f) ? f : -std::numeric_limits<double>::infinity();
    });
  }

  static void offer_all(ParetoArchive& archive, const std::vector<Individual>& batch, std::size_t gen) {
    for (const auto& ind : batch)
      if (std::isfinite(ind.fitness)) archive.offer({ind.tree, ind.complexity, ind.fitness, std::nullopt, gen});
  }

  void record(EvolveResult& result, std::size_t gen, const std::vector<Individual>& pop, std::size_t elites,
              std::size_t admitted, const std::function<void(const GenerationStats&)>& cb) const {
    GenerationStats st;
    st.generation = gen;
    st.evaluations_used = result.planned_evaluations();
    st.elites = elites;
    st.elites_admitted = admitted;
    for (const auto& [c, e] : result.archive.levels()) {
      st.level_best[c] = e.fitness;
      st.best_fitness = std::max(st.best_fitness, e.fitness);
    }
    (void)pop;
    result.generations.push_back(st);
    if (cb) cb(result.generations.back());
  }

  TreeFitness fitness_;
  GpConfig cfg_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  Rng rng_;
};

/// Binds an evaluator to tree conversion.
inline TreeFitness tree_fitness(const FitnessEvaluator& evaluator, std::vector<Interval> bounds,
                                StateScaling scaling = {}) {
  return [&evaluator, bounds = std::move(bounds), scaling = std::move(scaling)](const PolicyTree& t) {
    return evaluator(to_policy(t, bounds, scaling));
  };
}

inline EvolveResult evolve(const FitnessEvaluator& evaluator, const GpConfig& cfg, const StateScaling& scaling = {},
                           const std::function<void(const GenerationStats&)>& on_generation = {}) {
  const auto& model = evaluator.model();
  Engine engine(tree_fitness(evaluator, model.action_bounds(), scaling), cfg, model.state_dim(), model.action_dim());
  return engine.run(on_generation);
}

}  // namespace fuzzyrl::gp
