#include <atomic>
#include <cmath>
#include <mutex>

#include <gtest/gtest.h>

#include "fuzzyrl/fgprl.hpp"

using namespace fuzzyrl;
using namespace fuzzyrl::gp;

namespace {

GpConfig small_config(std::uint64_t seed) {
  GpConfig cfg;
  cfg.population = 60;
  cfg.generations = 6;
  cfg.seed = seed;
  return cfg;
}

FitnessEvaluator cartpole_evaluator(std::size_t horizon = 40) {
  auto env = std::make_shared<CartPole>();
  return FitnessEvaluator(exact_model(env), {horizon, 0.98, sample_start_states(*env, CartPole::start_region(), 3, 1)});
}

/// Cheap deterministic objective: prefers consequents near 1 and few rules.
double toy_fitness(const PolicyTree& t) {
  double score = 0.0;
  for (const auto& n : t.nodes) {
    if (n.kind == NodeKind::Consequent) score -= (n.value - 1.0) * (n.value - 1.0);
    if (n.kind == NodeKind::Rule) score -= 0.1;
  }
  return score;
}

ArchiveEntry entry(int c, double f) {
  ArchiveEntry e;
  e.complexity = c;
  e.fitness = f;
  return e;
}

}  // namespace

TEST(GenerationPlan, DefaultRatiosForThousand) {
  GpConfig cfg;
  auto p = GenerationPlan::from(cfg);
  EXPECT_EQ(p.crossover, 450u);
  EXPECT_EQ(p.reproduction, 50u);
  EXPECT_EQ(p.mutation, 100u);
  EXPECT_EQ(p.random, 400u);
}

TEST(GenerationPlan, RemainderGoesToRandom) {
  for (std::size_t n : {7u, 13u, 33u, 101u}) {
    GpConfig cfg;
    cfg.population = n;
    cfg.tournament_size = 1;
    auto p = GenerationPlan::from(cfg);
    EXPECT_EQ(p.crossover + p.reproduction + p.mutation + p.random, n);
  }
}

TEST(GpConfig, RatiosMustSumToOne) {
  GpConfig cfg;
  cfg.random_ratio = 0.5;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "fgprl.ratios");
  }
}

TEST(GpConfig, PopulationAtLeastTournament) {
  GpConfig cfg;
  cfg.population = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Engine, ZeroGenerationsArchivesInitialBests) {
  GpConfig cfg = small_config(1);
  cfg.generations = 0;
  std::mutex mu;
  std::map<int, double> best;
  auto fit = [&](const PolicyTree& t) {
    const double f = toy_fitness(t);
    std::lock_guard lock(mu);
    auto [it, inserted] = best.emplace(complexity(t), f);
    if (!inserted) it->second = std::max(it->second, f);
    return f;
  };
  Engine engine(fit, cfg, 3, 1);
  auto res = engine.run();
  EXPECT_EQ(res.population_evaluations, cfg.population);
  EXPECT_EQ(res.elite_evaluations, 0u);
  ASSERT_EQ(res.archive.size(), best.size());
  for (const auto& [c, f] : best) EXPECT_EQ(*res.archive.best_at(c), f);
}

TEST(Engine, EvaluatedTreesAreCorrectedAndCapped) {
  GpConfig cfg = small_config(2);
  cfg.max_complexity = 120;
  std::atomic<int> bad{0};
  auto fit = [&](const PolicyTree& t) {
    if (!well_typed(t, 4, 2) || has_duplicate_variables(t) || complexity(t) > 120) ++bad;
    return toy_fitness(t);
  };
  Engine(fit, cfg, 4, 2).run();
  EXPECT_EQ(bad.load(), 0);
}

TEST(Engine, BudgetMatchesIndependentCount) {
  auto eval = cartpole_evaluator();
  auto res = evolve(eval, small_config(3));
  EXPECT_EQ(res.planned_evaluations(), eval.evaluations());
  EXPECT_EQ(res.generations.size(), 7u);
  EXPECT_EQ(res.generations.back().evaluations_used, eval.evaluations());
  for (const auto& g : res.generations) {
    EXPECT_LE(g.elites, 20u);
    EXPECT_LE(g.elites_admitted, g.elites);
  }
}

TEST(Engine, ArchiveMonotoneAndFrontNondominated) {
  auto eval = cartpole_evaluator();
  std::map<int, double> seen;
  bool monotone = true;
  auto res = evolve(eval, small_config(4), {}, [&](const GenerationStats& st) {
    for (const auto& [c, f] : st.level_best) {
      auto it = seen.find(c);
      if (it != seen.end() && f < it->second) monotone = false;
      seen[c] = f;
    }
    // Every level seen before must still be present.
    for (const auto& [c, f] : seen)
      if (!st.level_best.contains(c)) monotone = false;
  });
  EXPECT_TRUE(monotone);
  const auto front = res.archive.front();
  ASSERT_FALSE(front.empty());
  for (std::size_t i = 1; i < front.size(); ++i) {
    EXPECT_GT(front[i].complexity, front[i - 1].complexity);
    EXPECT_GT(front[i].fitness, front[i - 1].fitness);
  }
  for (const auto& e : front) EXPECT_DOUBLE_EQ(eval(to_policy(e.tree, {{-30, 30}})), e.fitness);
}

TEST(Engine, DeterministicAcrossWorkerCounts) {
  auto e1 = cartpole_evaluator();
  auto e3 = cartpole_evaluator();
  auto cfg = small_config(5);
  auto a = evolve(e1, cfg);
  cfg.workers = 3;
  auto b = evolve(e3, cfg);
  const auto fa = a.archive.front(), fb = b.archive.front();
  ASSERT_EQ(fa.size(), fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) {
    EXPECT_EQ(fa[i].tree, fb[i].tree);
    EXPECT_EQ(fa[i].fitness, fb[i].fitness);
  }
}

TEST(Engine, FailedEvaluationsScoreMinusInfinity) {
  auto fit = [](const PolicyTree& t) -> double {
    if (complexity(t) % 2 == 0) throw EvaluationError("diverged", 3);
    return toy_fitness(t);
  };
  auto res = Engine(fit, small_config(6), 2, 1).run();
  for (const auto& [c, e] : res.archive.levels()) {
    EXPECT_EQ(c % 2, 1);
    EXPECT_TRUE(std::isfinite(e.fitness));
  }
}

TEST(Engine, ImprovesOverGenerations) {
  auto cfg = small_config(7);
  cfg.generations = 15;
  auto res = Engine(toy_fitness, cfg, 2, 1).run();
  EXPECT_GT(res.generations.back().best_fitness, res.generations.front().best_fitness);
}

TEST(Archive, OfferKeepsStrictImprovementsOnly) {
  ParetoArchive a;
  EXPECT_TRUE(a.offer(entry(12, -5.0)));
  EXPECT_FALSE(a.offer(entry(12, -5.0)));
  EXPECT_FALSE(a.offer(entry(12, -6.0)));
  EXPECT_TRUE(a.offer(entry(12, -4.0)));
  EXPECT_EQ(*a.best_at(12), -4.0);
  EXPECT_FALSE(a.best_at(13).has_value());
}

TEST(Archive, FrontDropsDominatedLevels) {
  auto f = nondominated({entry(12, -10), entry(20, -12), entry(30, -8), entry(40, -8), entry(50, -1)});
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].complexity, 12);
  EXPECT_EQ(f[1].complexity, 30);
  EXPECT_EQ(f[2].complexity, 50);
}
