#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "fuzzyrl/pso.hpp"

using namespace fuzzyrl;

namespace {

SwarmConfig box_config(std::size_t dim, double lo, double hi, std::size_t n, std::size_t iters, std::uint64_t seed) {
  SwarmConfig cfg;
  cfg.swarm_size = n;
  cfg.iterations = iters;
  cfg.lower.assign(dim, lo);
  cfg.upper.assign(dim, hi);
  cfg.seed = seed;
  return cfg;
}

double neg_sq_norm(std::span<const double> x) {
  return -std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

}  // namespace

TEST(Pso, SphereReachesOrigin) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto res = pso_maximize(neg_sq_norm, box_config(5, -1, 1, 50, 200, seed));
    EXPECT_GE(res.best_fitness, -1e-3) << "seed " << seed;
    EXPECT_EQ(res.evaluations, 50u * 200u);
    EXPECT_EQ(res.history.size(), 200u);
  }
}

TEST(Pso, SingleIterationKeepsInitialPositions) {
  std::vector<std::vector<double>> initial;
  auto res = pso_maximize(neg_sq_norm, box_config(3, -1, 1, 10, 1, 4), {}, [&](const SwarmSnapshot& snap) {
    for (std::size_t i = 0; i < snap.positions.size(); ++i) EXPECT_EQ(snap.personal_best[i], snap.positions[i]);
  });
  EXPECT_EQ(res.evaluations, 10u);
}

TEST(Pso, ConstantObjectiveNeverReplacesPersonalBests) {
  std::vector<std::vector<double>> first;
  pso_maximize([](std::span<const double>) { return 1.0; }, box_config(3, -1, 1, 8, 20, 5), {},
               [&](const SwarmSnapshot& snap) {
                 if (snap.iteration == 1) first.assign(snap.personal_best.begin(), snap.personal_best.end());
                 for (std::size_t i = 0; i < first.size(); ++i) ASSERT_EQ(snap.personal_best[i], first[i]);
               });
  EXPECT_EQ(first.size(), 8u);
}

TEST(Pso, MonotoneBestsAndBoundedPositions) {
  auto cfg = box_config(4, -2, 3, 20, 60, 6);
  std::vector<double> last_personal;
  double last_global = -INFINITY;
  auto objective = [](std::span<const double> x) { return std::sin(3 * x[0]) * std::cos(2 * x[1]) - x[2] * x[2] + x[3]; };
  auto res = pso_maximize(objective, cfg, {}, [&](const SwarmSnapshot& snap) {
    ASSERT_GE(snap.global_best_fitness, last_global);
    last_global = snap.global_best_fitness;
    for (std::size_t i = 0; i < last_personal.size(); ++i) ASSERT_GE(snap.personal_best_fitness[i], last_personal[i]);
    last_personal.assign(snap.personal_best_fitness.begin(), snap.personal_best_fitness.end());
    for (const auto& x : snap.positions)
      for (std::size_t d = 0; d < x.size(); ++d) {
        ASSERT_GE(x[d], cfg.lower[d]);
        ASSERT_LE(x[d], cfg.upper[d]);
      }
  });
  for (std::size_t d = 0; d < 4; ++d) {
    EXPECT_GE(res.best_position[d], cfg.lower[d]);
    EXPECT_LE(res.best_position[d], cfg.upper[d]);
  }
  EXPECT_TRUE(std::is_sorted(res.history.begin(), res.history.end()));
}

TEST(Pso, DeterministicAcrossWorkerCounts) {
  auto cfg = box_config(3, -1, 1, 16, 30, 7);
  auto a = pso_maximize(neg_sq_norm, cfg);
  cfg.workers = 4;
  auto b = pso_maximize(neg_sq_norm, cfg);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.best_position, b.best_position);
}

TEST(Pso, NonFiniteScoresNeverWin) {
  auto objective = [](std::span<const double> x) { return x[0] > 0 ? NAN : x[0]; };
  auto res = pso_maximize(objective, box_config(1, -1, 1, 10, 20, 8));
  EXPECT_LE(res.best_position[0], 0.0);
  EXPECT_TRUE(std::isfinite(res.best_fitness));
}

TEST(Pso, SeedPositionIsEvaluated) {
  auto cfg = box_config(2, -1, 1, 4, 1, 9);
  auto res = pso_maximize(neg_sq_norm, cfg, {{0.0, 0.0}});
  EXPECT_EQ(res.best_fitness, 0.0);
}

TEST(Pso, GlobalTopology) {
  auto cfg = box_config(5, -1, 1, 30, 150, 10);
  cfg.topology = Topology::Global;
  EXPECT_GE(pso_maximize(neg_sq_norm, cfg).best_fitness, -1e-3);
}

TEST(Pso, InvalidConfigRejected) {
  auto cfg = box_config(2, -1, 1, 1, 10, 0);
  EXPECT_THROW(pso_maximize(neg_sq_norm, cfg), ConfigError);
  cfg = box_config(2, 1, 1, 5, 10, 0);
  EXPECT_THROW(pso_maximize(neg_sq_norm, cfg), ConfigError);
}

TEST(Fpsrl, SearchDimensionFollowsLayout) {
  FixedStructure s{{{{0, 1, 2, 3}, 2, {-30, 30}}}};
  std::vector<double> lo, hi;
  parameter_bounds(s, TerminalBox{}, lo, hi);
  EXPECT_EQ(lo.size(), 19u);
  EXPECT_EQ(lo[0], -1.0);   // center
  EXPECT_EQ(lo[4], 1e-3);   // width
  EXPECT_EQ(hi[8], 3.0);    // consequent
  EXPECT_EQ(lo[18], 0.1);   // alpha
}

TEST(Fpsrl, ThreeActionComplexity) {
  std::vector<std::vector<std::size_t>> feats{{0}, {1}, {2}};
  auto s = make_structure(feats, 2, {{-1, 1}, {-1, 1}, {-1, 1}});
  std::vector<double> v(parameter_count(s), 0.5);
  EXPECT_EQ(complexity(decode(v, s)), 99);
}

TEST(Fpsrl, BeatsRandomParameterBaseline) {
  auto env = std::make_shared<CartPole>();
  auto data = generate_dataset(*env, 20, 100, CartPole::data_region(), 1);
  FitnessEvaluator eval(exact_model(env), {100, 0.994, sample_start_states(*env, CartPole::start_region(), 5, 1)});
  std::vector<std::vector<std::size_t>> feats{{0, 1, 2, 3}};
  auto structure = make_structure(feats, 2, env->action_bounds());
  SwarmConfig swarm;
  swarm.swarm_size = 20;
  swarm.iterations = 30;
  swarm.seed = 3;
  auto res = fpsrl_train(structure, eval, swarm, data.state_scaling());
  EXPECT_EQ(res.evaluations, 600u);
  EXPECT_EQ(eval.evaluations(), 600u);
  EXPECT_DOUBLE_EQ(eval(res.policy), res.fitness);

  std::vector<double> lo, hi;
  parameter_bounds(structure, TerminalBox{}, lo, hi);
  Rng rng(99);
  double mean = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> v(lo.size());
    for (std::size_t d = 0; d < v.size(); ++d) v[d] = uniform(rng, lo[d], hi[d]);
    mean += eval(decode(v, structure, data.state_scaling())) / 100.0;
  }
  EXPECT_GT(res.fitness, mean);
}

TEST(Fpsrl, RejectsOutOfRangeFeatures) {
  auto env = std::make_shared<CartPole>();
  FitnessEvaluator eval(exact_model(env), {10, 0.9, {State{0, 0, 0, 0}}});
  std::vector<std::vector<std::size_t>> feats{{0, 7}};
  EXPECT_THROW(fpsrl_train(make_structure(feats, 1, env->action_bounds()), eval, SwarmConfig{}), StructureError);
}
