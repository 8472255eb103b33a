#include <sstream>

#include <gtest/gtest.h>

#include "fuzzyrl/gp_operators.hpp"
#include "fuzzyrl/io.hpp"

using namespace fuzzyrl;
using json = nlohmann::json;

TEST(PolicyJson, RoundTripIsExact) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    auto t = gp::random_tree(rng, {4, 2, 4, 4, {}});
    const StateScaling scaling{{-1.5, -2, 0, -3}, {1.5, 2, 1, 3}};
    auto p = gp::to_policy(t, {{-30, 30}, {0, 1}}, scaling);
    const auto text = io::to_json(p, {std::nullopt, -12.5, 7, "unit"}).dump();
    auto q = io::policy_from_json(json::parse(text));
    ASSERT_EQ(gp::from_policy(q), t);
    ASSERT_EQ(q.scaling.lo, scaling.lo);
    ASSERT_EQ(q.scaling.hi, scaling.hi);
    State s{0.3, -0.1, 0.7, 2.0};
    ASSERT_EQ(policy_output(p, s), policy_output(q, s));
  }
}

TEST(PolicyJson, MetadataFields) {
  FuzzyPolicy p{{{{{{}, 1.0}}, 2.0, {-30, 30}}}, {}};
  auto j = io::to_json(p, {std::nullopt, -3.0, 11, "exact:cartpole"});
  EXPECT_EQ(j["metadata"]["complexity"], 12);
  EXPECT_EQ(j["metadata"]["fitness"], -3.0);
  EXPECT_EQ(j["metadata"]["seed"], 11);
  EXPECT_EQ(j["metadata"]["provenance"], "exact:cartpole");
  EXPECT_FALSE(j.contains("scaling"));
}

TEST(TreeJson, RoundTripAndUnknownTag) {
  Rng rng(2);
  auto t = gp::random_tree(rng, {3, 3, 3, 3, {}});
  EXPECT_EQ(io::tree_from_json(json::parse(io::to_json(t).dump())), t);
  EXPECT_THROW(io::tree_from_json(json::parse(R"([["pi"],["beta",1]])")), StructureError);
}

TEST(DatasetJsonl, RoundTripIsExact) {
  CartPole cp;
  auto d = generate_dataset(cp, 3, 15, CartPole::data_region(), 4);
  std::stringstream ss;
  io::write_dataset(ss, d);
  auto e = io::read_dataset(ss);
  EXPECT_EQ(e.env_name, "cartpole");
  EXPECT_EQ(e.seed, 4u);
  EXPECT_EQ(e.n_traj, 3u);
  ASSERT_EQ(e.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(e.tuples[i].s, d.tuples[i].s);
    EXPECT_EQ(e.tuples[i].a, d.tuples[i].a);
    EXPECT_EQ(e.tuples[i].s_next, d.tuples[i].s_next);
    EXPECT_EQ(e.tuples[i].r, d.tuples[i].r);
    EXPECT_EQ(e.tuples[i].traj_id, d.tuples[i].traj_id);
  }
  EXPECT_EQ(dataset_hash(e), dataset_hash(d));
}

TEST(DatasetJsonl, RejectsEmptyAndInconsistentFiles) {
  std::stringstream empty;
  EXPECT_THROW(io::read_dataset(empty), StructureError);
  std::stringstream bad(R"({"env":"x","state_dim":2,"action_dim":1})"
                        "\n"
                        R"({"s":[1],"a":[0],"s_next":[1,2],"r":0,"traj_id":0})"
                        "\n");
  EXPECT_THROW(io::read_dataset(bad), StructureError);
}

TEST(ArchiveJsonl, RoundTrip) {
  Rng rng(3);
  std::vector<gp::ArchiveEntry> entries;
  for (int i = 0; i < 5; ++i) {
    auto t = gp::random_tree(rng, {4, 1, 3, 3, {}});
    gp::ArchiveEntry e{t, gp::complexity(t), -10.0 + i, std::nullopt, static_cast<std::size_t>(i)};
    if (i % 2) e.fitness_real = -11.0 + i;
    entries.push_back(e);
  }
  const StateScaling scaling{{-1, -1, -1, -1}, {1, 2, 3, 4}};
  std::stringstream ss;
  io::write_archive(ss, entries, {{-30, 30}}, scaling, json{{"seed", 5}});
  auto f = io::read_archive(ss);
  ASSERT_EQ(f.entries.size(), entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    EXPECT_EQ(f.entries[i].tree, entries[i].tree);
    EXPECT_EQ(f.entries[i].complexity, entries[i].complexity);
    EXPECT_EQ(f.entries[i].fitness, entries[i].fitness);
    EXPECT_EQ(f.entries[i].fitness_real, entries[i].fitness_real);
    EXPECT_EQ(f.entries[i].generation_found, entries[i].generation_found);
  }
  EXPECT_EQ(f.bounds.size(), 1u);
  EXPECT_EQ(f.bounds[0].hi, 30.0);
  EXPECT_EQ(f.scaling.hi, scaling.hi);
  EXPECT_EQ(f.provenance["seed"], 5);
}

TEST(FrontCsv, PenaltyColumns) {
  gp::ArchiveEntry a{{}, 12, -40.0, -42.5, 0};
  gp::ArchiveEntry b{{}, 63, -20.0, std::nullopt, 3};
  std::stringstream ss;
  io::write_front_csv(ss, {a, b});
  EXPECT_EQ(ss.str(), "complexity,penalty_model,penalty_real\n12,40,42.5\n63,20,\n");
}

TEST(RankingJson, RoundTrip) {
  FeatureRanking r{{{{2, 0.9}, {0, 0.4}}, {{1, 0.7}}}};
  auto j = io::to_json(r);
  EXPECT_TRUE(j.contains("0"));
  EXPECT_TRUE(j.contains("1"));
  auto q = io::ranking_from_json(json::parse(j.dump()));
  ASSERT_EQ(q.per_action.size(), 2u);
  EXPECT_EQ(q.top(0, 2), (std::vector<std::size_t>{2, 0}));
  EXPECT_EQ(q.per_action[1][0].score, 0.7);
}
