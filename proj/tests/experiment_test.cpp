#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fuzzyrl/experiment.hpp"

using namespace fuzzyrl;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(std::uint64_t seed = 3) {
  auto j = json::parse(R"({
    "dataset": {"trajectories": 5, "length": 20},
    "fitness": {"horizon": 20, "start_states": 2, "test_states": 3},
    "feature_selection": {"enabled": true, "max_states": 100, "horizon": 3, "swarm": 4, "iterations": 3, "select": 2},
    "fpsrl": {"rules": 2, "swarm": 4, "iterations": 3},
    "fgprl": {"population": 12, "generations": 2, "init_max_rules": 2},
    "local_search": {"enabled": true, "swarm": 3, "iterations": 2}
  })");
  j["seed"] = seed;
  return ExperimentConfig::from_json(j);
}

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fuzzyrl_exp_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error_field(const json& j) {
  try {
    ExperimentConfig::from_json(j).validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

gp::ArchiveEntry entry(int c, double f, std::optional<double> real = std::nullopt) {
  gp::ArchiveEntry e;
  e.complexity = c;
  e.fitness = f;
  e.fitness_real = real;
  return e;
}

}  // namespace

TEST(Config, DefaultsAreDeskScale) {
  const auto c = ExperimentConfig::from_json(json::object());
  EXPECT_EQ(c.fitness.horizon, 300u);
  EXPECT_EQ(c.fitness.gamma, 0.994);
  EXPECT_EQ(c.fitness.start_states, 20u);
  EXPECT_EQ(c.fitness.test_states, 100u);
  EXPECT_EQ(declared_fpsrl_budget(c), 200000u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(config_error_field(json::parse(R"({"fgprl": {"random_ratio": 0.5}})")), "fgprl.ratios");
  EXPECT_EQ(config_error_field(json::parse(R"({"model": {"kind": "gp"}})")), "model.kind");
  EXPECT_EQ(config_error_field(json::parse(R"({"fitness": {"horizon": "long"}})")), "fitness.horizon");
  EXPECT_EQ(config_error_field(json::parse(R"({"fpsrl": {"particles": 3}})")), "fpsrl.particles");
  EXPECT_EQ(config_error_field(json::parse(R"({"solver": {}})")), "solver");
  EXPECT_EQ(config_error_field(json::parse(R"({"fitness": {"gamma": 1.5}})")), "fitness.gamma");
}

TEST(Config, RoundTripAndHash) {
  const auto c = tiny_config();
  const auto d = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(d.to_json(), c.to_json());
  EXPECT_EQ(config_hash(c), config_hash(d));
  EXPECT_EQ(config_hash(c).size(), 16u);
  EXPECT_NE(config_hash(c), config_hash(tiny_config(4)));
}

TEST(Budget, DeclaredFpsrlBudgetIsSwarmTimesIterations) {
  auto c = ExperimentConfig::from_json(json::parse(R"({"fpsrl": {"swarm": 1000, "iterations": 10000}})"));
  EXPECT_EQ(declared_fpsrl_budget(c), 10000000u);
}

TEST(Pipeline, BundleIsSelfDescribingAndBudgetsMatch) {
  const auto dir = fresh_dir("bundle");
  Pipeline p(tiny_config(), dir);
  p.run_all();
  for (const char* f : {"dataset.jsonl", "model.json", "ranking.json", "fpsrl_policy.json", "fpsrl_curve.csv",
                        "fgprl_front.jsonl", "fgprl_front.csv", "fgprl_curve.csv", "tuned_front.jsonl",
                        "budget.json", "timing.json", "comparison.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto budget = io::read_json_file((dir / "budget.json").string());
  EXPECT_EQ(budget["provenance"]["config_hash"], p.hash());
  for (const char* stage : {"feature_selection", "fpsrl", "fgprl", "local_search"}) {
    ASSERT_TRUE(budget["stages"].contains(stage)) << stage;
    EXPECT_EQ(budget["stages"][stage]["declared"], budget["stages"][stage]["counted"]) << stage;
  }
  EXPECT_EQ(budget["stages"]["fpsrl"]["counted"], 12u);
  const auto policy = io::read_json_file((dir / "fpsrl_policy.json").string());
  EXPECT_EQ(policy["metadata"]["config_hash"], p.hash());
  EXPECT_EQ(policy["metadata"]["seed"], 3u);
  std::ifstream front(dir / "fgprl_front.jsonl");
  EXPECT_EQ(io::read_archive(front).provenance["config_hash"], p.hash());
}

TEST(Pipeline, SameSeedGivesBitIdenticalBundle) {
  const auto a = fresh_dir("same_a"), b = fresh_dir("same_b");
  run_experiment(tiny_config(), a);
  auto cfg = tiny_config();
  cfg.workers = 3;
  run_experiment(cfg, b);
  std::size_t compared = 0;
  for (const auto& f : fs::directory_iterator(a)) {
    const auto name = f.path().filename().string();
    if (name == "timing.json") continue;
    ASSERT_TRUE(fs::exists(b / name)) << name;
    EXPECT_EQ(slurp(f.path()), slurp(b / name)) << name;
    ++compared;
  }
  EXPECT_GE(compared, 12u);
}

TEST(Pipeline, ExactModelGapIsZero) {
  const auto dir = fresh_dir("gap");
  auto cfg = tiny_config();
  cfg.feature_selection.enabled = false;
  Pipeline p(cfg, dir);
  p.run_all();
  const auto report = p.run_evaluate();
  EXPECT_EQ(report["fpsrl"]["gap"], 0.0);
  EXPECT_EQ(report["fpsrl"]["fitness_model"], report["fpsrl"]["fitness_real"]);
  for (const char* name : {"fgprl", "tuned"}) {
    ASSERT_FALSE(report[name].empty()) << name;
    for (const auto& row : report[name]) EXPECT_EQ(row["gap"], 0.0) << name;
  }
  const auto policy = io::read_json_file((dir / "fpsrl_policy.json").string());
  EXPECT_EQ(policy["metadata"]["fitness_real"], report["fpsrl"]["fitness_real"]);
}

TEST(Pipeline, KnnGapIsReported) {
  const auto dir = fresh_dir("knn");
  auto cfg = tiny_config();
  cfg.model.kind = "knn";
  cfg.feature_selection.enabled = false;
  cfg.local_search.enabled = false;
  cfg.fgprl_enabled = false;
  Pipeline p(cfg, dir);
  p.run_fpsrl();
  const auto report = p.run_evaluate();
  ASSERT_TRUE(report.contains("fpsrl"));
  EXPECT_TRUE(report["fpsrl"]["gap"].is_number());
  EXPECT_EQ(io::read_json_file((dir / "model.json").string())["kind"], "knn");
}

TEST(Pipeline, FailureLeavesErrorManifestAndPartialResults) {
  const auto dir = fresh_dir("fail");
  auto cfg = tiny_config();
  cfg.local_search.enabled = false;
  cfg.feature_selection.enabled = false;
  cfg.dataset.path = (dir / "missing.jsonl").string();
  EXPECT_THROW(run_experiment(cfg, dir), std::runtime_error);
  const auto err = io::read_json_file((dir / "error.json").string());
  EXPECT_EQ(err["stage"], "dataset");

  const auto dir2 = fresh_dir("fail_tune");
  Pipeline p(tiny_config(), dir2);
  EXPECT_THROW(p.run_tune(), std::runtime_error);
}

TEST(Pipeline, ReloadsDatasetFromOutputDirectory) {
  const auto dir = fresh_dir("reload");
  {
    Pipeline p(tiny_config(), dir);
    p.dataset();
  }
  const auto before = slurp(dir / "dataset.jsonl");
  Pipeline q(tiny_config(), dir);
  EXPECT_EQ(dataset_hash(q.dataset()), dataset_hash(generate_dataset(q.environment(), 5, 20,
                                                                      CartPole::data_region(),
                                                                      derive_seed({3, 0x64617461ULL}))));
  EXPECT_EQ(slurp(dir / "dataset.jsonl"), before);
}

TEST(CompareFronts, SingleRunCollapsesToOneValue) {
  const auto rows = compare_fronts({{"fgprl", {{entry(12, -40.0, -41.0), entry(63, -20.0, -22.5)}}}});
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.model_min, r.model_median);
    EXPECT_EQ(r.model_median, r.model_max);
    EXPECT_EQ(*r.real_min, *r.real_max);
  }
  EXPECT_EQ(rows[0].model_median, 40.0);
  EXPECT_EQ(*rows[1].real_median, 22.5);
}

TEST(CompareFronts, PenaltyIsNegatedFitness) {
  std::vector<std::vector<gp::ArchiveEntry>> runs;
  for (double f : {-1.25, -3.5, -0.125}) runs.push_back({entry(30, f, f - 1)});
  const auto rows = compare_fronts({{"m", runs}});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].model_min, 0.125);
  EXPECT_EQ(rows[0].model_median, 1.25);
  EXPECT_EQ(rows[0].model_max, 3.5);
  EXPECT_EQ(*rows[0].real_min, 1.125);
}

TEST(CompareFronts, EvenCountMedianAveragesMiddlePair) {
  std::vector<std::vector<gp::ArchiveEntry>> runs;
  for (int i = 10; i >= 1; --i) runs.push_back({entry(12, -static_cast<double>(i * i))});
  const auto rows = compare_fronts({{"m", runs}});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].runs, 10u);
  EXPECT_EQ(rows[0].model_median, (25.0 + 36.0) / 2);
  EXPECT_FALSE(rows[0].real_median.has_value());
}

TEST(CompareFronts, LevelsAndMethodsAreSeparate) {
  const auto rows = compare_fronts({{"a", {{entry(12, -1)}, {entry(20, -2)}}}, {"b", {{entry(12, -3)}}}});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].method, "a");
  EXPECT_EQ(rows[1].complexity, 20);
  EXPECT_EQ(rows[2].method, "b");
  std::ostringstream os;
  write_comparison_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "method,complexity,runs,penalty_model_min,penalty_model_median,penalty_model_max,"
            "penalty_real_min,penalty_real_median,penalty_real_max");
}
