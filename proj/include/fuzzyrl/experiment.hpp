#pragma once

// Declarative experiment pipeline: dataset, model, feature selection, FPSRL,
// FGPRL, terminal tuning and real-system evaluation, each stage writing its
// artifacts into one output directory.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuzzyrl/environment.hpp"
#include "fuzzyrl/errors.hpp"
#include "fuzzyrl/feature_selection.hpp"
#include "fuzzyrl/fgprl.hpp"
#include "fuzzyrl/fitness.hpp"
#include "fuzzyrl/io.hpp"
#include "fuzzyrl/local_search.hpp"
#include "fuzzyrl/model.hpp"
#include "fuzzyrl/pso.hpp"

namespace fuzzyrl {

using json = nlohmann::json;

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  struct Env {
    std::string name = "cartpole";
    std::size_t irrelevant = 0;
    std::size_t redundant = 0;
  } env;

  struct Dataset {
    std::size_t trajectories = 100;
    std::size_t length = 100;
    /// Existing JSON-lines dataset to load instead of generating one.
    std::string path;
  } dataset;

  struct Model {
    std::string kind = "exact";
    std::size_t k = 5;
  } model;

  struct Fitness {
    std::size_t horizon = 300;
    double gamma = 0.994;
    std::size_t start_states = 20;
    std::size_t test_states = 100;
  } fitness;

  struct FeatureSelection {
    bool enabled = false;
    std::size_t max_states = 2000;
    std::size_t horizon = 50;
    std::size_t swarm = 50;
    std::size_t iterations = 50;
    std::size_t bins = 16;
    std::size_t select = 4;
  } feature_selection;

  struct Fpsrl {
    bool enabled = true;
    std::size_t rules = 4;
    /// Explicit state indices; empty means the ranking's top features when
    /// feature selection is on, otherwise every state dimension.
    std::vector<std::size_t> features;
    std::size_t swarm = 200;
    std::size_t iterations = 1000;
  } fpsrl;

  gp::GpConfig fgprl = [] {
    gp::GpConfig g;
    g.population = 200;
    g.generations = 100;
    return g;
  }();
  bool fgprl_enabled = true;

  struct Output {
    /// Artifact directory used when none is given on the command line.
    std::string dir;
  } output;

  struct LocalSearch {
    bool enabled = false;
    std::size_t swarm = 20;
    std::size_t iterations = 500;
  } local_search;

  void validate() const {
    if (env.name != "cartpole") throw ConfigError("env.name", "unknown environment '" + env.name + "'");
    if (dataset.path.empty() && (dataset.trajectories < 1 || dataset.length < 1))
      throw ConfigError("dataset.trajectories", "trajectories and length must be at least 1");
    if (model.kind != "exact" && model.kind != "knn") throw ConfigError("model.kind", "must be 'exact' or 'knn'");
    if (model.k < 1) throw ConfigError("model.k", "must be at least 1");
    if (fitness.horizon <= 1) throw ConfigError("fitness.horizon", "must be greater than 1");
    if (!(fitness.gamma >= 0.0 && fitness.gamma <= 1.0)) throw ConfigError("fitness.gamma", "must lie in [0, 1]");
    if (fitness.start_states < 1) throw ConfigError("fitness.start_states", "must be at least 1");
    if (fitness.test_states < 1) throw ConfigError("fitness.test_states", "must be at least 1");
    if (feature_selection.horizon < 1) throw ConfigError("feature_selection.horizon", "must be at least 1");
    if (feature_selection.swarm < 2) throw ConfigError("feature_selection.swarm", "must be at least 2");
    if (feature_selection.bins < 2) throw ConfigError("feature_selection.bins", "must be at least 2");
    if (fpsrl.rules < 1) throw ConfigError("fpsrl.rules", "must be at least 1");
    if (fpsrl.swarm < 2) throw ConfigError("fpsrl.swarm", "must be at least 2");
    if (local_search.swarm < 2) throw ConfigError("local_search.swarm", "must be at least 2");
    fgprl.validate();
  }

  json to_json() const {
    return {{"seed", seed},
            {"workers", workers},
            {"env", {{"name", env.name}, {"irrelevant", env.irrelevant}, {"redundant", env.redundant}}},
            {"dataset", {{"trajectories", dataset.trajectories}, {"length", dataset.length}, {"path", dataset.path}}},
            {"model", {{"kind", model.kind}, {"k", model.k}}},
            {"fitness",
             {{"horizon", fitness.horizon},
              {"gamma", fitness.gamma},
              {"start_states", fitness.start_states},
              {"test_states", fitness.test_states}}},
            {"feature_selection",
             {{"enabled", feature_selection.enabled},
              {"max_states", feature_selection.max_states},
              {"horizon", feature_selection.horizon},
              {"swarm", feature_selection.swarm},
              {"iterations", feature_selection.iterations},
              {"bins", feature_selection.bins},
              {"select", feature_selection.select}}},
            {"fpsrl",
             {{"enabled", fpsrl.enabled},
              {"rules", fpsrl.rules},
              {"features", fpsrl.features},
              {"swarm", fpsrl.swarm},
              {"iterations", fpsrl.iterations}}},
            {"fgprl",
             {{"enabled", fgprl_enabled},
              {"population", fgprl.population},
              {"generations", fgprl.generations},
              {"tournament_size", fgprl.tournament_size},
              {"crossover_ratio", fgprl.crossover_ratio},
              {"reproduction_ratio", fgprl.reproduction_ratio},
              {"mutation_ratio", fgprl.mutation_ratio},
              {"random_ratio", fgprl.random_ratio},
              {"elite_fraction", fgprl.elite_fraction},
              {"max_elites", fgprl.max_elites},
              {"elite_copies", fgprl.elite_copies},
              {"max_complexity", fgprl.max_complexity},
              {"init_max_rules", fgprl.init_max_rules},
              {"init_max_dims", fgprl.init_max_dims}}},
            {"output", {{"dir", output.dir}}},
            {"local_search",
             {{"enabled", local_search.enabled},
              {"swarm", local_search.swarm},
              {"iterations", local_search.iterations}}}};
  }

  /// Reads a config document; absent keys keep their defaults and unknown
  /// keys are rejected.
  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
    const std::set<std::string> sections{"env", "dataset", "model", "fitness", "feature_selection",
                                         "fpsrl", "fgprl", "local_search", "output"};
    for (const auto& [key, value] : j.items()) {
      if (key == "seed" || key == "workers") continue;
      if (!sections.contains(key)) throw ConfigError(key, "unknown config key");
      if (!value.is_object()) throw ConfigError(key, "must be an object");
    }
    get(j, "", "seed", c.seed);
    get(j, "", "workers", c.workers);

    const json none = json::object();
    auto sec = [&](const char* name) -> const json& { return j.contains(name) ? j.at(name) : none; };
    Reader env(sec("env"), "env");
    env("name", c.env.name)("irrelevant", c.env.irrelevant)("redundant", c.env.redundant).done();
    Reader ds(sec("dataset"), "dataset");
    ds("trajectories", c.dataset.trajectories)("length", c.dataset.length)("path", c.dataset.path).done();
    Reader model(sec("model"), "model");
    model("kind", c.model.kind)("k", c.model.k).done();
    Reader fit(sec("fitness"), "fitness");
    fit("horizon", c.fitness.horizon)("gamma", c.fitness.gamma)("start_states", c.fitness.start_states)(
           "test_states", c.fitness.test_states)
        .done();
    Reader fs(sec("feature_selection"), "feature_selection");
    auto& f = c.feature_selection;
    fs("enabled", f.enabled)("max_states", f.max_states)("horizon", f.horizon)("swarm", f.swarm)(
          "iterations", f.iterations)("bins", f.bins)("select", f.select)
        .done();
    Reader ps(sec("fpsrl"), "fpsrl");
    ps("enabled", c.fpsrl.enabled)("rules", c.fpsrl.rules)("features", c.fpsrl.features)("swarm", c.fpsrl.swarm)(
          "iterations", c.fpsrl.iterations)
        .done();
    Reader gpr(sec("fgprl"), "fgprl");
    auto& g = c.fgprl;
    gpr("enabled", c.fgprl_enabled)("population", g.population)("generations", g.generations)(
           "tournament_size", g.tournament_size)("crossover_ratio", g.crossover_ratio)(
           "reproduction_ratio", g.reproduction_ratio)("mutation_ratio", g.mutation_ratio)(
           "random_ratio", g.random_ratio)("elite_fraction", g.elite_fraction)("max_elites", g.max_elites)(
           "elite_copies", g.elite_copies)("max_complexity", g.max_complexity)("init_max_rules", g.init_max_rules)(
           "init_max_dims", g.init_max_dims)
        .done();
    Reader ls(sec("local_search"), "local_search");
    ls("enabled", c.local_search.enabled)("swarm", c.local_search.swarm)("iterations", c.local_search.iterations)
        .done();
    Reader out(sec("output"), "output");
    out("dir", c.output.dir).done();
    return c;
  }

 private:
  template <class T>
  static void get(const json& obj, const std::string& section, const char* key, T& out) {
    if (!obj.contains(key)) return;
    const std::string field = section.empty() ? key : section + "." + key;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field, e.what());
    }
  }

  /// Chained field reader that remembers which keys it consumed.
  class Reader {
   public:
    Reader(const json& obj, std::string section) : obj_(obj), section_(std::move(section)) {}
    template <class T>
    Reader& operator()(const char* key, T& out) {
      get(obj_, section_, key, out);
      seen_.insert(key);
      return *this;
    }
    void done() const {
      for (const auto& [key, value] : obj_.items())
        if (!seen_.contains(key)) throw ConfigError(section_ + "." + key, "unknown config key");
    }

   private:
    const json& obj_;
    std::string section_;
    std::set<std::string> seen_;
  };
};

/// Config without worker count and output location, which never change results.
inline json result_relevant_config(const ExperimentConfig& cfg) {
  auto j = cfg.to_json();
  j.erase("workers");
  j.erase("output");
  return j;
}

/// FNV-1a of the canonical (defaults filled, sorted keys) config text.
inline std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = result_relevant_config(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// FPSRL fitness evaluations, known before the stage runs.
inline std::uint64_t declared_fpsrl_budget(const ExperimentConfig& cfg) {
  return static_cast<std::uint64_t>(cfg.fpsrl.swarm) * cfg.fpsrl.iterations;
}

// ---------------------------------------------------------------------------
// Front comparison

struct ComparisonRow {
  std::string method;
  int complexity = 0;
  std::size_t runs = 0;
  double model_min = 0, model_median = 0, model_max = 0;
  std::optional<double> real_min, real_median, real_max;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw StructureError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Per method and complexity level: min/median/max penalty (= -fitness) over
/// the runs that reached that level. Real penalties are summarized only
/// where every contributing entry carries a real fitness.
inline std::vector<ComparisonRow> compare_fronts(
    const std::map<std::string, std::vector<std::vector<gp::ArchiveEntry>>>& runs_by_method) {
  std::vector<ComparisonRow> rows;
  for (const auto& [method, runs] : runs_by_method) {
    std::map<int, std::vector<const gp::ArchiveEntry*>> levels;
    for (const auto& run : runs)
      for (const auto& e : run) levels[e.complexity].push_back(&e);
    for (const auto& [c, entries] : levels) {
      ComparisonRow row;
      row.method = method;
      row.complexity = c;
      row.runs = entries.size();
      std::vector<double> model, real;
      for (const auto* e : entries) {
        model.push_back(-e->fitness);
        if (e->fitness_real) real.push_back(-*e->fitness_real);
      }
      row.model_min = *std::min_element(model.begin(), model.end());
      row.model_max = *std::max_element(model.begin(), model.end());
      row.model_median = median_of(model);
      if (real.size() == model.size()) {
        row.real_min = *std::min_element(real.begin(), real.end());
        row.real_max = *std::max_element(real.begin(), real.end());
        row.real_median = median_of(real);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "method,complexity,runs,penalty_model_min,penalty_model_median,penalty_model_max,"
        "penalty_real_min,penalty_real_median,penalty_real_max\n";
  os << std::setprecision(17);
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& r : rows) {
    os << r.method << ',' << r.complexity << ',' << r.runs << ',' << r.model_min << ',' << r.model_median << ','
       << r.model_max << ',';
    opt(r.real_min);
    os << ',';
    opt(r.real_median);
    os << ',';
    opt(r.real_max);
    os << '\n';
  }
}

/// Model decorator that tallies predict() calls.
class CountingModel final : public SystemModel {
 public:
  using SystemModel::predict;

  explicit CountingModel(const SystemModel& inner) : inner_(inner) {}
  std::string kind() const override { return inner_.kind(); }
  std::string fingerprint() const override { return inner_.fingerprint(); }
  std::size_t state_dim() const override { return inner_.state_dim(); }
  std::size_t action_dim() const override { return inner_.action_dim(); }
  std::vector<Interval> action_bounds() const override { return inner_.action_bounds(); }
  double predict(std::span<const double> s, std::span<const double> a, std::span<double> next) const override {
    calls_.add();
    return inner_.predict(s, a, next);
  }
  std::uint64_t calls() const noexcept { return calls_.value(); }

 private:
  const SystemModel& inner_;
  mutable EvaluationCounter calls_;
};

using RunsByMethod = std::map<std::string, std::vector<std::vector<gp::ArchiveEntry>>>;

/// Reads fpsrl_policy.json as a single archive entry.
inline gp::ArchiveEntry policy_entry(const std::filesystem::path& file) {
  const auto doc = io::read_json_file(file.string());
  const auto p = io::policy_from_json(doc);
  gp::ArchiveEntry e;
  e.tree = gp::from_policy(p);
  e.complexity = complexity(p);
  const auto& meta = doc.at("metadata");
  e.fitness = meta.at("fitness").get<double>();
  if (meta.contains("fitness_real")) e.fitness_real = meta["fitness_real"].get<double>();
  return e;
}

/// Adds the FPSRL policy and the fronts found in one run directory.
inline void collect_run(RunsByMethod& runs, const std::filesystem::path& dir) {
  const auto policy_file = dir / "fpsrl_policy.json";
  if (std::filesystem::exists(policy_file)) runs["fpsrl"].push_back({policy_entry(policy_file)});
  for (const char* name : {"fgprl", "tuned"}) {
    const auto file = dir / (std::string(name) + "_front.jsonl");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file);
    runs[name].push_back(io::read_archive(in).entries);
  }
}

// ---------------------------------------------------------------------------
// Pipeline

struct StageBudget {
  std::uint64_t declared = 0;
  std::uint64_t counted = 0;
  double wall_seconds = 0.0;
};

struct FpsrlOutcome {
  FpsrlResult result;
  FixedStructure structure;
  double fitness_real = 0.0;
};

struct FgprlOutcome {
  gp::EvolveResult result;
  std::vector<gp::ArchiveEntry> front;  // with real fitness filled in
};

struct TuneOutcome {
  gp::TuneFrontResult result;
  std::vector<gp::ArchiveEntry> front;
};

/// Runs stages on demand, reusing artifacts already present in `out_dir`.
/// Every artifact except timing.json is a pure function of the config.
class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, std::filesystem::path out_dir) : cfg_(std::move(cfg)), out_(std::move(out_dir)) {
    cfg_.validate();
    std::filesystem::create_directories(out_);
    hash_ = config_hash(cfg_);
    auto base = std::make_shared<CartPole>();
    env_ = with_distractors(base, cfg_.env.irrelevant, cfg_.env.redundant, derive_seed({cfg_.seed, 0x656e76ULL}));
  }

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const std::filesystem::path& out_dir() const noexcept { return out_; }
  const std::string& hash() const noexcept { return hash_; }
  const Environment& environment() const noexcept { return *env_; }
  std::shared_ptr<const Environment> environment_ptr() const noexcept { return env_; }
  const std::map<std::string, StageBudget>& budgets() const noexcept { return budgets_; }

  /// Provenance block embedded in every artifact.
  json provenance() const { return {{"config_hash", hash_}, {"seed", cfg_.seed}}; }

  const TransitionDataset& dataset() {
    if (dataset_) return *dataset_;
    const auto file = out_ / "dataset.jsonl";
    const std::string src = !cfg_.dataset.path.empty() ? cfg_.dataset.path
                            : std::filesystem::exists(file) ? file.string()
                                                            : std::string();
    if (!src.empty()) {
      std::ifstream in(src);
      if (!in) throw std::runtime_error("cannot open dataset " + src);
      dataset_ = io::read_dataset(in);
      if (dataset_->state_dim != env_->state_dim() || dataset_->action_dim != env_->action_dim())
        throw StructureError("dataset dimensions do not match the configured environment");
    } else {
      dataset_ = generate_dataset(*env_, cfg_.dataset.trajectories, cfg_.dataset.length, CartPole::data_region(),
                                  derive_seed({cfg_.seed, 0x64617461ULL}));
      std::ofstream os(file, std::ios::binary);
      io::write_dataset(os, *dataset_);
    }
    return *dataset_;
  }

  std::shared_ptr<const SystemModel> model() {
    if (model_) return model_;
    if (cfg_.model.kind == "exact") {
      model_ = exact_model(env_);
    } else {
      model_ = knn_fit(dataset(), cfg_.model.k, env_->action_bounds());
    }
    json info{{"kind", model_->kind()}, {"fingerprint", model_->fingerprint()}, {"provenance", provenance()}};
    if (cfg_.model.kind == "knn") {
      info["k"] = cfg_.model.k;
      info["training_size"] = dataset().size();
    }
    io::write_text_file((out_ / "model.json").string(), info.dump(2) + "\n");
    return model_;
  }

  /// Shared training evaluator; its counter is reset at the start of each stage.
  const FitnessEvaluator& evaluator() {
    if (!evaluator_) {
      auto starts = sample_start_states(*env_, CartPole::start_region(), cfg_.fitness.start_states,
                                        derive_seed({cfg_.seed, 0x7472616eULL}));
      evaluator_.emplace(model(), FitnessConfig{cfg_.fitness.horizon, cfg_.fitness.gamma, std::move(starts)});
    }
    return *evaluator_;
  }

  /// Held-out start states for real-system evaluation.
  const std::vector<State>& test_states() {
    if (test_states_.empty())
      test_states_ = sample_start_states(*env_, CartPole::start_region(), cfg_.fitness.test_states,
                                         derive_seed({cfg_.seed, 0x74657374ULL}));
    return test_states_;
  }

  /// Evaluator on the true environment over the test states.
  const FitnessEvaluator& real_evaluator() {
    if (!real_)
      real_.emplace(exact_model(env_), FitnessConfig{cfg_.fitness.horizon, cfg_.fitness.gamma, test_states()});
    return *real_;
  }

  /// The training model over the test states; its difference to
  /// real_evaluator() is the model-versus-real gap.
  const FitnessEvaluator& model_test_evaluator() {
    if (!model_test_)
      model_test_.emplace(model(), FitnessConfig{cfg_.fitness.horizon, cfg_.fitness.gamma, test_states()});
    return *model_test_;
  }

  StateScaling scaling() { return dataset().state_scaling(); }

  const FeatureRanking& ranking() {
    if (ranking_) return *ranking_;
    const auto file = out_ / "ranking.json";
    if (std::filesystem::exists(file)) {
      ranking_ = io::ranking_from_json(io::read_json_file(file.string()).at("ranking"));
      return *ranking_;
    }
    Timer t;
    const auto& fs = cfg_.feature_selection;
    const PsopConfig psop{fs.horizon, cfg_.fitness.gamma, fs.swarm, fs.iterations};
    const CountingModel counting(*model());
    auto pairs =
        generate_optimal_pairs(counting, dataset(), fs.max_states, psop, derive_seed({cfg_.seed, 0x66736cULL}),
                               cfg_.workers);
    ranking_ = rank_features(pairs, std::min(fs.select, env_->state_dim()), fs.bins);
    // One PSO-P evaluation is one open-loop rollout of `horizon` model steps.
    const auto declared = static_cast<std::uint64_t>(pairs.size()) * fs.swarm * fs.iterations;
    const auto counted = counting.calls() / fs.horizon;
    budgets_["feature_selection"] = {declared, counted, t.seconds()};
    write_budget();
    json doc{{"ranking", io::to_json(*ranking_)},
             {"pairs", pairs.size()},
             {"psop", {{"horizon", fs.horizon}, {"swarm", fs.swarm}, {"iterations", fs.iterations}}},
             {"provenance", provenance()}};
    io::write_text_file(file.string(), doc.dump(2) + "\n");
    return *ranking_;
  }

  std::vector<std::vector<std::size_t>> fpsrl_features() {
    std::vector<std::vector<std::size_t>> out(env_->action_dim());
    for (std::size_t a = 0; a < out.size(); ++a) {
      if (!cfg_.fpsrl.features.empty()) {
        out[a] = cfg_.fpsrl.features;
      } else if (cfg_.feature_selection.enabled) {
        out[a] = ranking().top(a, cfg_.feature_selection.select);
      } else {
        out[a].resize(env_->state_dim());
        std::iota(out[a].begin(), out[a].end(), 0);
      }
    }
    return out;
  }

  FpsrlOutcome run_fpsrl() {
    const auto& eval = evaluator();
    const auto sc = scaling();
    const auto feats = fpsrl_features();
    FpsrlOutcome out;
    out.structure = make_structure(feats, cfg_.fpsrl.rules, env_->action_bounds());
    SwarmConfig swarm;
    swarm.swarm_size = cfg_.fpsrl.swarm;
    swarm.iterations = cfg_.fpsrl.iterations;
    swarm.seed = derive_seed({cfg_.seed, 0x70736fULL});
    swarm.workers = cfg_.workers;
    eval.counter().reset();
    Timer t;
    out.result = fpsrl_train(out.structure, eval, swarm, sc);
    budgets_["fpsrl"] = {declared_fpsrl_budget(cfg_), eval.evaluations(), t.seconds()};
    out.fitness_real = real_evaluator()(out.result.policy);

    io::PolicyMetadata meta{std::nullopt, out.result.fitness, cfg_.seed, model()->fingerprint()};
    auto doc = io::to_json(out.result.policy, meta);
    doc["metadata"]["fitness_real"] = out.fitness_real;
    doc["metadata"]["config_hash"] = hash_;
    doc["metadata"]["evaluations"] = out.result.evaluations;
    io::write_text_file((out_ / "fpsrl_policy.json").string(), doc.dump(2) + "\n");

    std::ostringstream curve;
    curve << "evaluations_used,best_fitness\n" << std::setprecision(17);
    for (std::size_t i = 0; i < out.result.history.size(); ++i)
      curve << (i + 1) * swarm.swarm_size << ',' << out.result.history[i] << '\n';
    io::write_text_file((out_ / "fpsrl_curve.csv").string(), curve.str());
    write_budget();
    return out;
  }

  FgprlOutcome run_fgprl() {
    const auto& eval = evaluator();
    auto gcfg = cfg_.fgprl;
    gcfg.seed = derive_seed({cfg_.seed, 0x6770ULL});
    gcfg.workers = cfg_.workers;
    eval.counter().reset();
    Timer t;
    std::ostringstream curve;
    curve << "generation,evaluations_used,best_fitness,levels\n" << std::setprecision(17);
    FgprlOutcome out;
    out.result = gp::evolve(eval, gcfg, scaling(), [&](const gp::GenerationStats& st) {
      curve << st.generation << ',' << st.evaluations_used << ',' << st.best_fitness << ',' << st.level_best.size()
            << '\n';
    });
    budgets_["fgprl"] = {out.result.planned_evaluations(), eval.evaluations(), t.seconds()};
    out.front = with_real_fitness(out.result.archive.front());
    write_front("fgprl", out.front);
    io::write_text_file((out_ / "fgprl_curve.csv").string(), curve.str());
    write_budget();
    return out;
  }

  /// Tunes the front stored in fgprl_front.jsonl.
  TuneOutcome run_tune() {
    const auto file = out_ / "fgprl_front.jsonl";
    std::ifstream in(file);
    if (!in) throw std::runtime_error("tune needs " + file.string() + "; run the fgprl stage first");
    const auto archive_file = io::read_archive(in);
    gp::ParetoArchive archive;
    for (const auto& e : archive_file.entries) archive.offer(e);
    const auto& eval = evaluator();
    SwarmConfig swarm;
    swarm.swarm_size = cfg_.local_search.swarm;
    swarm.iterations = cfg_.local_search.iterations;
    swarm.seed = derive_seed({cfg_.seed, 0x74756eULL});
    swarm.workers = cfg_.workers;
    eval.counter().reset();
    Timer t;
    TuneOutcome out;
    out.result = gp::tune_front(archive, gp::tree_fitness(eval, env_->action_bounds(), scaling()), swarm,
                                cfg_.fgprl.box);
    budgets_["local_search"] = {out.result.evaluations, eval.evaluations(), t.seconds()};
    out.front = with_real_fitness(out.result.archive.front());
    write_front("tuned", out.front);
    write_budget();
    return out;
  }

  /// Re-scores every stored policy and front on the test states, through
  /// both the model and the real system.
  json run_evaluate() {
    json report{{"provenance", provenance()}, {"test_states", cfg_.fitness.test_states}};
    auto row = [&](const FuzzyPolicy& p, double train_fit) {
      const double model_fit = model_test_evaluator()(p);
      const double real_fit = real_evaluator()(p);
      return json{{"complexity", complexity(p)},   {"fitness_train", train_fit}, {"fitness_model", model_fit},
                  {"fitness_real", real_fit},      {"gap", model_fit - real_fit}};
    };
    const auto policy_file = out_ / "fpsrl_policy.json";
    if (std::filesystem::exists(policy_file)) {
      const auto doc = io::read_json_file(policy_file.string());
      report["fpsrl"] = row(io::policy_from_json(doc), doc.at("metadata").at("fitness").get<double>());
    }
    for (const char* name : {"fgprl", "tuned"}) {
      const auto file = out_ / (std::string(name) + "_front.jsonl");
      if (!std::filesystem::exists(file)) continue;
      std::ifstream in(file);
      const auto archive = io::read_archive(in);
      json rows = json::array();
      for (const auto& e : archive.entries)
        rows.push_back(row(gp::to_policy(e.tree, archive.bounds, archive.scaling), e.fitness));
      report[name] = rows;
    }
    io::write_text_file((out_ / "evaluation.json").string(), report.dump(2) + "\n");
    return report;
  }

  /// Stage-by-stage run of everything the config enables. On failure the
  /// artifacts written so far stay in place next to error.json.
  void run_all() {
    std::string stage = "dataset";
    try {
      dataset();
      stage = "model";
      model();
      if (cfg_.feature_selection.enabled) {
        stage = "feature_selection";
        ranking();
      }
      if (cfg_.fpsrl.enabled) {
        stage = "fpsrl";
        run_fpsrl();
      }
      if (cfg_.fgprl_enabled) {
        stage = "fgprl";
        run_fgprl();
        if (cfg_.local_search.enabled) {
          stage = "local_search";
          run_tune();
        }
      }
      stage = "evaluate";
      run_evaluate();
      stage = "compare";
      write_comparison();
    } catch (const std::exception& e) {
      json err{{"stage", stage}, {"error", e.what()}, {"provenance", provenance()}};
      io::write_text_file((out_ / "error.json").string(), err.dump(2) + "\n");
      throw;
    }
    write_manifest();
  }

  /// comparison.csv over the fronts and policy present in the output directory.
  std::vector<ComparisonRow> write_comparison() {
    RunsByMethod runs;
    collect_run(runs, out_);
    const auto rows = compare_fronts(runs);
    std::ostringstream os;
    write_comparison_csv(os, rows);
    io::write_text_file((out_ / "comparison.csv").string(), os.str());
    return rows;
  }

  void write_manifest() const {
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(out_))
      if (entry.is_regular_file()) files.push_back(entry.path().filename().string());
    std::sort(files.begin(), files.end());
    json m{{"config", result_relevant_config(cfg_)}, {"provenance", provenance()}, {"files", files}};
    io::write_text_file((out_ / "manifest.json").string(), m.dump(2) + "\n");
  }

 private:
  struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
  };

  std::vector<gp::ArchiveEntry> with_real_fitness(std::vector<gp::ArchiveEntry> entries) {
    const auto& real = real_evaluator();
    const auto sc = scaling();
    const auto bounds = env_->action_bounds();
    std::vector<double> f(entries.size());
    parallel_for(entries.size(), cfg_.workers,
                 [&](std::size_t i) { f[i] = real(gp::to_policy(entries[i].tree, bounds, sc)); });
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].fitness_real = f[i];
    return entries;
  }

  void write_front(const std::string& name, const std::vector<gp::ArchiveEntry>& front) {
    std::ostringstream jl;
    io::write_archive(jl, front, env_->action_bounds(), scaling(), provenance());
    io::write_text_file((out_ / (name + "_front.jsonl")).string(), jl.str());
    std::ostringstream csv;
    io::write_front_csv(csv, front);
    io::write_text_file((out_ / (name + "_front.csv")).string(), csv.str());
  }

  /// Merges this process's stage budgets into budget.json and timing.json,
  /// keeping entries written by earlier invocations.
  void write_budget() const {
    auto load = [&](const char* name) {
      const auto file = out_ / name;
      json j = std::filesystem::exists(file) ? io::read_json_file(file.string()) : json::object();
      j["provenance"] = provenance();
      return j;
    };
    json b = load("budget.json");
    json t = load("timing.json");
    for (const auto& [stage, s] : budgets_) {
      b["stages"][stage] = {{"declared", s.declared}, {"counted", s.counted}, {"match", s.declared == s.counted}};
      t["stages"][stage] = {{"wall_seconds", s.wall_seconds}, {"evaluations", s.counted}};
    }
    io::write_text_file((out_ / "budget.json").string(), b.dump(2) + "\n");
    io::write_text_file((out_ / "timing.json").string(), t.dump(2) + "\n");
  }

  ExperimentConfig cfg_;
  std::filesystem::path out_;
  std::string hash_;
  std::shared_ptr<const Environment> env_;
  std::optional<TransitionDataset> dataset_;
  std::shared_ptr<const SystemModel> model_;
  std::optional<FitnessEvaluator> evaluator_;
  std::vector<State> test_states_;
  std::optional<FitnessEvaluator> real_;
  std::optional<FitnessEvaluator> model_test_;
  std::optional<FeatureRanking> ranking_;
  std::map<std::string, StageBudget> budgets_;
};

inline ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = io::read_json_file(path);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return ExperimentConfig::from_json(j);
}

inline void run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  Pipeline(cfg, out_dir).run_all();
}

}  // namespace fuzzyrl
