#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fuzzyrl/experiment.hpp"

using namespace fuzzyrl;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out_dir;
};

ExperimentConfig resolve(GlobalOptions& g) {
  auto cfg = g.config.empty() ? ExperimentConfig::from_json(json::object()) : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.workers = *g.workers;
  cfg.validate();
  if (g.out_dir.empty()) g.out_dir = cfg.output.dir.empty() ? "fuzzyrl_out" : cfg.output.dir;
  return cfg;
}

void print_front(const std::vector<gp::ArchiveEntry>& front) {
  std::printf("%10s %14s %14s\n", "complexity", "penalty_model", "penalty_real");
  for (const auto& e : front) {
    std::printf("%10d %14.4f", e.complexity, -e.fitness);
    if (e.fitness_real)
      std::printf(" %14.4f\n", -*e.fitness_real);
    else
      std::printf(" %14s\n", "-");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable fuzzy policies from batch data: FPSRL and FGPRL"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--workers", g.workers, "Worker threads (results do not depend on this)");
  app.add_option("--out-dir", g.out_dir, "Directory for artifacts (default: output.dir, else fuzzyrl_out)");

  auto* gen = app.add_subcommand("gen-data", "Generate (or load) the transition dataset");
  auto* fit = app.add_subcommand("fit-model", "Build the configured system model");
  auto* sel = app.add_subcommand("select-features", "Rank state features via PSO-P labels and mutual information");
  auto* fpsrl = app.add_subcommand("fpsrl", "Swarm-tune a fixed fuzzy rule structure");
  auto* fgprl = app.add_subcommand("fgprl", "Evolve fuzzy policy trees and keep a complexity/fitness front");
  auto* tune = app.add_subcommand("tune", "Swarm-tune the terminals of every front member");
  auto* eval = app.add_subcommand("evaluate", "Re-score stored policies on the model and the real system");
  auto* cmp = app.add_subcommand("compare", "Min/median/max penalty per complexity across run directories");
  std::vector<std::string> run_dirs;
  cmp->add_option("runs", run_dirs, "Run directories (default: --out-dir)")->check(CLI::ExistingDirectory);
  auto* run = app.add_subcommand("run", "Run every stage the config enables");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmp->parsed()) {
      RunsByMethod runs;
      if (g.out_dir.empty()) g.out_dir = "fuzzyrl_out";
      if (run_dirs.empty()) run_dirs.push_back(g.out_dir);
      for (const auto& d : run_dirs) collect_run(runs, d);
      const auto rows = compare_fronts(runs);
      std::filesystem::create_directories(g.out_dir);
      std::ostringstream os;
      write_comparison_csv(os, rows);
      const auto path = std::filesystem::path(g.out_dir) / "comparison.csv";
      io::write_text_file(path.string(), os.str());
      std::cout << os.str();
      std::cerr << "wrote " << path.string() << "\n";
      return 0;
    }

    auto cfg = resolve(g);
    Pipeline p(cfg, g.out_dir);
    std::cerr << "config " << p.hash() << ", seed " << p.config().seed << ", out " << g.out_dir << "\n";
    if (gen->parsed()) {
      const auto& d = p.dataset();
      std::cout << "dataset: " << d.size() << " transitions, hash " << dataset_hash(d) << "\n";
    } else if (fit->parsed()) {
      std::cout << "model: " << p.model()->fingerprint() << "\n";
    } else if (sel->parsed()) {
      const auto& r = p.ranking();
      for (std::size_t a = 0; a < r.per_action.size(); ++a) {
        std::cout << "action " << a << ":";
        for (const auto& f : r.per_action[a]) std::cout << " " << f.feature << "(" << f.score << ")";
        std::cout << "\n";
      }
    } else if (fpsrl->parsed()) {
      const auto out = p.run_fpsrl();
      std::cout << "fpsrl: complexity " << complexity(out.result.policy) << ", fitness " << out.result.fitness
                << ", real " << out.fitness_real << ", evaluations " << out.result.evaluations << "\n";
    } else if (fgprl->parsed()) {
      const auto out = p.run_fgprl();
      std::cout << "fgprl: " << out.result.planned_evaluations() << " evaluations\n";
      print_front(out.front);
    } else if (tune->parsed()) {
      const auto out = p.run_tune();
      std::cout << "tune: " << out.result.evaluations << " evaluations, " << out.result.failures << " failures\n";
      print_front(out.front);
    } else if (eval->parsed()) {
      std::cout << p.run_evaluate().dump(2) << "\n";
    } else if (run->parsed()) {
      p.run_all();
      std::cout << "done: " << g.out_dir << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
