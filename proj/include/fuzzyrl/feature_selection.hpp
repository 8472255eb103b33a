#pragma once

// Feature ranking for fixed-structure policies. Step one labels dataset
// states with the first action of a swarm-optimized open-loop action
// sequence (receding-horizon control on the model). Step two orders state
// features per action dimension by greedy mutual-information selection with
// an entropy-normalized redundancy penalty.
//
// The selection score is a reconstruction of adaptive MI feature selection:
//   score(f) = I(f; a) - (1/|S|) * sum_{g in S} I(f; g) / H(g)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "fuzzyrl/environment.hpp"
#include "fuzzyrl/errors.hpp"
#include "fuzzyrl/model.hpp"
#include "fuzzyrl/parallel.hpp"
#include "fuzzyrl/pso.hpp"

namespace fuzzyrl {

struct PsopConfig {
  std::size_t horizon = 50;
  double gamma = 0.994;
  std::size_t swarm_size = 50;
  std::size_t iterations = 50;
};

/// Discounted model return of an open-loop action sequence (step-major).
inline double open_loop_return(const SystemModel& model, std::span<const double> s0, std::span<const double> actions,
                               double gamma) {
  const std::size_t ad = model.action_dim();
  const std::size_t steps = actions.size() / ad;
  State cur(s0.begin(), s0.end()), nxt(cur.size());
  double ret = 0.0, w = 1.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double r = model.predict(cur, actions.subspan(k * ad, ad), nxt);
    ret += w * r;
    w *= gamma;
    std::swap(cur, nxt);
  }
  return ret;
}

/// Swarm search over open-loop action sequences from `s` (step-major).
inline PsoResult psop_plan(const SystemModel& model, std::span<const double> s, const PsopConfig& cfg,
                           std::uint64_t seed, std::size_t workers = 1) {
  if (cfg.horizon < 1) throw ConfigError("feature_selection.horizon", "must be at least 1");
  SwarmConfig swarm;
  swarm.swarm_size = cfg.swarm_size;
  swarm.iterations = cfg.iterations;
  swarm.seed = seed;
  swarm.workers = workers;
  const auto bounds = model.action_bounds();
  for (std::size_t k = 0; k < cfg.horizon; ++k)
    for (const auto& b : bounds) {
      swarm.lower.push_back(b.lo);
      swarm.upper.push_back(b.hi);
    }
  auto objective = [&](std::span<const double> seq) { return open_loop_return(model, s, seq, cfg.gamma); };
  return pso_maximize(objective, swarm);
}

/// First action of the best open-loop sequence found by the swarm.
inline Action psop_action(const SystemModel& model, std::span<const double> s, const PsopConfig& cfg,
                          std::uint64_t seed, std::size_t workers = 1) {
  const auto res = psop_plan(model, s, cfg, seed, workers);
  return Action(res.best_position.begin(), res.best_position.begin() + static_cast<std::ptrdiff_t>(model.action_dim()));
}

struct OptimalPairSet {
  std::vector<State> states;
  std::vector<Action> actions;
  PsopConfig psop;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return states.size(); }
};

/// Labels up to `max_states` dataset states (a seeded subsample; all states
/// when max_states is 0) with receding-horizon actions.
inline OptimalPairSet generate_optimal_pairs(const SystemModel& model, const TransitionDataset& data,
                                             std::size_t max_states, const PsopConfig& cfg, std::uint64_t seed,
                                             std::size_t workers = 1) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (max_states > 0 && max_states < idx.size()) {
    Rng rng = make_rng({seed, 0x73756273ULL});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_states);
    std::sort(idx.begin(), idx.end());
  }
  OptimalPairSet out;
  out.psop = cfg;
  out.seed = seed;
  out.states.resize(idx.size());
  out.actions.resize(idx.size());
  parallel_for(idx.size(), workers, [&](std::size_t i) {
    out.states[i] = data.tuples[idx[i]].s;
    out.actions[i] = psop_action(model, out.states[i], cfg, derive_seed({seed, idx[i]}));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Mutual information on equal-frequency histograms

struct Discretized {
  std::vector<std::uint32_t> codes;
  std::uint32_t levels = 0;
};

/// Rank-based bins of (nearly) equal occupancy; equal values share a bin.
inline Discretized equal_frequency_bins(std::span<const double> values, std::size_t bins) {
  const std::size_t n = values.size();
  Discretized out;
  out.codes.assign(n, 0);
  if (n == 0 || bins == 0) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::uint32_t bin = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (r > 0 && values[order[r]] == values[order[r - 1]]) {
      out.codes[order[r]] = bin;
      continue;
    }
    bin = static_cast<std::uint32_t>(r * bins / n);
    out.codes[order[r]] = bin;
  }
  // Compact to consecutive codes.
  std::vector<std::uint32_t> remap(bins, UINT32_MAX);
  std::uint32_t next = 0;
  for (std::size_t r = 0; r < n; ++r) {
    auto& c = out.codes[order[r]];
    if (remap[c] == UINT32_MAX) remap[c] = next++;
    c = remap[c];
  }
  out.levels = next;
  return out;
}

/// Plug-in entropy in nats.
inline double entropy(const Discretized& x) {
  std::vector<std::size_t> counts(x.levels, 0);
  for (auto c : x.codes) ++counts[c];
  const double n = static_cast<double>(x.codes.size());
  double h = 0.0;
  for (auto c : counts)
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      h -= p * std::log(p);
    }
  return h;
}

inline double mutual_information(const Discretized& x, const Discretized& y) {
  if (x.codes.size() != y.codes.size()) throw StructureError("MI inputs differ in length");
  const std::size_t n = x.codes.size();
  if (n == 0) return 0.0;
  std::vector<std::size_t> joint(static_cast<std::size_t>(x.levels) * y.levels, 0), cx(x.levels, 0), cy(y.levels, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++joint[x.codes[i] * y.levels + y.codes[i]];
    ++cx[x.codes[i]];
    ++cy[y.codes[i]];
  }
  const double nn = static_cast<double>(n);
  double mi = 0.0;
  for (std::uint32_t a = 0; a < x.levels; ++a)
    for (std::uint32_t b = 0; b < y.levels; ++b) {
      const auto c = joint[a * y.levels + b];
      if (c == 0) continue;
      mi += (static_cast<double>(c) / nn) *
            std::log(static_cast<double>(c) * nn / (static_cast<double>(cx[a]) * static_cast<double>(cy[b])));
    }
  return std::max(0.0, mi);
}

struct ScoredFeature {
  std::size_t feature = 0;
  double score = 0.0;
};

struct FeatureRanking {
  /// Per action dimension, features in selection order.
  std::vector<std::vector<ScoredFeature>> per_action;

  std::vector<std::size_t> top(std::size_t action, std::size_t n) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(n, per_action.at(action).size()); ++i)
      out.push_back(per_action[action][i].feature);
    return out;
  }
};

inline FeatureRanking rank_features(const OptimalPairSet& pairs, std::size_t n_select, std::size_t bins = 16) {
  if (pairs.size() < 100) throw StructureError("feature ranking needs at least 100 state/action pairs");
  const std::size_t sd = pairs.states.front().size();
  const std::size_t ad = pairs.actions.front().size();
  if (n_select > sd) throw StructureError("n_select exceeds the state dimension");
  if (bins < 2) throw ConfigError("feature_selection.bins", "must be at least 2");
  const std::size_t n = pairs.size();

  std::vector<Discretized> features(sd);
  std::vector<double> entropies(sd);
  std::vector<double> column(n);
  for (std::size_t f = 0; f < sd; ++f) {
    for (std::size_t i = 0; i < n; ++i) column[i] = pairs.states[i][f];
    features[f] = equal_frequency_bins(column, bins);
    entropies[f] = entropy(features[f]);
  }
  // Feature-feature MI is shared by all action dimensions.
  std::vector<double> pair_mi(sd * sd, -1.0);
  auto mi_ff = [&](std::size_t f, std::size_t g) {
    double& m = pair_mi[f * sd + g];
    if (m < 0.0) m = pair_mi[g * sd + f] = mutual_information(features[f], features[g]);
    return m;
  };

  FeatureRanking ranking;
  for (std::size_t a = 0; a < ad; ++a) {
    for (std::size_t i = 0; i < n; ++i) column[i] = pairs.actions[i][a];
    const auto action = equal_frequency_bins(column, bins);
    std::vector<double> relevance(sd);
    for (std::size_t f = 0; f < sd; ++f) relevance[f] = mutual_information(features[f], action);

    std::vector<ScoredFeature> chosen;
    std::vector<char> used(sd, 0);
    while (chosen.size() < n_select) {
      std::size_t best = sd;
      double best_score = 0.0;
      bool best_informative = false;
      for (std::size_t f = 0; f < sd; ++f) {
        if (used[f]) continue;
        double score = relevance[f];
        if (!chosen.empty()) {
          double redundancy = 0.0;
          for (const auto& g : chosen)
            if (entropies[g.feature] > 0.0) redundancy += mi_ff(f, g.feature) / entropies[g.feature];
          score -= redundancy / static_cast<double>(chosen.size());
        }
        // Constant features carry no information and come last.
        const bool informative = entropies[f] > 0.0;
        if (best == sd || (informative && !best_informative) ||
            (informative == best_informative && score > best_score)) {
          best = f;
          best_score = score;
          best_informative = informative;
        }
      }
      used[best] = 1;
      chosen.push_back({best, best_informative ? best_score : 0.0});
    }
    ranking.per_action.push_back(std::move(chosen));
  }
  return ranking;
}

}  // namespace fuzzyrl
