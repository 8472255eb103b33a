#pragma once

// Discounted finite-horizon return of a policy rolled out through a model,
// and its mean over a fixed set of start states (the fitness).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fuzzyrl/errors.hpp"
#include "fuzzyrl/model.hpp"

namespace fuzzyrl {

template <class P>
concept PolicyLike = requires(const P& p, std::span<const double> s, std::span<double> out) {
  { p.action_dim() } -> std::convertible_to<std::size_t>;
  p.act(s, out);
};

/// Exact tally of fitness evaluations, safe to bump from any thread.
class EvaluationCounter {
 public:
  void add(std::uint64_t n = 1) noexcept { count_.fetch_add(n, std::memory_order_relaxed); }
  std::uint64_t value() const noexcept { return count_.load(std::memory_order_relaxed); }
  void reset() noexcept { count_.store(0, std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

struct FitnessConfig {
  std::size_t horizon = 500;
  double gamma = 0.994;
  std::vector<State> start_states;

  void validate() const {
    if (horizon <= 1) throw ConfigError("fitness.horizon", "must be greater than 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("fitness.gamma", "must lie in [0, 1]");
    if (start_states.empty()) throw ConfigError("fitness.start_states", "at least one start state is required");
  }
};

/// sum_{k<T} gamma^k r(s_k, pi(s_k), s_{k+1}) with s_{k+1} from the model.
template <PolicyLike Policy>
double rollout_return(const Policy& policy, const SystemModel& model, std::span<const double> s0,
                      std::size_t horizon, double gamma) {
  if (horizon <= 1) throw ConfigError("horizon", "must be greater than 1");
  const std::size_t sd = model.state_dim();
  if (s0.size() != sd) throw StructureError("start state has wrong dimension");
  if (policy.action_dim() != model.action_dim()) throw StructureError("policy and model disagree on action dimension");
  std::vector<double> buf(2 * sd + model.action_dim());
  std::span<double> cur(buf.data(), sd), nxt(buf.data() + sd, sd), act(buf.data() + 2 * sd, model.action_dim());
  std::copy(s0.begin(), s0.end(), cur.begin());
  double ret = 0.0;
  double weight = 1.0;
  for (std::size_t k = 0; k < horizon; ++k) {
    policy.act(cur, act);
    const double r = model.predict(cur, act, nxt);
    if (!std::isfinite(r)) throw EvaluationError("model returned a non-finite reward", k);
    for (double v : nxt)
      if (!std::isfinite(v)) throw EvaluationError("model returned a non-finite state", k);
    ret += weight * r;
    weight *= gamma;
    std::swap(cur, nxt);
  }
  return ret;
}

/// Mean return over cfg.start_states; bumps `counter` once per call.
template <PolicyLike Policy>
double fitness(const Policy& policy, const SystemModel& model, const FitnessConfig& cfg,
               EvaluationCounter* counter = nullptr) {
  if (cfg.start_states.empty()) throw ConfigError("fitness.start_states", "at least one start state is required");
  if (counter) counter->add();
  std::vector<double> returns(cfg.start_states.size());
  for (std::size_t i = 0; i < cfg.start_states.size(); ++i) {
    try {
      returns[i] = rollout_return(policy, model, cfg.start_states[i], cfg.horizon, cfg.gamma);
    } catch (const EvaluationError& e) {
      throw EvaluationError(std::string(e.what()) + " (start state " + std::to_string(i) + ")", e.step(), i);
    }
  }
  // Summing in sorted order makes the mean exactly invariant to start order.
  std::sort(returns.begin(), returns.end());
  double sum = 0.0;
  for (double r : returns) sum += r;
  return sum / static_cast<double>(returns.size());
}

/// Binds model, configuration and counter into one callable fitness function.
class FitnessEvaluator {
 public:
  FitnessEvaluator(std::shared_ptr<const SystemModel> model, FitnessConfig cfg)
      : model_(std::move(model)), cfg_(std::move(cfg)) {
    cfg_.validate();
  }

  template <PolicyLike Policy>
  double operator()(const Policy& policy) const {
    return fitness(policy, *model_, cfg_, &counter_);
  }

  const SystemModel& model() const noexcept { return *model_; }
  std::shared_ptr<const SystemModel> model_ptr() const noexcept { return model_; }
  const FitnessConfig& config() const noexcept { return cfg_; }
  std::uint64_t evaluations() const noexcept { return counter_.value(); }
  EvaluationCounter& counter() const noexcept { return counter_; }

 private:
  std::shared_ptr<const SystemModel> model_;
  FitnessConfig cfg_;
  mutable EvaluationCounter counter_;
};

/// Draws `n` start states from `region` with a dedicated stream.
inline std::vector<State> sample_start_states(const Environment& env, const StateRegion& region, std::size_t n,
                                              std::uint64_t seed) {
  Rng rng = make_rng({seed, 0x7374617274ULL});
  std::vector<State> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(env.sample_initial(region, rng));
  return out;
}

}  // namespace fuzzyrl
