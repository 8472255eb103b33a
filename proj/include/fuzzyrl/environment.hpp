#pragma once

// Ground-truth dynamics: the cart-pole swing-up benchmark, a wrapper that
// appends irrelevant and redundant state channels, and batch dataset
// generation.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fuzzyrl/errors.hpp"
#include "fuzzyrl/fuzzy.hpp"
#include "fuzzyrl/random.hpp"

namespace fuzzyrl {

/// Axis-aligned box of initial states; lo == hi pins a coordinate.
struct StateRegion {
  std::vector<Interval> box;

  State sample(Rng& rng) const {
    State s(box.size());
    for (std::size_t i = 0; i < box.size(); ++i)
      s[i] = box[i].lo == box[i].hi ? box[i].lo : uniform(rng, box[i].lo, box[i].hi);
    return s;
  }
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::vector<Interval> action_bounds() const = 0;

  /// Writes the successor into `next` (length state_dim) and returns the reward.
  virtual double step(std::span<const double> s, std::span<const double> a, std::span<double> next) const = 0;

  /// Extends a base-coordinate start state to the full state vector.
  virtual State complete_initial(std::span<const double> base, Rng& rng) const {
    (void)rng;
    return State(base.begin(), base.end());
  }

  /// Number of coordinates a StateRegion passed to sample_initial covers.
  virtual std::size_t region_dim() const { return state_dim(); }

  State sample_initial(const StateRegion& region, Rng& rng) const {
    if (region.box.size() != region_dim()) throw StructureError("initial region has wrong dimension");
    State base = region.sample(rng);
    return complete_initial(base, rng);
  }

  struct Transition {
    State next;
    double reward;
  };

  Transition step(std::span<const double> s, std::span<const double> a) const {
    Transition t{State(state_dim()), 0.0};
    t.reward = step(s, a, t.next);
    return t;
  }
};

// ---------------------------------------------------------------------------

/// Frictionless cart-pole with swing-through. State (theta, theta_dot, rho,
/// rho_dot); theta = 0 is upright. Semi-implicit Euler integration.
class CartPole final : public Environment {
 public:
  using Environment::step;

  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kDt = 0.02;
  /// Semi-implicit Euler substeps per control interval.
  static constexpr int kSubsteps = 4;
  static constexpr double kMaxForce = 30.0;
  static constexpr double kGoalAngle = 0.5;
  static constexpr double kGoalPosition = 0.5;

  std::string name() const override { return "cartpole"; }
  std::size_t state_dim() const override { return 4; }
  std::size_t action_dim() const override { return 1; }
  std::vector<Interval> action_bounds() const override { return {{-kMaxForce, kMaxForce}}; }

  double step(std::span<const double> s, std::span<const double> a, std::span<double> next) const override {
    for (std::size_t i = 0; i < 4; ++i)
      if (!std::isfinite(s[i])) throw DomainError("cart-pole state is not finite");
    if (!std::isfinite(a[0])) throw DomainError("cart-pole force is not finite");
    const double force = std::clamp(a[0], -kMaxForce, kMaxForce);
    double theta = s[0], theta_dot = s[1], rho = s[2], rho_dot = s[3];

    constexpr double total_mass = kCartMass + kPoleMass;
    constexpr double pole_ml = kPoleMass * kHalfLength;
    constexpr double h = kDt / kSubsteps;
    for (int i = 0; i < kSubsteps; ++i) {
      const double sin_t = std::sin(theta);
      const double cos_t = std::cos(theta);
      const double temp = (force + pole_ml * theta_dot * theta_dot * sin_t) / total_mass;
      const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                               (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
      const double rho_acc = temp - pole_ml * theta_acc * cos_t / total_mass;
      theta_dot += h * theta_acc;
      rho_dot += h * rho_acc;
      theta += h * theta_dot;
      rho += h * rho_dot;
    }
    next[0] = wrap_angle(theta);
    next[1] = theta_dot;
    next[2] = rho;
    next[3] = rho_dot;
    return reward(next);
  }

  /// 0 inside the goal region of the successor state, -1 otherwise.
  static double reward(std::span<const double> next) noexcept {
    return (std::abs(next[0]) < kGoalAngle && std::abs(next[2]) < kGoalPosition) ? 0.0 : -1.0;
  }

  static double wrap_angle(double x) noexcept {
    constexpr double pi = std::numbers::pi;
    if (x >= -pi && x <= pi) return x;
    x = std::fmod(x + pi, 2.0 * pi);
    if (x < 0.0) x += 2.0 * pi;
    return x - pi;
  }

  /// Mechanical energy with the potential zero at the hanging position.
  static double energy(std::span<const double> s) noexcept {
    const double theta = s[0], theta_dot = s[1], rho_dot = s[3];
    const double vx = rho_dot + kHalfLength * theta_dot * std::cos(theta);
    const double vy = -kHalfLength * theta_dot * std::sin(theta);
    const double inertia = kPoleMass * kHalfLength * kHalfLength / 3.0;
    const double kinetic = 0.5 * kCartMass * rho_dot * rho_dot + 0.5 * kPoleMass * (vx * vx + vy * vy) +
                           0.5 * inertia * theta_dot * theta_dot;
    const double potential = kPoleMass * kGravity * kHalfLength * (1.0 + std::cos(theta));
    return kinetic + potential;
  }

  /// Dataset start region: theta uniform, everything else at rest.
  static StateRegion data_region() {
    constexpr double pi = std::numbers::pi;
    return {{{-pi, pi}, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}};
  }

  /// Training / test start region: theta uniform, cart offset in [-0.5, 0.5].
  static StateRegion start_region() {
    constexpr double pi = std::numbers::pi;
    return {{{-pi, pi}, {0.0, 0.0}, {-0.5, 0.5}, {0.0, 0.0}}};
  }
};

// ---------------------------------------------------------------------------

/// Appends autonomous noise channels and noisy affine copies of base features.
/// Channel noise is a hash of (seed, channel, s, a) so step stays a pure
/// function of its inputs.
class DistractorEnvironment final : public Environment {
 public:
  using Environment::step;

  enum class ChannelKind { Base, Irrelevant, Redundant };

  struct Channel {
    ChannelKind kind = ChannelKind::Base;
    std::size_t source = 0;  // base feature copied by a redundant channel
    double gain = 1.0;
    double offset = 0.0;
  };

  static constexpr double kWalkStep = 0.1;
  static constexpr double kCopyNoise = 0.01;

  DistractorEnvironment(std::shared_ptr<const Environment> base, std::size_t n_irrelevant,
                        std::size_t n_redundant, std::uint64_t seed)
      : base_(std::move(base)), seed_(seed) {
    const std::size_t d = base_->state_dim();
    for (std::size_t i = 0; i < d; ++i) channels_.push_back({ChannelKind::Base, i, 1.0, 0.0});
    Rng rng = make_rng({seed, 0x6469737472ULL});
    for (std::size_t i = 0; i < n_irrelevant; ++i) channels_.push_back({ChannelKind::Irrelevant, 0, 1.0, 0.0});
    for (std::size_t i = 0; i < n_redundant; ++i) {
      Channel ch{ChannelKind::Redundant, std::uniform_int_distribution<std::size_t>{0, d - 1}(rng), 0.0, 0.0};
      ch.gain = uniform(rng, 0.5, 2.0) * (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
      ch.offset = uniform(rng, -1.0, 1.0);
      channels_.push_back(ch);
    }
  }

  std::string name() const override { return base_->name() + "+distractors"; }
  std::size_t state_dim() const override { return channels_.size(); }
  std::size_t action_dim() const override { return base_->action_dim(); }
  std::vector<Interval> action_bounds() const override { return base_->action_bounds(); }
  std::size_t region_dim() const override { return base_->state_dim(); }

  const std::vector<Channel>& channels() const noexcept { return channels_; }
  const Environment& base() const noexcept { return *base_; }
  std::uint64_t seed() const noexcept { return seed_; }

  double step(std::span<const double> s, std::span<const double> a, std::span<double> next) const override {
    const std::size_t d = base_->state_dim();
    const double r = base_->step(s.first(d), a, next.first(d));
    const std::uint64_t h = hash_values(hash_values(seed_, s), a);
    for (std::size_t i = d; i < channels_.size(); ++i) {
      const double noise = hash_to_symmetric_unit(mix64(h ^ mix64(i)));
      next[i] = channel_value(channels_[i], s[i], next, noise);
    }
    return r;
  }

  State complete_initial(std::span<const double> base, Rng& rng) const override {
    State s(channels_.size());
    std::copy(base.begin(), base.end(), s.begin());
    for (std::size_t i = base.size(); i < channels_.size(); ++i) {
      const double noise = uniform(rng, -1.0, 1.0);
      s[i] = channels_[i].kind == ChannelKind::Irrelevant ? noise : channel_value(channels_[i], 0.0, s, noise);
    }
    return s;
  }

 private:
  static double channel_value(const Channel& ch, double previous, std::span<const double> base_next, double noise) {
    if (ch.kind == ChannelKind::Irrelevant) return std::clamp(previous + kWalkStep * noise, -1.0, 1.0);
    return ch.gain * base_next[ch.source] + ch.offset + kCopyNoise * noise;
  }

  std::shared_ptr<const Environment> base_;
  std::uint64_t seed_;
  std::vector<Channel> channels_;
};

inline std::shared_ptr<const Environment> with_distractors(std::shared_ptr<const Environment> env,
                                                           std::size_t n_irrelevant, std::size_t n_redundant,
                                                           std::uint64_t seed) {
  if (n_irrelevant == 0 && n_redundant == 0) return env;
  return std::make_shared<DistractorEnvironment>(std::move(env), n_irrelevant, n_redundant, seed);
}

// ---------------------------------------------------------------------------

struct TransitionRecord {
  State s;
  Action a;
  State s_next;
  double r = 0.0;
  std::size_t traj_id = 0;

  friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

struct TransitionDataset {
  std::string env_name;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::uint64_t seed = 0;
  std::string generator = "random";
  std::size_t n_traj = 0;
  std::size_t traj_len = 0;
  std::vector<TransitionRecord> tuples;

  std::size_t size() const noexcept { return tuples.size(); }

  /// Per-feature [min, max] over s and s_next, as a [-1, 1] scaling.
  StateScaling state_scaling() const {
    StateScaling sc;
    if (tuples.empty()) return sc;
    sc.lo.assign(state_dim, std::numeric_limits<double>::infinity());
    sc.hi.assign(state_dim, -std::numeric_limits<double>::infinity());
    for (const auto& t : tuples)
      for (std::size_t i = 0; i < state_dim; ++i) {
        sc.lo[i] = std::min({sc.lo[i], t.s[i], t.s_next[i]});
        sc.hi[i] = std::max({sc.hi[i], t.s[i], t.s_next[i]});
      }
    return sc;
  }

  friend bool operator==(const TransitionDataset&, const TransitionDataset&) = default;
};

/// Behaviour policy for data collection; empty means uniform random actions.
using BehaviourPolicy = std::function<Action(std::span<const double>, Rng&)>;

inline TransitionDataset generate_dataset(const Environment& env, std::size_t n_traj, std::size_t traj_len,
                                          const StateRegion& init_region, std::uint64_t seed,
                                          const BehaviourPolicy& behaviour = {}) {
  if (n_traj < 1 || traj_len < 1) throw StructureError("n_traj and traj_len must be at least 1");
  TransitionDataset data;
  data.env_name = env.name();
  data.state_dim = env.state_dim();
  data.action_dim = env.action_dim();
  data.seed = seed;
  data.generator = behaviour ? "given" : "random";
  data.n_traj = n_traj;
  data.traj_len = traj_len;
  data.tuples.reserve(n_traj * traj_len);
  const auto bounds = env.action_bounds();
  for (std::size_t traj = 0; traj < n_traj; ++traj) {
    Rng rng = make_rng({seed, traj});
    State s = env.sample_initial(init_region, rng);
    for (std::size_t t = 0; t < traj_len; ++t) {
      Action a;
      if (behaviour) {
        a = behaviour(s, rng);
      } else {
        a.resize(bounds.size());
        for (std::size_t k = 0; k < bounds.size(); ++k) a[k] = uniform(rng, bounds[k].lo, bounds[k].hi);
      }
      auto tr = env.step(s, a);
      data.tuples.push_back({s, a, tr.next, tr.reward, traj});
      s = std::move(tr.next);
    }
  }
  return data;
}

}  // namespace fuzzyrl
