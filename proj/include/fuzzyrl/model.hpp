#pragma once

// Surrogate transition models g~(s, a) -> (s', r): an exact wrapper around
// an environment and a k-nearest-neighbour regressor fitted to a dataset.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fuzzyrl/environment.hpp"
#include "fuzzyrl/errors.hpp"
#include "fuzzyrl/random.hpp"

namespace fuzzyrl {

class SystemModel {
 public:
  virtual ~SystemModel() = default;

  virtual std::string kind() const = 0;
  /// Provenance tag: dataset hash and hyperparameters.
  virtual std::string fingerprint() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::vector<Interval> action_bounds() const = 0;

  /// Writes the predicted successor into `next` and returns the predicted reward.
  virtual double predict(std::span<const double> s, std::span<const double> a, std::span<double> next) const = 0;

  Environment::Transition predict(std::span<const double> s, std::span<const double> a) const {
    Environment::Transition t{State(state_dim()), 0.0};
    t.reward = predict(s, a, t.next);
    return t;
  }
};

class ExactModel final : public SystemModel {
 public:
  using SystemModel::predict;

  explicit ExactModel(std::shared_ptr<const Environment> env) : env_(std::move(env)) {}

  std::string kind() const override { return "exact"; }
  std::string fingerprint() const override { return "exact:" + env_->name(); }
  std::size_t state_dim() const override { return env_->state_dim(); }
  std::size_t action_dim() const override { return env_->action_dim(); }
  std::vector<Interval> action_bounds() const override { return env_->action_bounds(); }

  double predict(std::span<const double> s, std::span<const double> a, std::span<double> next) const override {
    return env_->step(s, a, next);
  }

  const Environment& environment() const noexcept { return *env_; }

 private:
  std::shared_ptr<const Environment> env_;
};

inline std::shared_ptr<const SystemModel> exact_model(std::shared_ptr<const Environment> env) {
  return std::make_shared<ExactModel>(std::move(env));
}

/// FNV-1a over the exact bit patterns of every tuple, as 16 hex digits.
inline std::string dataset_hash(const TransitionDataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& t : data.tuples) {
    for (double v : t.s) feed(bits_of(v));
    for (double v : t.a) feed(bits_of(v));
    for (double v : t.s_next) feed(bits_of(v));
    feed(bits_of(t.r));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Predicts s + mean(s' - s) and mean(r) over the k nearest training inputs,
/// with distances measured on (s, a) min/max-normalized per column.
class KnnModel final : public SystemModel {
 public:
  using SystemModel::predict;

  KnnModel(const TransitionDataset& data, std::size_t k, std::vector<Interval> action_bounds)
      : k_(k), state_dim_(data.state_dim), action_dim_(data.action_dim), bounds_(std::move(action_bounds)) {
    if (data.tuples.empty()) throw StructureError("cannot fit a k-NN model to an empty dataset");
    if (k < 1 || k > data.tuples.size()) throw StructureError("k must lie in [1, |data|]");
    hash_ = dataset_hash(data);
    const std::size_t in_dim = state_dim_ + action_dim_;
    const std::size_t n = data.tuples.size();

    // Canonical order makes neighbour tie-breaking independent of input order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t i) {
      const auto& t = data.tuples[i];
      std::vector<double> v(t.s);
      v.insert(v.end(), t.a.begin(), t.a.end());
      v.insert(v.end(), t.s_next.begin(), t.s_next.end());
      v.push_back(t.r);
      return v;
    };
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return key(x) < key(y); });

    lo_.assign(in_dim, std::numeric_limits<double>::infinity());
    hi_.assign(in_dim, -std::numeric_limits<double>::infinity());
    for (const auto& t : data.tuples) {
      for (std::size_t j = 0; j < state_dim_; ++j) {
        lo_[j] = std::min(lo_[j], t.s[j]);
        hi_[j] = std::max(hi_[j], t.s[j]);
      }
      for (std::size_t j = 0; j < action_dim_; ++j) {
        lo_[state_dim_ + j] = std::min(lo_[state_dim_ + j], t.a[j]);
        hi_[state_dim_ + j] = std::max(hi_[state_dim_ + j], t.a[j]);
      }
    }
    inputs_.reserve(n * in_dim);
    deltas_.reserve(n * state_dim_);
    rewards_.reserve(n);
    for (std::size_t i : order) {
      const auto& t = data.tuples[i];
      for (std::size_t j = 0; j < state_dim_; ++j) inputs_.push_back(normalize(j, t.s[j]));
      for (std::size_t j = 0; j < action_dim_; ++j) inputs_.push_back(normalize(state_dim_ + j, t.a[j]));
      for (std::size_t j = 0; j < state_dim_; ++j) deltas_.push_back(t.s_next[j] - t.s[j]);
      rewards_.push_back(t.r);
    }
  }

  std::string kind() const override { return "knn"; }
  std::string fingerprint() const override { return "knn:k=" + std::to_string(k_) + ":data=" + hash_; }
  std::size_t state_dim() const override { return state_dim_; }
  std::size_t action_dim() const override { return action_dim_; }
  std::vector<Interval> action_bounds() const override { return bounds_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return rewards_.size(); }
  const std::string& data_hash() const noexcept { return hash_; }

  double predict(std::span<const double> s, std::span<const double> a, std::span<double> next) const override {
    const std::size_t in_dim = state_dim_ + action_dim_;
    double query[64];
    std::vector<double> query_heap;
    double* q = query;
    if (in_dim > 64) {
      query_heap.resize(in_dim);
      q = query_heap.data();
    }
    for (std::size_t j = 0; j < state_dim_; ++j) q[j] = normalize(j, s[j]);
    for (std::size_t j = 0; j < action_dim_; ++j) q[state_dim_ + j] = normalize(state_dim_ + j, a[j]);

    // Bounded max-heap of (distance, index); ties resolved by canonical index.
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(k_ + 1);
    const std::size_t n = rewards_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = &inputs_[i * in_dim];
      double d2 = 0.0;
      for (std::size_t j = 0; j < in_dim; ++j) {
        const double diff = x[j] - q[j];
        d2 += diff * diff;
      }
      if (best.size() < k_) {
        best.emplace_back(d2, i);
        std::push_heap(best.begin(), best.end());
      } else if (std::pair{d2, i} < best.front()) {
        std::pop_heap(best.begin(), best.end());
        best.back() = {d2, i};
        std::push_heap(best.begin(), best.end());
      }
    }
    std::sort(best.begin(), best.end());
    double reward = 0.0;
    for (std::size_t j = 0; j < state_dim_; ++j) next[j] = 0.0;
    for (const auto& [d2, i] : best) {
      for (std::size_t j = 0; j < state_dim_; ++j) next[j] += deltas_[i * state_dim_ + j];
      reward += rewards_[i];
    }
    const double inv = 1.0 / static_cast<double>(best.size());
    for (std::size_t j = 0; j < state_dim_; ++j) next[j] = s[j] + next[j] * inv;
    return reward * inv;
  }

 private:
  double normalize(std::size_t j, double x) const noexcept {
    const double w = hi_[j] - lo_[j];
    return w > 0.0 ? (x - lo_[j]) / w : 0.0;
  }

  std::size_t k_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::vector<Interval> bounds_;
  std::string hash_;
  std::vector<double> lo_, hi_;
  std::vector<double> inputs_;
  std::vector<double> deltas_;
  std::vector<double> rewards_;
};

inline std::shared_ptr<const KnnModel> knn_fit(const TransitionDataset& data, std::size_t k,
                                               std::vector<Interval> action_bounds) {
  return std::make_shared<KnnModel>(data, k, std::move(action_bounds));
}

}  // namespace fuzzyrl
