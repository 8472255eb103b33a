#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "fuzzyrl/policy_tree.hpp"

namespace fuzzyrl::gp {

struct ArchiveEntry {
  PolicyTree tree;
  int complexity = 0;
  double fitness = -std::numeric_limits<double>::infinity();
  std::optional<double> fitness_real;
  std::size_t generation_found = 0;
};

/// Best individual per exact complexity value.
class ParetoArchive {
 public:
  /// Replaces the level's incumbent only on strict improvement.
  bool offer(const ArchiveEntry& entry) {
    auto it = levels_.find(entry.complexity);
    if (it == levels_.end()) {
      levels_.emplace(entry.complexity, entry);
      return true;
    }
    if (entry.fitness > it->second.fitness) {
      it->second = entry;
      return true;
    }
    return false;
  }

  /// Levels whose fitness beats every lower-complexity level, ascending.
  std::vector<ArchiveEntry> front() const {
    std::vector<ArchiveEntry> out;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [c, e] : levels_)
      if (e.fitness > best) {
        out.push_back(e);
        best = e.fitness;
      }
    return out;
  }

  const std::map<int, ArchiveEntry>& levels() const noexcept { return levels_; }
  std::size_t size() const noexcept { return levels_.size(); }
  bool empty() const noexcept { return levels_.empty(); }

  std::optional<double> best_at(int complexity) const {
    auto it = levels_.find(complexity);
    if (it == levels_.end()) return std::nullopt;
    return it->second.fitness;
  }

 private:
  std::map<int, ArchiveEntry> levels_;
};

/// Nondominated subset of arbitrary entries (lower complexity, higher fitness).
inline std::vector<ArchiveEntry> nondominated(std::vector<ArchiveEntry> entries) {
  ParetoArchive a;
  for (auto& e : entries) a.offer(e);
  return a.front();
}

}  // namespace fuzzyrl::gp
