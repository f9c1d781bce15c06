#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "effrace/lts.hpp"

namespace effrace {

using ClassId = std::uint32_t;

/// Equivalence classes over the states of one Lts. Classes are numbered in
/// order of their smallest member.
class Partition {
 public:
  Partition() = default;
  /// Builds a partition from arbitrary per-state keys: states with equal keys
  /// share a class.
  template <class Key>
  static Partition from_keys(const std::vector<Key>& keys);
  static Partition single(std::size_t num_states);
  static Partition identity(std::size_t num_states);

  std::size_t num_states() const { return class_of_.size(); }
  std::size_t num_classes() const { return classes_.size(); }
  ClassId class_of(StateId s) const { return class_of_[s]; }
  const std::vector<ClassId>& class_map() const { return class_of_; }
  const std::vector<StateId>& members(ClassId c) const { return classes_[c]; }
  const std::vector<std::vector<StateId>>& classes() const { return classes_; }
  bool same(StateId a, StateId b) const { return class_of_[a] == class_of_[b]; }

  /// True if every class of *this is contained in a class of `coarser`.
  bool refines(const Partition& coarser) const;

  friend bool operator==(const Partition& a, const Partition& b) { return a.class_of_ == b.class_of_; }

 private:
  std::vector<ClassId> class_of_;
  std::vector<std::vector<StateId>> classes_;
};

template <class Key>
Partition Partition::from_keys(const std::vector<Key>& keys) {
  Partition p;
  p.class_of_.resize(keys.size());
  // Linear-time renumbering via a sort of (key, first index).
  std::vector<StateId> order(keys.size());
  for (StateId i = 0; i < keys.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&keys](StateId a, StateId b) { return keys[a] < keys[b]; });
  std::vector<StateId> leader(keys.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    leader[order[i]] = (i > 0 && !(keys[order[i - 1]] < keys[order[i]])) ? leader[order[i - 1]] : order[i];
  }
  constexpr ClassId kUnset = ~0u;
  std::vector<ClassId> id(keys.size(), kUnset);
  for (StateId s = 0; s < keys.size(); ++s) {
    auto& c = id[leader[s]];
    if (c == kUnset) {
      c = static_cast<ClassId>(p.classes_.size());
      p.classes_.emplace_back();
    }
    p.class_of_[s] = c;
    p.classes_[c].push_back(s);
  }
  return p;
}

enum class BisimAlgorithm {
  Signature,          // serial signature refinement
  SignatureParallel,  // OpenMP over internal-DAG levels
  Splitter,           // block/splitter refinement
};

const char* to_string(BisimAlgorithm a);

/// Coarsest divergence-blind branching bisimulation on the states of `lts`.
/// Internal cycles are collapsed first; the result is over the original states.
Partition branching_partition(const Lts& lts, BisimAlgorithm algorithm = BisimAlgorithm::Signature);

/// Entry points on an Lts without internal cycles.
Partition signature_refinement(const Lts& lts);
Partition signature_refinement_parallel(const Lts& lts);
Partition splitter_refinement(const Lts& lts);

/// True if one more signature round would split some class of `p`.
bool is_stable(const Lts& lts, const Partition& p);

/// Quotient Lts over classes. Internal edges between distinct classes are
/// merged to one abstract internal edge per (class, class) pair.
struct QuotientLts {
  Lts lts;
  Partition partition;
  /// For every quotient transition, the indices of the concrete transitions
  /// it was lifted from.
  std::vector<std::vector<std::size_t>> witnesses;

  std::size_t num_internal() const { return lts.num_internal_transitions(); }
};

QuotientLts quotient(const Lts& lts, const Partition& p);

/// Internal transition with both endpoints in one class. Throws
/// std::invalid_argument for a visible transition.
bool is_stutter(const Lts& lts, const Partition& p, const Transition& t);

}  // namespace effrace
