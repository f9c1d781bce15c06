#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "effrace/lts.hpp"

namespace effrace {

/// A path through an Lts: a start state followed by (label, next state) steps.
struct Path {
  StateId start = 0;
  std::vector<std::pair<LabelId, StateId>> steps;

  StateId end() const { return steps.empty() ? start : steps.back().second; }
  std::size_t size() const { return steps.size(); }
  /// States visited, start included.
  std::vector<StateId> states() const;
  /// Concatenation; `tail` must start where this path ends.
  Path concat(const Path& tail) const;
  friend bool operator==(const Path&, const Path&) = default;
};

/// True if every step of `p` is a transition of `lts`.
bool valid_path(const Lts& lts, const Path& p);

/// Sequence of call/ret events.
struct History {
  std::vector<Action> events;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
  History project(int thread) const;
  /// Every call has a later matching ret by the same thread.
  bool complete() const;
  /// Per-thread projections alternate call, ret, call, ...
  bool well_formed() const;
  /// Each call is immediately followed by its matching ret.
  bool sequential() const;
  std::string str() const;

  friend bool operator==(const History&, const History&) = default;
  friend auto operator<=>(const History& a, const History& b) {
    return a.str() <=> b.str();
  }
};

/// A call matched with its ret (or pending when no ret follows).
struct Operation {
  std::size_t call_index = 0;
  std::optional<std::size_t> ret_index;
  int thread = 0;
  std::string method;
  std::string arg;
  std::string result;

  bool pending() const { return !ret_index; }
  std::string str() const;
  friend bool operator==(const Operation&, const Operation&) = default;
};

/// Erases internal actions along the path.
History history_of(const Lts& lts, const Path& execution);

/// Operations of `h` in call order.
std::vector<Operation> operations(const History& h);

/// e1 <_H e2: e1's ret occurs before e2's call. Throws std::invalid_argument
/// if either operation does not occur in h.
bool precedes(const History& h, const Operation& e1, const Operation& e2);

}  // namespace effrace
