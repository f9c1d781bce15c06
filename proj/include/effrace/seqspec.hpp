#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "effrace/history.hpp"
#include "effrace/model.hpp"

namespace effrace {

/// Deterministic sequential specification of an object.
///
/// Kinds: "queue" (FIFO), "stack" (LIFO), "ccas" (register `a` with a
/// flag-conditioned compare-and-set returning the old value). Parameters
/// rename methods and results, see the model language reference.
class SequentialSpec {
 public:
  using State = std::vector<std::string>;

  /// Throws std::invalid_argument for unknown kinds or parameters.
  static SequentialSpec from_decl(const SpecDecl& decl);

  const std::string& kind() const { return kind_; }
  State initial() const;
  /// Applies one operation. nullopt: the operation is not enabled in `s`
  /// (a blocking dequeue on an empty queue) or the method is unknown.
  std::optional<std::pair<State, std::string>> apply(const State& s, const std::string& method,
                                                     const std::string& arg) const;

 private:
  std::string kind_;
  std::string put_, take_, empty_, put_result_;
  bool block_ = false;
  std::string cas_, set_flag_;
  std::string init_a_ = "1", init_flag_ = "true";
};

/// Sequential history legal under `spec`.
bool legal(const History& s, const SequentialSpec& spec);

/// H is linearizable w.r.t. the sequential history S: S is sequential, every
/// thread sees the same projection, and the real-time order of H is kept.
bool linearizable(const History& h, const History& s);

/// Orders of operations(h) (indices) that respect the real-time order of h
/// and form a legal sequential history. Pending operations are dropped.
/// Stops after `limit` orders.
std::vector<std::vector<std::size_t>> linearization_orders(const History& h, const SequentialSpec& spec,
                                                           std::size_t limit = 100000);

/// The sequential history listing `ops` in `order`.
History sequential_history(const std::vector<Operation>& ops, const std::vector<std::size_t>& order);

}  // namespace effrace
