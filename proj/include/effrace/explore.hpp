#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "effrace/lts.hpp"
#include "effrace/model.hpp"

namespace effrace {

/// One allowed invocation: a method and its rendered arguments.
struct OpChoice {
  std::string method;
  std::vector<std::string> args;
  std::string str() const;
  friend bool operator==(const OpChoice&, const OpChoice&) = default;
};

struct ThreadClient {
  std::vector<OpChoice> allowed;
  int budget = 1;
};

/// Bounded client: k threads, each with an allowed operation set and an
/// operation budget.
struct ClientConfig {
  std::vector<ThreadClient> threads;

  std::size_t num_threads() const { return threads.size(); }
  std::size_t total_ops() const;
  /// Canonical text accepted by parse_client.
  std::string str() const;
  /// Same client with every thread's budget raised by `extra`.
  ClientConfig with_extra_budget(int extra) const;
};

/// Parses an operation spec:
///   "t1:Enq(a),t2:Deq,t3:Enq(b)"   per-thread operations (repeat a thread to
///                                   widen its set), budget 1
///   "mgc:3,domain=a,b"             every method with every argument tuple
///                                   from the domain, budget 3
/// Either form accepts trailing "budget=N" and "threads=K" items. `threads`
/// fixes or checks the thread count. Throws std::invalid_argument.
ClientConfig parse_client(const std::string& spec, const ObjectModel& model, std::optional<int> threads = std::nullopt);

/// "2x3" -> 2 threads, most general client with budget 3 over `domain`.
ClientConfig most_general_client(const ObjectModel& model, int threads, int budget,
                                 const std::vector<std::string>& domain);

class ExploreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExploreOptions {
  std::size_t step_bound = 2'000'000;  // maximum number of states
  std::size_t arena_bound = 1024;      // maximum live heap nodes in one state
  bool keep_payload = false;           // store a rendering of every state
};

/// Breadth-first exploration of all interleavings. States are numbered in
/// discovery order; transitions of a state are ordered by thread, then by
/// operation choice.
Lts explore(const ObjectModel& model, const ClientConfig& client, const ExploreOptions& options = {});

}  // namespace effrace
