#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace effrace {

using StateId = std::uint32_t;
using LabelId = std::uint32_t;

enum class ActionKind : std::uint8_t { Call, Ret, Tau, Other };

/// One action of a concurrent object system.
///
/// Call and Ret are visible; Tau is internal. The instruction tag of a Tau
/// (e.g. "E2", "C4:ok") is reporting data only: every Tau is internal no
/// matter its tag. `Other` holds opaque visible labels imported from
/// external tools.
struct Action {
  ActionKind kind = ActionKind::Tau;
  int thread = 0;
  std::string method;  // Call/Ret: method name. Other: the full label text.
  std::string value;   // Call: rendered argument list "a" or "1,2". Ret: result.
  std::string tag;     // Tau only.

  static Action call(int thread, std::string method, std::string args);
  static Action ret(int thread, std::string method, std::string result);
  static Action tau(int thread, std::string tag);
  static Action other(std::string text);

  bool visible() const { return kind != ActionKind::Tau; }
  bool internal() const { return kind == ActionKind::Tau; }

  /// Instruction tag without the outcome variant ("C4:ok" -> "C4").
  std::string base_tag() const;

  /// Paper-style rendering: "t1 call Enq(a)", "t2 ret(b) Deq", "t3.E2".
  std::string str() const;

  friend bool operator==(const Action&, const Action&) = default;
};

struct ActionHash {
  std::size_t operator()(const Action& a) const noexcept;
};

struct Transition {
  StateId src = 0;
  LabelId label = 0;
  StateId dst = 0;
  friend bool operator==(const Transition&, const Transition&) = default;
};

class LtsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite labeled transition system. Immutable after construction.
///
/// Actions are interned in a label table; transitions refer to labels by
/// index, so equal actions always share one LabelId.
class Lts {
 public:
  Lts() = default;

  std::size_t num_states() const { return num_states_; }
  std::size_t num_transitions() const { return transitions_.size(); }
  std::size_t num_internal_transitions() const;
  StateId initial() const { return initial_; }

  const std::vector<Action>& labels() const { return labels_; }
  const Action& label(LabelId id) const { return labels_[id]; }
  bool internal(LabelId id) const { return labels_[id].internal(); }
  std::optional<LabelId> find_label(const Action& a) const;

  /// All transitions, grouped by source state (stable within a source).
  std::span<const Transition> transitions() const { return transitions_; }
  std::span<const Transition> out(StateId s) const {
    return {transitions_.data() + offsets_[s], transitions_.data() + offsets_[s + 1]};
  }
  /// Index of `t` in transitions(); `t` must come from this Lts.
  std::size_t index_of(const Transition& t) const { return &t - transitions_.data(); }

  /// States not reachable from the initial state.
  const std::vector<bool>& reachable() const { return reachable_; }
  std::size_t num_reachable() const;

  /// Optional per-state debugging payload (canonical state rendering).
  const std::vector<std::string>& payload() const { return payload_; }
  void set_payload(std::vector<std::string> p);

 private:
  friend class LtsBuilder;
  std::size_t num_states_ = 0;
  StateId initial_ = 0;
  std::vector<Action> labels_;
  std::vector<Transition> transitions_;
  std::vector<std::size_t> offsets_{0};
  std::vector<bool> reachable_;
  std::vector<std::string> payload_;
};

/// Incremental construction of an Lts.
class LtsBuilder {
 public:
  explicit LtsBuilder(std::size_t num_states = 0) : num_states_(num_states) {}

  LabelId intern(const Action& a);
  StateId add_state() { return static_cast<StateId>(num_states_++); }
  void ensure_states(std::size_t n) {
    if (n > num_states_) num_states_ = n;
  }
  void add(StateId src, const Action& a, StateId dst) { add(src, intern(a), dst); }
  void add(StateId src, LabelId label, StateId dst) { pending_.push_back({src, label, dst}); }
  std::size_t num_states() const { return num_states_; }

  /// Validates endpoints and produces the Lts. Duplicate transitions are
  /// merged. Throws LtsError naming the first dangling transition.
  Lts build(StateId initial) &&;

 private:
  std::size_t num_states_;
  std::vector<Action> labels_;
  std::unordered_map<Action, LabelId, ActionHash> index_;
  std::vector<Transition> pending_;
};

/// Builds an Lts from explicit triples; the state count is inferred from the
/// largest endpoint (or `num_states` when larger).
Lts build_lts(std::span<const std::tuple<StateId, Action, StateId>> transitions, StateId initial,
              std::size_t num_states = 0);

/// Result of merging internal strongly-connected components.
struct Collapsed {
  Lts lts;
  std::vector<StateId> state_map;  // old state -> new state, total
};

/// Merges every strongly-connected component of the internal-transition
/// graph into one state. New states are numbered by their smallest member.
/// Internal transitions inside a component disappear; all other transitions
/// are lifted and deduplicated.
Collapsed collapse_tau_sccs(const Lts& lts);

/// The part reachable from the initial state. Surviving states keep their
/// relative order; the label table is kept whole.
Lts reachable_part(const Lts& lts);

/// True if the internal-transition graph has no cycle.
bool tau_acyclic(const Lts& lts);

/// True if the whole transition graph has no cycle.
bool acyclic(const Lts& lts);

/// Topological order of the internal-transition graph (sources first).
/// Requires tau_acyclic(lts).
std::vector<StateId> tau_topological_order(const Lts& lts);

}  // namespace effrace
