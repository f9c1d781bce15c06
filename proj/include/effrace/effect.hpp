#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "effrace/bisim.hpp"
#include "effrace/history.hpp"
#include "effrace/lts.hpp"
#include "effrace/seqspec.hpp"

namespace effrace {

/// Everything the effect analyses share: the system with internal cycles
/// collapsed (a DAG for every bounded client), its branching partition and
/// class-level reachability.
class EffectContext {
 public:
  explicit EffectContext(const Lts& original);

  const Lts& original() const { return *original_; }
  /// Internal cycles collapsed; all analyses below work on these states.
  const Lts& system() const { return system_; }
  StateId to_system(StateId original_state) const { return state_map_[original_state]; }
  const Partition& partition() const { return partition_; }
  const Partition& original_partition() const { return original_partition_; }
  /// Quotient of the original system. Its states are the classes.
  const QuotientLts& quotient() const { return quotient_; }

  std::size_t num_classes() const { return partition_.num_classes(); }
  ClassId cls(StateId s) const { return partition_.class_of(s); }

  /// Key of a label in class signatures: every internal label shares one key.
  std::uint32_t key(LabelId l) const;
  static constexpr std::uint32_t kTau = 0xffffffffu;

  /// Effect steps of a class as (key, target class), sorted.
  const std::vector<std::pair<std::uint32_t, ClassId>>& signature(ClassId c) const { return sig_[c]; }
  bool has_step(ClassId from, std::uint32_t key, ClassId to) const;
  /// Reflexive-transitive closure of class-level internal steps.
  bool tau_reaches(ClassId from, ClassId to) const;
  /// Classes L with from =a=> L: internal steps, one `key` step, internal steps.
  std::vector<bool> reach_after(ClassId from, std::uint32_t key) const;

  /// States reached from s by internal steps inside its class (s included),
  /// in breadth-first order.
  std::vector<StateId> inert_closure(StateId s) const;
  /// Transitions leaving the class of their source, or visible.
  bool is_pivot(const Transition& t) const;

  /// Breadth-first path from the initial state to s (first discovery).
  Path prefix_to(StateId s) const;
  /// Shortest continuation from s to a state without successors; stops at s
  /// when none is reachable. Ties go to the earlier transition.
  Path continuation(StateId s) const;
  bool terminal_reachable(StateId s) const { return dist_[s] != kFar; }
  const std::vector<StateId>& topological_order() const { return topo_; }

 private:
  static constexpr std::uint32_t kFar = 0xffffffffu;
  const Lts* original_;
  Lts system_;
  std::vector<StateId> state_map_;
  Partition partition_;
  Partition original_partition_;
  QuotientLts quotient_;
  std::vector<std::vector<std::pair<std::uint32_t, ClassId>>> sig_;
  std::vector<std::vector<std::uint64_t>> reach_;
  std::vector<StateId> parent_;
  std::vector<std::size_t> parent_edge_;
  std::vector<std::uint32_t> dist_;
  std::vector<std::size_t> next_edge_;
  std::vector<StateId> topo_;
};

/// An effect step normalized to its pivot: internal steps inside the anchor
/// class lead from `anchor` to the source of transition `pivot`, which leaves
/// the class (or is visible).
struct EffectStep {
  StateId anchor = 0;
  std::size_t pivot = 0;  // index into system().transitions()
  ClassId anchor_class = 0;
  ClassId target_class = 0;
  bool internal = true;

  friend bool operator==(const EffectStep&, const EffectStep&) = default;
};

/// All pivots, each as the effect step anchored at its own source.
std::vector<EffectStep> effect_steps(const EffectContext& ctx);
/// Effect steps anchored at s: one per reachable pivot.
std::vector<EffectStep> effect_steps_from(const EffectContext& ctx, StateId s);

/// alpha is identified by beta: distinct target classes, and no effect step
/// with beta's action leads from alpha's target class into beta's. Throws
/// std::invalid_argument if the anchors differ or alpha is visible.
bool identifies(const EffectContext& ctx, const EffectStep& alpha, const EffectStep& beta);
/// alpha is independent of beta w.r.t. the effect state `witness`. Throws
/// std::invalid_argument unless alpha is identified by beta.
bool independent(const EffectContext& ctx, const EffectStep& alpha, const EffectStep& beta, ClassId witness);
/// Smallest witness class, if any.
std::optional<ClassId> independence_witness(const EffectContext& ctx, const EffectStep& alpha, const EffectStep& beta);
/// alpha << beta.
bool races(const EffectContext& ctx, const EffectStep& alpha, const EffectStep& beta);

/// A race between two internal effect steps from one anchor class, with the
/// instruction pairs that realize it (alpha's label, beta's label), sorted.
struct RacePair {
  ClassId anchor = 0;
  ClassId left = 0, right = 0;  // target classes, left < right
  EffectStep alpha, beta;       // representatives from the smallest anchor state
  std::vector<std::pair<LabelId, LabelId>> instructions;
};

std::vector<RacePair> effect_races(const EffectContext& ctx);

/// Instruction-level races: unordered pairs of labels, rendered "t1.C13" etc.
/// The map value counts the anchor classes where the pair occurs.
std::map<std::pair<std::string, std::string>, std::size_t> instruction_races(const EffectContext& ctx,
                                                                            const std::vector<RacePair>& races);

/// Two executions sharing their prefix up to the anchor, one through each
/// side of a race.
struct RaceStructure {
  StateId anchor = 0;
  std::size_t alpha = 0, beta = 0;  // pivot transitions
  Path sigma, rho;
};

RaceStructure race_structure(const EffectContext& ctx, const RacePair& race);
std::vector<RaceStructure> race_structures(const EffectContext& ctx, const std::vector<RacePair>& races);

/// Executions witnessing that a critical step changes the effect.
struct EffectStructure {
  std::vector<std::size_t> chain;   // critical steps, first = the queried step
  std::vector<std::size_t> delays;  // delays[i]: effect step taken before chain[i + 1]
  RaceStructure base;              // race reached at the end of the chain
  std::vector<Path> executions;
};

/// Builds the structure for the critical step `pivot` (system transition
/// index). Throws std::invalid_argument for a stutter or visible step.
/// nullopt if no race is reachable along diamonds.
std::optional<EffectStructure> effect_structure(const EffectContext& ctx, const std::vector<RacePair>& races,
                                                std::size_t pivot);

/// Internal transitions of the original system whose endpoints differ in class.
std::vector<std::size_t> critical_steps(const EffectContext& ctx);

/// Per instruction tag (with outcome variant): number of critical steps.
std::map<std::string, std::size_t> critical_instructions(const EffectContext& ctx);

struct Rational {
  std::uint64_t num = 0, den = 0;
  bool defined() const { return den != 0; }
  /// "7.6%" style rendering with two significant digits; "undefined" for 0/0.
  std::string percent() const;
  friend bool operator==(const Rational&, const Rational&) = default;
  friend bool operator<(const Rational& a, const Rational& b) {
    return static_cast<unsigned __int128>(a.num) * b.den < static_cast<unsigned __int128>(b.num) * a.den;
  }
};

/// Internal transitions of the quotient over internal transitions of the original.
Rational c_rate(const Lts& original, const QuotientLts& quotient);

// ---- property checks

struct CheckResult {
  std::string name;
  bool passed = true;
  bool skipped = false;
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::string witness;  // first violation, or the reason for skipping
};

/// Every internal effect step is identified by some effect step.
CheckResult check_identification_exists(const EffectContext& ctx);
/// Identified pairs are either independent w.r.t. some class or racing both
/// ways, and every racing partner is internal.
CheckResult check_dichotomy(const EffectContext& ctx);
/// Race members are internal.
CheckResult check_races_internal(const EffectContext& ctx, const std::vector<RacePair>& races);
/// Critical steps agree three ways: class change on the original system,
/// quotient witnesses, and existence of an effect structure with a race.
CheckResult check_critical_agreement(const EffectContext& ctx, const std::vector<RacePair>& races);
/// Re-partitioning the sub-system spanned by an effect structure still
/// separates the endpoints. At most `samples` steps (0: all).
CheckResult check_structure_separation(const EffectContext& ctx, const std::vector<RacePair>& races,
                                       std::size_t samples = 0);
/// As above for random intermediate systems between the structure and the
/// whole system.
CheckResult check_intermediate_separation(const EffectContext& ctx, const std::vector<RacePair>& races,
                                          std::size_t samples, std::uint64_t seed);
/// Every internal path of the quotient up to `max_len` steps is realized by
/// effect steps from a member of its first class.
CheckResult check_quotient_paths(const EffectContext& ctx, std::size_t max_len = 4, std::size_t max_paths = 20000);
/// How completed histories are grouped before comparing their returns.
enum class HistoryPairing {
  Interleaving,  // same event sequence up to returned values
  CallMultiset,  // same per-thread call sequences, any interleaving
};

/// Completed histories that differ from another one of their group in
/// returned values all occur on executions through a race.
CheckResult check_history_coverage(const EffectContext& ctx, const std::vector<RacePair>& races,
                                   HistoryPairing pairing = HistoryPairing::Interleaving,
                                   std::size_t max_histories = 2'000'000);
/// Instruction races of `small` recur at the embedded anchors of `large`.
/// Throws std::invalid_argument if `small` does not embed into `large`.
CheckResult check_race_embedding(const EffectContext& small, const std::vector<RacePair>& small_races,
                                 const EffectContext& large, const std::vector<RacePair>& large_races);

/// Three pairwise races at one anchor where the outer pair does not race.
std::optional<std::string> non_transitive_witness(const EffectContext& ctx, const std::vector<RacePair>& races);

// ---- linearization points

struct LpAttribution {
  std::string instruction;  // tag of the racing step, e.g. "E2"
  std::string step;         // full label, e.g. "t3.E2"
  Operation operation;      // the operation the step belongs to
  std::string history;      // history of the execution
  std::size_t race = 0;     // index into the race list
};

struct LpClass {
  std::string method;
  std::size_t max_critical_steps = 0;  // most critical steps of one call
  bool fixed = true;                   // within this instance
};

/// Linearization-point attributions from the representative race structures.
std::vector<LpAttribution> detect_lps(const EffectContext& ctx, const std::vector<RacePair>& races,
                                      const SequentialSpec& spec);
/// Fixed / non-fixed classification per method from critical-step counts.
std::vector<LpClass> classify_lps(const EffectContext& ctx);

/// Classes entered by internal critical steps of at least two threads with
/// the same instruction tag.
std::vector<ClassId> shared_effect_targets(const EffectContext& ctx, const std::string& tag);

}  // namespace effrace
