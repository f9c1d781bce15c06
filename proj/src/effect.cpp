#include "effrace/effect.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <fmt/format.h>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace effrace {

namespace {

constexpr std::uint32_t kUnset = 0xffffffffu;

void set_bit(std::vector<std::uint64_t>& b, std::size_t i) { b[i >> 6] |= std::uint64_t{1} << (i & 63); }
bool get_bit(const std::vector<std::uint64_t>& b, std::size_t i) { return (b[i >> 6] >> (i & 63)) & 1; }

}  // namespace

EffectContext::EffectContext(const Lts& original) : original_(&original) {
  auto col = collapse_tau_sccs(original);
  system_ = std::move(col.lts);
  state_map_ = std::move(col.state_map);
  if (!acyclic(system_)) throw std::invalid_argument("effect analysis needs a system whose only cycles are internal");
  partition_ = signature_refinement(system_);
  std::vector<ClassId> keys(original.num_states());
  for (StateId s = 0; s < original.num_states(); ++s) keys[s] = partition_.class_of(state_map_[s]);
  original_partition_ = Partition::from_keys(keys);
  for (StateId s = 0; s < original.num_states(); ++s)
    if (original_partition_.class_of(s) != keys[s]) throw std::logic_error("class numbering differs after lifting");
  quotient_ = effrace::quotient(original, original_partition_);

  const auto n = system_.num_states();
  const auto c = partition_.num_classes();
  sig_.assign(c, {});
  for (const auto& t : system_.transitions())
    if (is_pivot(t)) sig_[cls(t.src)].emplace_back(key(t.label), cls(t.dst));
  for (auto& s : sig_) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  // Class-level internal reachability, one breadth-first search per class.
  const std::size_t words = (c + 63) / 64;
  reach_.assign(c, std::vector<std::uint64_t>(words, 0));
  std::vector<ClassId> queue;
  for (ClassId a = 0; a < c; ++a) {
    auto& bits = reach_[a];
    queue.assign(1, a);
    set_bit(bits, a);
    for (std::size_t i = 0; i < queue.size(); ++i)
      for (const auto& [k, b] : sig_[queue[i]])
        if (k == kTau && !get_bit(bits, b)) {
          set_bit(bits, b);
          queue.push_back(b);
        }
  }
  // Breadth-first parents from the initial state.
  parent_.assign(n, kUnset);
  parent_edge_.assign(n, 0);
  std::vector<StateId> bfs{system_.initial()};
  parent_[system_.initial()] = system_.initial();
  for (std::size_t i = 0; i < bfs.size(); ++i)
    for (const auto& t : system_.out(bfs[i]))
      if (parent_[t.dst] == kUnset) {
        parent_[t.dst] = bfs[i];
        parent_edge_[t.dst] = system_.index_of(t);
        bfs.push_back(t.dst);
      }
  // Topological order of the whole system.
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& t : system_.transitions()) ++indeg[t.dst];
  for (StateId s = 0; s < n; ++s)
    if (indeg[s] == 0) topo_.push_back(s);
  for (std::size_t i = 0; i < topo_.size(); ++i)
    for (const auto& t : system_.out(topo_[i]))
      if (--indeg[t.dst] == 0) topo_.push_back(t.dst);
  // Distance to a state without successors.
  dist_.assign(n, kFar);
  next_edge_.assign(n, 0);
  for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
    StateId s = *it;
    auto out = system_.out(s);
    if (out.empty()) {
      dist_[s] = 0;
      continue;
    }
    for (const auto& t : out)
      if (dist_[t.dst] != kFar && (dist_[s] == kFar || dist_[t.dst] + 1 < dist_[s])) {
        dist_[s] = dist_[t.dst] + 1;
        next_edge_[s] = system_.index_of(t);
      }
  }
}

std::uint32_t EffectContext::key(LabelId l) const { return system_.internal(l) ? kTau : l; }

bool EffectContext::has_step(ClassId from, std::uint32_t k, ClassId to) const {
  return std::binary_search(sig_[from].begin(), sig_[from].end(), std::pair{k, to});
}

bool EffectContext::tau_reaches(ClassId from, ClassId to) const { return get_bit(reach_[from], to); }

std::vector<bool> EffectContext::reach_after(ClassId from, std::uint32_t k) const {
  const auto c = num_classes();
  std::vector<bool> out(c, false);
  if (k == kTau) {
    for (ClassId l = 0; l < c; ++l) out[l] = tau_reaches(from, l);
    return out;
  }
  for (ClassId mid = 0; mid < c; ++mid) {
    if (!tau_reaches(from, mid)) continue;
    for (const auto& [key2, b] : sig_[mid])
      if (key2 == k)
        for (ClassId l = 0; l < c; ++l)
          if (tau_reaches(b, l)) out[l] = true;
  }
  return out;
}

std::vector<StateId> EffectContext::inert_closure(StateId s) const {
  std::vector<StateId> out{s};
  std::unordered_set<StateId> seen{s};
  for (std::size_t i = 0; i < out.size(); ++i)
    for (const auto& t : system_.out(out[i]))
      if (system_.internal(t.label) && cls(t.dst) == cls(s) && seen.insert(t.dst).second) out.push_back(t.dst);
  return out;
}

bool EffectContext::is_pivot(const Transition& t) const {
  return !system_.internal(t.label) || cls(t.src) != cls(t.dst);
}

Path EffectContext::prefix_to(StateId s) const {
  if (parent_[s] == kUnset) throw std::invalid_argument(fmt::format("state {} is not reachable", s));
  std::vector<std::pair<LabelId, StateId>> rev;
  for (StateId u = s; u != system_.initial(); u = parent_[u])
    rev.emplace_back(system_.transitions()[parent_edge_[u]].label, u);
  Path p{system_.initial(), {rev.rbegin(), rev.rend()}};
  return p;
}

Path EffectContext::continuation(StateId s) const {
  Path p{s, {}};
  if (dist_[s] == kFar) return p;
  for (StateId u = s; dist_[u] != 0;) {
    const auto& t = system_.transitions()[next_edge_[u]];
    p.steps.emplace_back(t.label, t.dst);
    u = t.dst;
  }
  return p;
}

// ---------------------------------------------------------------- effect steps

std::vector<EffectStep> effect_steps(const EffectContext& ctx) {
  std::vector<EffectStep> out;
  const auto& sys = ctx.system();
  for (const auto& t : sys.transitions())
    if (ctx.is_pivot(t))
      out.push_back({t.src, sys.index_of(t), ctx.cls(t.src), ctx.cls(t.dst), sys.internal(t.label)});
  return out;
}

std::vector<EffectStep> effect_steps_from(const EffectContext& ctx, StateId s) {
  std::vector<EffectStep> out;
  const auto& sys = ctx.system();
  for (StateId u : ctx.inert_closure(s))
    for (const auto& t : sys.out(u))
      if (ctx.is_pivot(t)) out.push_back({s, sys.index_of(t), ctx.cls(s), ctx.cls(t.dst), sys.internal(t.label)});
  return out;
}

namespace {

std::uint32_t step_key(const EffectContext& ctx, const EffectStep& e) {
  return ctx.key(ctx.system().transitions()[e.pivot].label);
}

// alpha (internal, to r) identified by a step (k, q) from the same class.
bool class_identifies(const EffectContext& ctx, ClassId r, std::uint32_t k, ClassId q) {
  return r != q && !ctx.has_step(r, k, q);
}

std::optional<ClassId> class_witness(const EffectContext& ctx, ClassId r, std::uint32_t k, ClassId q) {
  auto after = ctx.reach_after(r, k);
  for (ClassId l = 0; l < ctx.num_classes(); ++l) {
    if (after[l] && ctx.tau_reaches(q, l)) return l;
    if (k == EffectContext::kTau && l == r && ctx.tau_reaches(q, r)) return l;
  }
  return std::nullopt;
}

// Both internal: identification is implied by disjoint reachability.
bool class_race(const EffectContext& ctx, ClassId r, ClassId q) {
  if (!class_identifies(ctx, r, EffectContext::kTau, q)) return false;
  return !class_witness(ctx, r, EffectContext::kTau, q);
}

}  // namespace

bool identifies(const EffectContext& ctx, const EffectStep& alpha, const EffectStep& beta) {
  if (alpha.anchor != beta.anchor)
    throw std::invalid_argument(fmt::format("effect steps have different anchors {} and {}", alpha.anchor, beta.anchor));
  if (!alpha.internal) throw std::invalid_argument("identified effect step must be internal");
  return class_identifies(ctx, alpha.target_class, step_key(ctx, beta), beta.target_class);
}

bool independent(const EffectContext& ctx, const EffectStep& alpha, const EffectStep& beta, ClassId witness) {
  if (!identifies(ctx, alpha, beta)) throw std::invalid_argument("effect step is not identified by the other");
  if (witness >= ctx.num_classes()) throw std::invalid_argument("witness is not a class");
  const auto k = step_key(ctx, beta);
  const auto r = alpha.target_class, q = beta.target_class;
  if (ctx.reach_after(r, k)[witness] && ctx.tau_reaches(q, witness)) return true;
  return k == EffectContext::kTau && witness == r && ctx.tau_reaches(q, r);
}

std::optional<ClassId> independence_witness(const EffectContext& ctx, const EffectStep& alpha, const EffectStep& beta) {
  if (!identifies(ctx, alpha, beta)) throw std::invalid_argument("effect step is not identified by the other");
  return class_witness(ctx, alpha.target_class, step_key(ctx, beta), beta.target_class);
}

bool races(const EffectContext& ctx, const EffectStep& alpha, const EffectStep& beta) {
  if (!alpha.internal || !beta.internal) return false;
  if (!identifies(ctx, alpha, beta)) return false;
  return !independence_witness(ctx, alpha, beta);
}

// ---------------------------------------------------------------- races

namespace {

// Internal pivots reachable inside the class of s, as (target class, label).
std::vector<std::pair<ClassId, LabelId>> pivot_labels(const EffectContext& ctx, StateId s) {
  std::vector<std::pair<ClassId, LabelId>> out;
  const auto& sys = ctx.system();
  for (StateId u : ctx.inert_closure(s))
    for (const auto& t : sys.out(u))
      if (sys.internal(t.label) && ctx.cls(t.dst) != ctx.cls(u)) out.emplace_back(ctx.cls(t.dst), t.label);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Critical transitions leaving s itself, as (target class, label).
std::vector<std::pair<ClassId, LabelId>> direct_pivots(const EffectContext& ctx, StateId s) {
  std::vector<std::pair<ClassId, LabelId>> out;
  for (const auto& t : ctx.system().out(s))
    if (ctx.system().internal(t.label) && ctx.cls(t.dst) != ctx.cls(s)) out.emplace_back(ctx.cls(t.dst), t.label);
  std::sort(out.begin(), out.end());
  return out;
}

EffectStep first_step_to(const EffectContext& ctx, StateId s, ClassId target) {
  for (const auto& e : effect_steps_from(ctx, s))
    if (e.internal && e.target_class == target) return e;
  throw std::logic_error("class signature lists a step that its member cannot take");
}

}  // namespace

std::vector<RacePair> effect_races(const EffectContext& ctx) {
  std::vector<RacePair> out;
  for (ClassId a = 0; a < ctx.num_classes(); ++a) {
    std::vector<ClassId> targets;
    for (const auto& [k, b] : ctx.signature(a))
      if (k == EffectContext::kTau) targets.push_back(b);
    std::vector<std::pair<ClassId, ClassId>> pairs;
    for (std::size_t i = 0; i < targets.size(); ++i)
      for (std::size_t j = i + 1; j < targets.size(); ++j)
        if (class_race(ctx, targets[i], targets[j]) || class_race(ctx, targets[j], targets[i]))
          pairs.emplace_back(targets[i], targets[j]);
    if (pairs.empty()) continue;
    const StateId s = ctx.partition().members(a).front();
    std::vector<std::set<std::pair<LabelId, LabelId>>> instr(pairs.size());
    for (StateId m : ctx.partition().members(a)) {
      auto labels = pivot_labels(ctx, m);
      for (std::size_t p = 0; p < pairs.size(); ++p)
        for (const auto& [c1, l1] : labels)
          if (c1 == pairs[p].first)
            for (const auto& [c2, l2] : labels)
              if (c2 == pairs[p].second) instr[p].emplace(l1, l2);
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      RacePair r;
      r.anchor = a;
      r.left = pairs[p].first;
      r.right = pairs[p].second;
      r.alpha = first_step_to(ctx, s, r.left);
      r.beta = first_step_to(ctx, s, r.right);
      r.instructions.assign(instr[p].begin(), instr[p].end());
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::map<std::pair<std::string, std::string>, std::size_t> instruction_races(const EffectContext& ctx,
                                                                            const std::vector<RacePair>& races) {
  std::map<std::pair<std::string, std::string>, std::size_t> out;
  for (const auto& r : races) {
    std::set<std::pair<std::string, std::string>> here;
    for (const auto& [l1, l2] : r.instructions) {
      auto a = ctx.system().label(l1).str(), b = ctx.system().label(l2).str();
      if (b < a) std::swap(a, b);
      here.emplace(a, b);
    }
    for (const auto& p : here) ++out[p];
  }
  return out;
}

namespace {

// Internal path inside the class of s from s to `target`.
Path inert_path(const EffectContext& ctx, StateId s, StateId target) {
  const auto& sys = ctx.system();
  std::unordered_map<StateId, std::pair<StateId, LabelId>> parent;
  std::vector<StateId> queue{s};
  parent[s] = {s, 0};
  for (std::size_t i = 0; i < queue.size() && !parent.count(target); ++i)
    for (const auto& t : sys.out(queue[i]))
      if (sys.internal(t.label) && ctx.cls(t.dst) == ctx.cls(s) && !parent.count(t.dst)) {
        parent[t.dst] = {queue[i], t.label};
        queue.push_back(t.dst);
      }
  if (!parent.count(target)) throw std::logic_error("pivot source is not inside the anchor's class");
  std::vector<std::pair<LabelId, StateId>> rev;
  for (StateId u = target; u != s; u = parent[u].first) rev.emplace_back(parent[u].second, u);
  return {s, {rev.rbegin(), rev.rend()}};
}

Path step_path(const EffectContext& ctx, std::size_t transition) {
  const auto& t = ctx.system().transitions()[transition];
  return {t.src, {{t.label, t.dst}}};
}

// Execution: prefix, internal path to the pivot, the pivot, continuation.
Path through(const EffectContext& ctx, const Path& prefix, std::size_t pivot) {
  const auto& t = ctx.system().transitions()[pivot];
  return prefix.concat(inert_path(ctx, prefix.end(), t.src))
      .concat(step_path(ctx, pivot))
      .concat(ctx.continuation(t.dst));
}

RaceStructure structure_at(const EffectContext& ctx, const Path& prefix, std::size_t alpha, std::size_t beta) {
  RaceStructure rs;
  rs.anchor = prefix.end();
  rs.alpha = alpha;
  rs.beta = beta;
  rs.sigma = through(ctx, prefix, alpha);
  rs.rho = through(ctx, prefix, beta);
  return rs;
}

struct RaceIndex {
  // (anchor class, target class) -> partner target classes
  std::map<std::pair<ClassId, ClassId>, std::vector<ClassId>> partners;
  explicit RaceIndex(const std::vector<RacePair>& races) {
    for (const auto& r : races) {
      partners[{r.anchor, r.left}].push_back(r.right);
      partners[{r.anchor, r.right}].push_back(r.left);
    }
  }
  const std::vector<ClassId>* find(ClassId a, ClassId r) const {
    auto it = partners.find({a, r});
    return it == partners.end() ? nullptr : &it->second;
  }
};

// Resolves critical steps to a race along commuting diamonds.
class ChainResolver {
 public:
  ChainResolver(const EffectContext& ctx, const RaceIndex& index) : ctx_(ctx), index_(index) {}

  // For step p: -1 unresolvable, 0 racing, 1 delayed via next_[p].
  int resolve(std::size_t p) {
    auto it = state_.find(p);
    if (it != state_.end()) return it->second;
    const auto& sys = ctx_.system();
    const auto& t = sys.transitions()[p];
    if (index_.find(ctx_.cls(t.src), ctx_.cls(t.dst))) return state_[p] = 0;
    state_[p] = -1;  // provisional; the system is acyclic so this is never read back in a cycle
    const ClassId r = ctx_.cls(t.dst);
    // Delay by any effect step x from s; a critical step y after it must land
    // in a class that r reaches by x's action.
    // Commuting diamonds (the same instruction after the delay) come first.
    for (const bool same_label : {true, false}) {
      for (const auto& x : effect_steps_from(ctx_, t.src)) {
        if (x.pivot == p) continue;
        const auto k = ctx_.key(sys.transitions()[x.pivot].label);
        if (!class_identifies(ctx_, r, k, x.target_class)) continue;
        const auto& after = reach_after(r, k);
        const StateId s2 = sys.transitions()[x.pivot].dst;
        for (const auto& y : effect_steps_from(ctx_, s2)) {
          if (!y.internal || !after[y.target_class]) continue;
          if ((sys.transitions()[y.pivot].label == t.label) != same_label) continue;
          if (resolve(y.pivot) >= 0) {
            next_[p] = {x.pivot, y.pivot};
            return state_[p] = 1;
          }
        }
      }
    }
    return -1;
  }
  std::pair<std::size_t, std::size_t> next(std::size_t p) const { return next_.at(p); }

 private:
  const EffectContext& ctx_;
  const RaceIndex& index_;
  std::unordered_map<std::size_t, int> state_;
  std::unordered_map<std::size_t, std::pair<std::size_t, std::size_t>> next_;
  std::map<std::pair<ClassId, std::uint32_t>, std::vector<bool>> after_;

  const std::vector<bool>& reach_after(ClassId c, std::uint32_t k) {
    auto it = after_.find({c, k});
    if (it == after_.end()) it = after_.emplace(std::pair{c, k}, ctx_.reach_after(c, k)).first;
    return it->second;
  }
};

std::optional<EffectStructure> build_structure(const EffectContext& ctx, const RaceIndex& index,
                                               ChainResolver& resolver, std::size_t pivot) {
  const auto& sys = ctx.system();
  if (pivot >= sys.num_transitions()) throw std::invalid_argument("no such transition");
  const auto& t = sys.transitions()[pivot];
  if (!sys.internal(t.label)) throw std::invalid_argument("effect structures are defined for internal steps");
  if (ctx.cls(t.src) == ctx.cls(t.dst)) throw std::invalid_argument("stutter step has no effect structure");
  if (resolver.resolve(pivot) < 0) return std::nullopt;
  EffectStructure es;
  auto& delays = es.delays;
  es.chain.push_back(pivot);
  while (resolver.resolve(es.chain.back()) == 1) {
    auto [x, y] = resolver.next(es.chain.back());
    delays.push_back(x);
    es.chain.push_back(y);
  }
  Path prefix = ctx.prefix_to(t.src);
  for (std::size_t i = 0; i + 1 < es.chain.size(); ++i) {
    es.executions.push_back(through(ctx, prefix, es.chain[i]));
    const auto& x = sys.transitions()[delays[i]];
    prefix = prefix.concat(inert_path(ctx, prefix.end(), x.src)).concat(step_path(ctx, delays[i]));
  }
  const auto& last = sys.transitions()[es.chain.back()];
  const auto* partners = index.find(ctx.cls(last.src), ctx.cls(last.dst));
  auto beta = first_step_to(ctx, prefix.end(), partners->front());
  es.base = structure_at(ctx, prefix, es.chain.back(), beta.pivot);
  es.executions.push_back(es.base.sigma);
  es.executions.push_back(es.base.rho);
  return es;
}

}  // namespace

RaceStructure race_structure(const EffectContext& ctx, const RacePair& race) {
  return structure_at(ctx, ctx.prefix_to(race.alpha.anchor), race.alpha.pivot, race.beta.pivot);
}

std::vector<RaceStructure> race_structures(const EffectContext& ctx, const std::vector<RacePair>& races) {
  std::vector<RaceStructure> out;
  out.reserve(races.size());
  for (const auto& r : races) out.push_back(race_structure(ctx, r));
  return out;
}

std::optional<EffectStructure> effect_structure(const EffectContext& ctx, const std::vector<RacePair>& races,
                                                std::size_t pivot) {
  RaceIndex index(races);
  ChainResolver resolver(ctx, index);
  return build_structure(ctx, index, resolver, pivot);
}

std::vector<std::size_t> critical_steps(const EffectContext& ctx) {
  std::vector<std::size_t> out;
  const auto& lts = ctx.original();
  const auto& p = ctx.original_partition();
  for (const auto& t : lts.transitions())
    if (lts.internal(t.label) && !p.same(t.src, t.dst)) out.push_back(lts.index_of(t));
  return out;
}

std::map<std::string, std::size_t> critical_instructions(const EffectContext& ctx) {
  std::map<std::string, std::size_t> out;
  for (auto i : critical_steps(ctx)) ++out[ctx.original().label(ctx.original().transitions()[i].label).tag];
  return out;
}

std::string Rational::percent() const {
  if (!defined()) return "undefined";
  if (num == 0) return "0%";
  const double v = 100.0 * static_cast<double>(num) / static_cast<double>(den);
  const int magnitude = static_cast<int>(std::floor(std::log10(v)));
  const int decimals = std::max(0, 1 - magnitude);
  const double scale = std::pow(10.0, decimals);
  double rounded = std::round(v * scale) / scale;
  // Rounding can carry into the next magnitude (9.96 -> 10).
  int digits = decimals;
  if (rounded >= std::pow(10.0, magnitude + 1) && digits > 0) --digits;
  return fmt::format("{:.{}f}%", rounded, digits);
}

Rational c_rate(const Lts& original, const QuotientLts& quotient) {
  return {quotient.num_internal(), original.num_internal_transitions()};
}

// ---------------------------------------------------------------- checks

namespace {

void violation(CheckResult& r, const std::string& what) {
  if (r.violations++ == 0) r.witness = what;
  r.passed = false;
}

std::string class_step(const EffectContext& ctx, ClassId a, std::uint32_t k, ClassId b) {
  return fmt::format("[{}] -{}-> [{}]", a, k == EffectContext::kTau ? std::string("tau") : ctx.system().label(k).str(), b);
}

// Sub-system spanned by a set of transitions; returns it and the new ids.
Lts sub_system(const EffectContext& ctx, const std::set<std::size_t>& transitions,
               std::unordered_map<StateId, StateId>& ids) {
  const auto& sys = ctx.system();
  ids.clear();
  ids[sys.initial()] = 0;
  auto id = [&ids](StateId s) {
    auto [it, inserted] = ids.try_emplace(s, static_cast<StateId>(ids.size()));
    return it->second;
  };
  LtsBuilder b;
  for (const auto& a : sys.labels()) b.intern(a);
  for (auto i : transitions) {
    const auto& t = sys.transitions()[i];
    auto s = id(t.src);
    b.add(s, t.label, id(t.dst));
  }
  b.ensure_states(ids.size());
  return std::move(b).build(0);
}

void add_path(const EffectContext& ctx, const Path& p, std::set<std::size_t>& out) {
  StateId u = p.start;
  for (const auto& [l, v] : p.steps) {
    for (const auto& t : ctx.system().out(u))
      if (t.label == l && t.dst == v) {
        out.insert(ctx.system().index_of(t));
        break;
      }
    u = v;
  }
}

void add_future(const EffectContext& ctx, StateId s, std::set<std::size_t>& out) {
  std::vector<StateId> stack{s};
  std::unordered_set<StateId> seen{s};
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    for (const auto& t : ctx.system().out(u)) {
      out.insert(ctx.system().index_of(t));
      if (seen.insert(t.dst).second) stack.push_back(t.dst);
    }
  }
}

// Transitions of every execution through the structure's steps.
std::set<std::size_t> structure_span(const EffectContext& ctx, const EffectStructure& es) {
  std::set<std::size_t> span;
  const auto& sys = ctx.system();
  add_path(ctx, ctx.prefix_to(sys.transitions()[es.chain.front()].src), span);
  for (const auto& e : es.executions) {
    // Shared part up to the step taken, then the whole future after it.
    add_path(ctx, e, span);
  }
  for (auto c : es.chain) add_future(ctx, sys.transitions()[c].dst, span);
  for (auto d : es.delays) add_future(ctx, sys.transitions()[d].dst, span);
  add_future(ctx, sys.transitions()[es.base.beta].dst, span);
  return span;
}

bool separates(const EffectContext& ctx, const std::set<std::size_t>& span, std::size_t pivot) {
  std::unordered_map<StateId, StateId> ids;
  auto sub = sub_system(ctx, span, ids);
  auto p = signature_refinement(sub);
  const auto& t = ctx.system().transitions()[pivot];
  return !p.same(ids.at(t.src), ids.at(t.dst));
}

std::vector<std::size_t> system_critical(const EffectContext& ctx) {
  std::vector<std::size_t> out;
  for (const auto& t : ctx.system().transitions())
    if (ctx.system().internal(t.label) && ctx.cls(t.src) != ctx.cls(t.dst)) out.push_back(ctx.system().index_of(t));
  return out;
}

std::vector<std::size_t> sample(const std::vector<std::size_t>& all, std::size_t n) {
  if (n == 0 || all.size() <= n) return all;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(all[i * all.size() / n]);
  return out;
}

}  // namespace

CheckResult check_identification_exists(const EffectContext& ctx) {
  CheckResult r;
  r.name = "identification-exists";
  for (ClassId a = 0; a < ctx.num_classes(); ++a)
    for (const auto& [k, rr] : ctx.signature(a)) {
      if (k != EffectContext::kTau) continue;
      ++r.checked;
      bool found = false;
      for (const auto& [k2, q] : ctx.signature(a))
        if (!(k2 == k && q == rr) && class_identifies(ctx, rr, k2, q)) found = true;
      if (!found) violation(r, fmt::format("{} is identified by no effect step", class_step(ctx, a, k, rr)));
    }
  return r;
}

CheckResult check_dichotomy(const EffectContext& ctx) {
  CheckResult r;
  r.name = "independence-or-race";
  for (ClassId a = 0; a < ctx.num_classes(); ++a)
    for (const auto& [k, rr] : ctx.signature(a)) {
      if (k != EffectContext::kTau) continue;
      for (const auto& [k2, q] : ctx.signature(a)) {
        if ((k2 == k && q == rr) || !class_identifies(ctx, rr, k2, q)) continue;
        ++r.checked;
        if (class_witness(ctx, rr, k2, q)) continue;
        // Dependent for every class: must be a race, hence symmetric and internal.
        if (k2 != EffectContext::kTau) {
          violation(r, fmt::format("{} depends on visible {}", class_step(ctx, a, k, rr), class_step(ctx, a, k2, q)));
        } else if (!class_race(ctx, q, rr)) {
          violation(r, fmt::format("race {} / {} is not symmetric", class_step(ctx, a, k, rr), class_step(ctx, a, k2, q)));
        }
      }
    }
  return r;
}

CheckResult check_races_internal(const EffectContext& ctx, const std::vector<RacePair>& races) {
  CheckResult r;
  r.name = "races-internal";
  for (const auto& p : races) {
    ++r.checked;
    if (!p.alpha.internal || !p.beta.internal)
      violation(r, fmt::format("race at [{}] has a visible member", p.anchor));
  }
  for (ClassId a = 0; a < ctx.num_classes(); ++a)
    for (const auto& [k, rr] : ctx.signature(a)) {
      if (k != EffectContext::kTau) continue;
      for (const auto& [k2, q] : ctx.signature(a)) {
        if (k2 == EffectContext::kTau) continue;
        ++r.checked;
        if (class_identifies(ctx, rr, k2, q) && !class_witness(ctx, rr, k2, q))
          violation(r, fmt::format("{} races visible {}", class_step(ctx, a, k, rr), class_step(ctx, a, k2, q)));
      }
    }
  return r;
}

CheckResult check_critical_agreement(const EffectContext& ctx, const std::vector<RacePair>& races) {
  CheckResult r;
  r.name = "critical-step-agreement";
  // Class change on the original system versus quotient witnesses.
  auto direct = critical_steps(ctx);
  std::vector<std::size_t> lifted;
  const auto& q = ctx.quotient();
  for (std::size_t i = 0; i < q.lts.num_transitions(); ++i)
    if (q.lts.internal(q.lts.transitions()[i].label))
      lifted.insert(lifted.end(), q.witnesses[i].begin(), q.witnesses[i].end());
  std::sort(lifted.begin(), lifted.end());
  r.checked += direct.size();
  if (direct != lifted)
    violation(r, fmt::format("{} class-changing internal steps but {} quotient witnesses", direct.size(), lifted.size()));
  // Every critical step reaches a race structure.
  RaceIndex index(races);
  ChainResolver resolver(ctx, index);
  for (auto p : system_critical(ctx)) {
    ++r.checked;
    if (resolver.resolve(p) < 0) {
      const auto& t = ctx.system().transitions()[p];
      violation(r, fmt::format("critical step {} -{}-> {} reaches no race", t.src, ctx.system().label(t.label).str(), t.dst));
    }
  }
  // No stutter step is critical.
  for (const auto& t : ctx.system().transitions())
    if (ctx.system().internal(t.label) && ctx.cls(t.src) == ctx.cls(t.dst) &&
        index.find(ctx.cls(t.src), ctx.cls(t.dst)))
      violation(r, "a stutter step is listed as racing");
  return r;
}

CheckResult check_structure_separation(const EffectContext& ctx, const std::vector<RacePair>& races,
                                       std::size_t samples) {
  CheckResult r;
  r.name = "structure-separation";
  RaceIndex index(races);
  ChainResolver resolver(ctx, index);
  for (auto p : sample(system_critical(ctx), samples)) {
    auto es = build_structure(ctx, index, resolver, p);
    if (!es) continue;  // reported by the agreement check
    ++r.checked;
    if (!separates(ctx, structure_span(ctx, *es), p)) {
      const auto& t = ctx.system().transitions()[p];
      violation(r, fmt::format("effect structure of {} -{}-> {} does not separate its endpoints", t.src,
                               ctx.system().label(t.label).str(), t.dst));
    }
  }
  return r;
}

CheckResult check_intermediate_separation(const EffectContext& ctx, const std::vector<RacePair>& races,
                                          std::size_t samples, std::uint64_t seed) {
  CheckResult r;
  r.name = "intermediate-separation";
  RaceIndex index(races);
  ChainResolver resolver(ctx, index);
  std::mt19937_64 rng(seed);
  const auto& sys = ctx.system();
  for (auto p : sample(system_critical(ctx), samples)) {
    auto es = build_structure(ctx, index, resolver, p);
    if (!es) continue;
    auto span = structure_span(ctx, *es);
    // Widen with the whole future of a few states already in the span.
    std::vector<StateId> states;
    for (auto i : span) states.push_back(sys.transitions()[i].src);
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    for (int k = 0; k < 3 && !states.empty(); ++k)
      add_future(ctx, states[std::uniform_int_distribution<std::size_t>(0, states.size() - 1)(rng)], span);
    ++r.checked;
    if (!separates(ctx, span, p)) {
      const auto& t = sys.transitions()[p];
      violation(r, fmt::format("widened structure of {} -{}-> {} does not separate its endpoints", t.src,
                               sys.label(t.label).str(), t.dst));
    }
  }
  return r;
}

CheckResult check_quotient_paths(const EffectContext& ctx, std::size_t max_len, std::size_t max_paths) {
  CheckResult r;
  r.name = "quotient-paths";
  const auto& sys = ctx.system();
  const auto& q = ctx.quotient().lts;
  // Every concrete pivot appears in the quotient.
  for (const auto& t : sys.transitions()) {
    if (!sys.internal(t.label) || ctx.cls(t.src) == ctx.cls(t.dst)) continue;
    ++r.checked;
    bool found = false;
    for (const auto& u : q.out(ctx.cls(t.src)))
      if (q.internal(u.label) && u.dst == ctx.cls(t.dst)) found = true;
    if (!found) violation(r, fmt::format("pivot into [{}] from [{}] missing in the quotient", ctx.cls(t.dst), ctx.cls(t.src)));
  }
  // Every short internal quotient path is realized by effect steps.
  std::size_t paths = 0;
  std::vector<ClassId> path;
  std::function<void(const std::vector<StateId>&)> walk = [&](const std::vector<StateId>& frontier) {
    if (path.size() > max_len || paths >= max_paths) return;
    const ClassId here = path.back();
    std::vector<StateId> closure;
    std::unordered_set<StateId> seen;
    for (auto s : frontier)
      for (auto u : ctx.inert_closure(s))
        if (seen.insert(u).second) closure.push_back(u);
    for (const auto& e : q.out(here)) {
      if (!q.internal(e.label) || path.size() == max_len + 1) continue;
      std::vector<StateId> next;
      for (auto u : closure)
        for (const auto& t : sys.out(u))
          if (sys.internal(t.label) && ctx.cls(t.dst) == e.dst) next.push_back(t.dst);
      std::sort(next.begin(), next.end());
      next.erase(std::unique(next.begin(), next.end()), next.end());
      ++paths;
      ++r.checked;
      path.push_back(e.dst);
      if (next.empty()) {
        std::string p;
        for (auto c : path) p += fmt::format("{}[{}]", p.empty() ? "" : " ", c);
        violation(r, "quotient path not realized: " + p);
      } else if (path.size() <= max_len) {
        walk(next);
      }
      path.pop_back();
      if (paths >= max_paths) return;
    }
  };
  for (ClassId a = 0; a < ctx.num_classes() && paths < max_paths; ++a) {
    path.assign(1, a);
    walk({ctx.partition().members(a).front()});
  }
  return r;
}

CheckResult check_history_coverage(const EffectContext& ctx, const std::vector<RacePair>& races,
                                   HistoryPairing pairing, std::size_t max_histories) {
  CheckResult r;
  r.name = "history-coverage";
  std::set<std::pair<ClassId, ClassId>> race_edges;
  for (const auto& p : races) {
    race_edges.emplace(p.anchor, p.left);
    race_edges.emplace(p.anchor, p.right);
  }
  const auto& sys = ctx.system();
  using Node = std::vector<std::pair<ClassId, bool>>;
  auto close = [&](Node n) {
    std::set<std::pair<ClassId, bool>> seen(n.begin(), n.end());
    for (std::size_t i = 0; i < n.size(); ++i) {
      auto [c, f] = n[i];
      for (const auto& [k, b] : ctx.signature(c)) {
        if (k != EffectContext::kTau) continue;
        std::pair<ClassId, bool> nx{b, f || race_edges.count({c, b}) > 0};
        if (seen.insert(nx).second) n.push_back(nx);
      }
    }
    return Node(seen.begin(), seen.end());
  };
  struct Entry {
    std::string returns;
    bool covered;
  };
  std::map<std::string, std::map<std::string, Entry>> groups;  // skeleton -> history -> entry
  std::size_t histories = 0;
  bool truncated = false;
  History h;
  std::function<void(const Node&)> walk = [&](const Node& node) {
    if (truncated) return;
    bool sink = false, covered = false;
    for (auto [c, f] : node)
      if (ctx.signature(c).empty()) {
        sink = true;
        covered = covered || f;
      }
    if (sink && h.complete()) {
      if (++histories > max_histories) {
        truncated = true;
        return;
      }
      std::string ck, rk;
      if (pairing == HistoryPairing::Interleaving) {
        for (const auto& e : h.events) {
          if (e.kind == ActionKind::Ret) {
            ck += fmt::format("t{} ret {};", e.thread, e.method);
            rk += e.value + ";";
          } else {
            ck += e.str() + ";";
          }
        }
      } else {
        std::map<int, std::string> calls, rets;
        for (const auto& e : h.events) (e.kind == ActionKind::Call ? calls : rets)[e.thread] += e.str() + ";";
        for (const auto& [t, c] : calls) ck += c + "|";
        for (const auto& [t, c] : rets) rk += c + "|";
      }
      auto& entry = groups[ck][h.str()];
      entry.returns = rk;
      entry.covered = entry.covered || covered;
    }
    std::map<std::uint32_t, Node> next;
    for (auto [c, f] : node)
      for (const auto& [k, b] : ctx.signature(c))
        if (k != EffectContext::kTau) next[k].emplace_back(b, f);
    for (auto& [k, n] : next) {
      h.events.push_back(sys.label(k));
      walk(close(n));
      h.events.pop_back();
    }
  };
  walk(close({{ctx.cls(sys.initial()), false}}));
  if (truncated) {
    r.skipped = true;
    r.witness = fmt::format("more than {} completed histories", max_histories);
    return r;
  }
  for (const auto& [ck, members] : groups) {
    std::set<std::string> rets;
    for (const auto& [hs, e] : members) rets.insert(e.returns);
    if (rets.size() < 2) continue;
    for (const auto& [hs, e] : members) {
      ++r.checked;
      if (!e.covered) violation(r, "history on no race execution: " + hs);
    }
  }
  return r;
}

CheckResult check_race_embedding(const EffectContext& small, const std::vector<RacePair>& small_races,
                                 const EffectContext& large, const std::vector<RacePair>& large_races) {
  CheckResult r;
  r.name = "race-embedding";
  const auto& a = small.original();
  const auto& b = large.original();
  std::unordered_map<Action, LabelId, ActionHash> labels;
  for (LabelId l = 0; l < b.labels().size(); ++l) labels.emplace(b.label(l), l);
  std::vector<StateId> phi(a.num_states(), kUnset);
  phi[a.initial()] = b.initial();
  std::vector<StateId> queue{a.initial()};
  for (std::size_t i = 0; i < queue.size(); ++i) {
    StateId s = queue[i];
    for (const auto& t : a.out(s)) {
      auto it = labels.find(a.label(t.label));
      std::optional<StateId> dst;
      if (it != labels.end())
        for (const auto& u : b.out(phi[s]))
          if (u.label == it->second) dst = u.dst;
      if (!dst)
        throw std::invalid_argument(
            fmt::format("smaller system does not embed: no {} from state {}", a.label(t.label).str(), phi[s]));
      if (phi[t.dst] == kUnset) {
        phi[t.dst] = *dst;
        queue.push_back(t.dst);
      }
    }
  }
  // One original member per collapsed state of the small system.
  std::vector<StateId> member(small.system().num_states(), kUnset);
  for (StateId s = 0; s < a.num_states(); ++s)
    if (member[small.to_system(s)] == kUnset) member[small.to_system(s)] = s;
  RaceIndex large_index(large_races);
  std::map<StateId, std::set<std::pair<std::string, std::string>>> large_cache;
  auto large_pairs = [&](StateId u) -> const std::set<std::pair<std::string, std::string>>& {
    auto it = large_cache.find(u);
    if (it != large_cache.end()) return it->second;
    std::set<std::pair<std::string, std::string>> out;
    auto labels_here = direct_pivots(large, u);
    for (const auto& [c1, l1] : labels_here) {
      const auto* partners = large_index.find(large.cls(u), c1);
      if (!partners) continue;
      for (const auto& [c2, l2] : labels_here)
        if (std::find(partners->begin(), partners->end(), c2) != partners->end())
          out.emplace(large.system().label(l1).str(), large.system().label(l2).str());
    }
    return large_cache[u] = std::move(out);
  };
  for (const auto& race : small_races)
    for (StateId s : small.partition().members(race.anchor)) {
      auto here = direct_pivots(small, s);
      const StateId u = large.to_system(phi[member[s]]);
      for (const auto& [c1, l1] : here) {
        if (c1 != race.left) continue;
        for (const auto& [c2, l2] : here) {
          if (c2 != race.right) continue;
          ++r.checked;
          auto x = small.system().label(l1).str(), y = small.system().label(l2).str();
          const auto& found = large_pairs(u);
          if (!found.count({x, y}) && !found.count({y, x}))
            violation(r, fmt::format("race {} / {} at small state {} lost in the larger system", x, y, s));
        }
      }
    }
  return r;
}

std::optional<std::string> non_transitive_witness(const EffectContext& ctx, const std::vector<RacePair>& races) {
  std::map<ClassId, std::set<std::pair<ClassId, ClassId>>> by_anchor;
  for (const auto& p : races) {
    by_anchor[p.anchor].emplace(p.left, p.right);
    by_anchor[p.anchor].emplace(p.right, p.left);
  }
  (void)ctx;
  for (const auto& [a, rel] : by_anchor)
    for (const auto& [x, y] : rel)
      for (const auto& [y2, z] : rel)
        if (y2 == y && z != x && !rel.count({x, z}))
          return fmt::format("at [{}]: [{}] races [{}] and [{}] races [{}], but [{}] does not race [{}]", a, x, y, y, z,
                             x, z);
  return std::nullopt;
}

// ---------------------------------------------------------------- LPs

namespace {

// Index of the visible event count before step `pos` of a path.
std::size_t visible_before(const Lts& lts, const Path& p, std::size_t pos) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < pos; ++i) n += lts.label(p.steps[i].first).visible();
  return n;
}

// Step index of the pivot transition in an execution built by structure_at.
std::size_t pivot_position(const EffectContext& ctx, const Path& p, std::size_t pivot) {
  const auto& t = ctx.system().transitions()[pivot];
  StateId u = p.start;
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    if (u == t.src && p.steps[i] == std::pair{t.label, t.dst}) return i;
    u = p.steps[i].second;
  }
  throw std::logic_error("pivot is not on its execution");
}

// Operation of `thread` open at event position `events` (the last call before it).
std::optional<std::size_t> open_operation(const std::vector<Operation>& ops, int thread, std::size_t events) {
  std::optional<std::size_t> out;
  for (std::size_t i = 0; i < ops.size(); ++i)
    if (ops[i].thread == thread && ops[i].call_index < events) out = i;
  return out;
}

std::vector<std::pair<int, int>> op_ids(const std::vector<Operation>& ops) {
  std::vector<std::pair<int, int>> out;
  std::map<int, int> seen;
  for (const auto& o : ops) out.emplace_back(o.thread, seen[o.thread]++);
  return out;
}

}  // namespace

std::vector<LpAttribution> detect_lps(const EffectContext& ctx, const std::vector<RacePair>& races,
                                      const SequentialSpec& spec) {
  std::vector<LpAttribution> out;
  std::set<std::string> seen;
  const auto& sys = ctx.system();
  for (std::size_t ri = 0; ri < races.size(); ++ri) {
    auto rs = race_structure(ctx, races[ri]);
    const auto& la = sys.label(sys.transitions()[rs.alpha].label);
    const auto& lb = sys.label(sys.transitions()[rs.beta].label);
    if (la.thread == lb.thread) continue;
    auto hs = history_of(sys, rs.sigma), hr = history_of(sys, rs.rho);
    if (!hs.complete() || !hr.complete()) continue;
    auto ops_s = operations(hs), ops_r = operations(hr);
    auto ids_s = op_ids(ops_s), ids_r = op_ids(ops_r);
    const auto va = visible_before(sys, rs.sigma, pivot_position(ctx, rs.sigma, rs.alpha));
    const auto vb = visible_before(sys, rs.rho, pivot_position(ctx, rs.rho, rs.beta));
    auto ea = open_operation(ops_s, la.thread, va);
    auto eb = open_operation(ops_r, lb.thread, vb);
    if (!ea || !eb) continue;
    auto orders_s = linearization_orders(hs, spec, 5000);
    auto orders_r = linearization_orders(hr, spec, 5000);
    bool found = false;
    for (const auto& o1 : orders_s) {
      auto pos = std::find(o1.begin(), o1.end(), *ea) - o1.begin();
      // Prefix operations, as identities in rho, all returned before both steps.
      std::vector<std::size_t> prefix_r;
      bool ok = true;
      for (long k = 0; k < pos && ok; ++k) {
        const auto& op = ops_s[o1[static_cast<std::size_t>(k)]];
        if (*op.ret_index >= va) ok = false;
        auto it = std::find(ids_r.begin(), ids_r.end(), ids_s[o1[static_cast<std::size_t>(k)]]);
        if (!ok || it == ids_r.end()) {
          ok = false;
          break;
        }
        auto j = static_cast<std::size_t>(it - ids_r.begin());
        const auto& other = ops_r[j];
        if (other.method != op.method || other.arg != op.arg || other.result != op.result || *other.ret_index >= vb)
          ok = false;
        prefix_r.push_back(j);
      }
      if (!ok) continue;
      for (const auto& o2 : orders_r) {
        if (o2.size() <= prefix_r.size() || !std::equal(prefix_r.begin(), prefix_r.end(), o2.begin())) continue;
        if (o2[prefix_r.size()] != *eb) continue;
        found = true;
        break;
      }
      if (found) break;
    }
    if (!found) continue;
    auto add = [&](const Action& step, const Operation& op, const History& h) {
      LpAttribution a{step.base_tag(), step.str(), op, h.str(), ri};
      auto k = a.step + "|" + op.str() + "|" + a.history;
      if (seen.insert(k).second) out.push_back(std::move(a));
    };
    add(la, ops_s[*ea], hs);
    add(lb, ops_r[*eb], hr);
  }
  return out;
}

std::vector<LpClass> classify_lps(const EffectContext& ctx) {
  const auto& sys = ctx.system();
  int threads = 0;
  for (const auto& a : sys.labels()) threads = std::max(threads, a.thread);
  const auto n = sys.num_states();
  const auto k = static_cast<std::size_t>(threads + 1);
  std::vector<int> f(n * k, -1);
  for (std::size_t t = 0; t < k; ++t) f[sys.initial() * k + t] = 0;
  std::map<std::string, std::size_t> most;
  for (StateId s : ctx.topological_order()) {
    for (const auto& tr : sys.out(s)) {
      const auto& a = sys.label(tr.label);
      for (std::size_t t = 0; t < k; ++t) {
        int v = f[s * k + t];
        if (v < 0) continue;
        if (a.thread == static_cast<int>(t)) {
          if (a.kind == ActionKind::Call) {
            v = 0;
          } else if (a.kind == ActionKind::Ret) {
            auto& m = most[a.method];
            m = std::max(m, static_cast<std::size_t>(v));
            v = 0;
          } else if (a.internal() && ctx.cls(tr.src) != ctx.cls(tr.dst)) {
            ++v;
          }
        }
        auto& d = f[tr.dst * k + t];
        d = std::max(d, v);
      }
    }
  }
  std::vector<LpClass> out;
  for (const auto& [m, c] : most) out.push_back({m, c, c <= 1});
  return out;
}

std::vector<ClassId> shared_effect_targets(const EffectContext& ctx, const std::string& tag) {
  std::map<ClassId, std::set<int>> threads;
  const auto& sys = ctx.system();
  for (const auto& t : sys.transitions()) {
    const auto& a = sys.label(t.label);
    if (a.internal() && a.base_tag() == tag && ctx.cls(t.src) != ctx.cls(t.dst)) threads[ctx.cls(t.dst)].insert(a.thread);
  }
  std::vector<ClassId> out;
  for (const auto& [c, ts] : threads)
    if (ts.size() >= 2) out.push_back(c);
  return out;
}

}  // namespace effrace
