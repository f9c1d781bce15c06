#include "effrace/lts.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <functional>
#include <numeric>

namespace effrace {

Action Action::call(int thread, std::string method, std::string args) {
  return {ActionKind::Call, thread, std::move(method), std::move(args), {}};
}

Action Action::ret(int thread, std::string method, std::string result) {
  return {ActionKind::Ret, thread, std::move(method), std::move(result), {}};
}

Action Action::tau(int thread, std::string tag) {
  return {ActionKind::Tau, thread, {}, {}, std::move(tag)};
}

Action Action::other(std::string text) { return {ActionKind::Other, 0, std::move(text), {}, {}}; }

std::string Action::base_tag() const {
  auto colon = tag.find(':');
  return colon == std::string::npos ? tag : tag.substr(0, colon);
}

std::string Action::str() const {
  switch (kind) {
    case ActionKind::Call:
      return fmt::format("t{} call {}({})", thread, method, value);
    case ActionKind::Ret:
      if (value.empty()) return fmt::format("t{} ret {}", thread, method);
      return fmt::format("t{} ret({}) {}", thread, value, method);
    case ActionKind::Tau:
      if (tag.empty()) return thread ? fmt::format("t{}.tau", thread) : "tau";
      return fmt::format("t{}.{}", thread, tag);
    case ActionKind::Other:
      return method;
  }
  return {};
}

std::size_t ActionHash::operator()(const Action& a) const noexcept {
  std::size_t h = std::hash<int>{}(static_cast<int>(a.kind) * 131 + a.thread);
  auto mix = [&h](const std::string& s) { h ^= std::hash<std::string>{}(s) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
  mix(a.method);
  mix(a.value);
  mix(a.tag);
  return h;
}

std::size_t Lts::num_internal_transitions() const {
  return static_cast<std::size_t>(std::count_if(transitions_.begin(), transitions_.end(),
                                                [this](const Transition& t) { return internal(t.label); }));
}

std::optional<LabelId> Lts::find_label(const Action& a) const {
  for (LabelId i = 0; i < labels_.size(); ++i)
    if (labels_[i] == a) return i;
  return std::nullopt;
}

std::size_t Lts::num_reachable() const {
  return static_cast<std::size_t>(std::count(reachable_.begin(), reachable_.end(), true));
}

void Lts::set_payload(std::vector<std::string> p) {
  if (!p.empty() && p.size() != num_states_) throw LtsError("payload size does not match state count");
  payload_ = std::move(p);
}

LabelId LtsBuilder::intern(const Action& a) {
  auto [it, inserted] = index_.try_emplace(a, static_cast<LabelId>(labels_.size()));
  if (inserted) labels_.push_back(a);
  return it->second;
}

Lts LtsBuilder::build(StateId initial) && {
  if (num_states_ == 0) num_states_ = 1;
  if (initial >= num_states_) throw LtsError(fmt::format("initial state {} is not a state", initial));
  for (const auto& t : pending_) {
    if (t.src >= num_states_ || t.dst >= num_states_) {
      throw LtsError(fmt::format("dangling transition ({}, \"{}\", {}): state count is {}", t.src,
                                 labels_[t.label].str(), t.dst, num_states_));
    }
  }
  Lts lts;
  lts.num_states_ = num_states_;
  lts.initial_ = initial;
  lts.labels_ = std::move(labels_);

  // Counting sort by source keeps insertion order within a source.
  std::vector<std::size_t> count(num_states_ + 1, 0);
  for (const auto& t : pending_) ++count[t.src + 1];
  std::partial_sum(count.begin(), count.end(), count.begin());
  std::vector<Transition> sorted(pending_.size());
  {
    auto pos = count;
    for (const auto& t : pending_) sorted[pos[t.src]++] = t;
  }
  // Merge duplicates within each source group.
  lts.offsets_.assign(num_states_ + 1, 0);
  lts.transitions_.reserve(sorted.size());
  for (std::size_t s = 0; s < num_states_; ++s) {
    auto first = lts.transitions_.size();
    for (std::size_t i = count[s]; i < count[s + 1]; ++i) {
      const auto& t = sorted[i];
      bool dup = std::any_of(lts.transitions_.begin() + static_cast<std::ptrdiff_t>(first), lts.transitions_.end(),
                             [&t](const Transition& u) { return u == t; });
      if (!dup) lts.transitions_.push_back(t);
    }
    lts.offsets_[s + 1] = lts.transitions_.size();
  }

  lts.reachable_.assign(num_states_, false);
  std::vector<StateId> stack{initial};
  lts.reachable_[initial] = true;
  while (!stack.empty()) {
    StateId s = stack.back();
    stack.pop_back();
    for (const auto& t : lts.out(s)) {
      if (!lts.reachable_[t.dst]) {
        lts.reachable_[t.dst] = true;
        stack.push_back(t.dst);
      }
    }
  }
  return lts;
}

Lts build_lts(std::span<const std::tuple<StateId, Action, StateId>> transitions, StateId initial,
              std::size_t num_states) {
  std::size_t n = std::max<std::size_t>(num_states, initial + 1);
  for (const auto& [src, a, dst] : transitions) n = std::max<std::size_t>(n, std::max(src, dst) + 1);
  LtsBuilder b(n);
  for (const auto& [src, a, dst] : transitions) b.add(src, a, dst);
  return std::move(b).build(initial);
}

namespace {

// Iterative Tarjan over the internal-transition graph.
std::vector<std::uint32_t> tau_scc_ids(const Lts& lts, std::size_t& num_sccs) {
  const std::size_t n = lts.num_states();
  constexpr std::uint32_t kUnset = ~0u;
  std::vector<std::uint32_t> index(n, kUnset), low(n, 0), comp(n, kUnset);
  std::vector<bool> on_stack(n, false);
  std::vector<StateId> stack;
  struct Frame {
    StateId s;
    std::size_t next;
  };
  std::vector<Frame> call;
  std::uint32_t counter = 0;
  num_sccs = 0;
  for (StateId root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      auto& f = call.back();
      auto out = lts.out(f.s);
      bool descended = false;
      while (f.next < out.size()) {
        const auto& t = out[f.next++];
        if (!lts.internal(t.label)) continue;
        if (index[t.dst] == kUnset) {
          index[t.dst] = low[t.dst] = counter++;
          stack.push_back(t.dst);
          on_stack[t.dst] = true;
          call.push_back({t.dst, 0});
          descended = true;
          break;
        }
        if (on_stack[t.dst]) low[f.s] = std::min(low[f.s], index[t.dst]);
      }
      if (descended) continue;
      StateId s = f.s;
      call.pop_back();
      if (!call.empty()) low[call.back().s] = std::min(low[call.back().s], low[s]);
      if (low[s] == index[s]) {
        StateId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = static_cast<std::uint32_t>(num_sccs);
        } while (w != s);
        ++num_sccs;
      }
    }
  }
  return comp;
}

}  // namespace

Collapsed collapse_tau_sccs(const Lts& lts) {
  std::size_t num_sccs = 0;
  auto comp = tau_scc_ids(lts, num_sccs);
  // Renumber components by smallest member.
  constexpr StateId kUnset = ~0u;
  std::vector<StateId> renum(num_sccs, kUnset);
  StateId next = 0;
  std::vector<StateId> map(lts.num_states());
  for (StateId s = 0; s < lts.num_states(); ++s) {
    auto& r = renum[comp[s]];
    if (r == kUnset) r = next++;
    map[s] = r;
  }
  LtsBuilder b(next);
  for (const auto& a : lts.labels()) b.intern(a);
  for (const auto& t : lts.transitions()) {
    if (lts.internal(t.label) && map[t.src] == map[t.dst]) continue;
    b.add(map[t.src], t.label, map[t.dst]);
  }
  return {std::move(b).build(map[lts.initial()]), std::move(map)};
}

Lts reachable_part(const Lts& lts) {
  constexpr StateId kUnset = ~0u;
  std::vector<StateId> map(lts.num_states(), kUnset);
  StateId next = 0;
  for (StateId s = 0; s < lts.num_states(); ++s)
    if (lts.reachable()[s]) map[s] = next++;
  LtsBuilder b(next);
  for (const auto& a : lts.labels()) b.intern(a);
  for (const auto& t : lts.transitions())
    if (map[t.src] != kUnset) b.add(map[t.src], t.label, map[t.dst]);
  return std::move(b).build(map[lts.initial()]);
}

bool tau_acyclic(const Lts& lts) {
  std::size_t num_sccs = 0;
  tau_scc_ids(lts, num_sccs);
  if (num_sccs != lts.num_states()) return false;
  return std::none_of(lts.transitions().begin(), lts.transitions().end(),
                      [&lts](const Transition& t) { return lts.internal(t.label) && t.src == t.dst; });
}

bool acyclic(const Lts& lts) {
  const std::size_t n = lts.num_states();
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& t : lts.transitions()) ++indeg[t.dst];
  std::vector<StateId> ready;
  for (StateId s = 0; s < n; ++s)
    if (indeg[s] == 0) ready.push_back(s);
  std::size_t seen = 0;
  while (!ready.empty()) {
    StateId s = ready.back();
    ready.pop_back();
    ++seen;
    for (const auto& t : lts.out(s))
      if (--indeg[t.dst] == 0) ready.push_back(t.dst);
  }
  return seen == n;
}

std::vector<StateId> tau_topological_order(const Lts& lts) {
  const std::size_t n = lts.num_states();
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& t : lts.transitions())
    if (lts.internal(t.label)) ++indeg[t.dst];
  std::vector<StateId> order;
  order.reserve(n);
  for (StateId s = 0; s < n; ++s)
    if (indeg[s] == 0) order.push_back(s);
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (const auto& t : lts.out(order[i]))
      if (lts.internal(t.label) && --indeg[t.dst] == 0) order.push_back(t.dst);
  }
  if (order.size() != n) throw LtsError("internal transitions contain a cycle");
  return order;
}

}  // namespace effrace
