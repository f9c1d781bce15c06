#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "bisim_internal.hpp"
#include "effrace/bisim.hpp"

namespace effrace {

namespace detail {

void compute_signature(const Lts& lts, StateId s, const std::vector<std::uint32_t>& block,
                       const std::vector<Signature>& sigs, Signature& out) {
  out.clear();
  for (const auto& t : lts.out(s)) {
    if (lts.internal(t.label) && block[t.dst] == block[s]) {
      const auto& inner = sigs[t.dst];
      out.insert(out.end(), inner.begin(), inner.end());
    } else {
      out.push_back(sig_entry(label_key(lts, t.label), block[t.dst]));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

namespace {

struct KeyHash {
  std::size_t operator()(const std::pair<std::uint32_t, const Signature*>& k) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ k.first;
    for (auto v : *k.second) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

struct KeyEq {
  bool operator()(const std::pair<std::uint32_t, const Signature*>& a,
                  const std::pair<std::uint32_t, const Signature*>& b) const noexcept {
    return a.first == b.first && *a.second == *b.second;
  }
};

}  // namespace

std::uint32_t renumber_blocks(const std::vector<std::uint32_t>& block, const std::vector<Signature>& sigs,
                              std::vector<std::uint32_t>& next) {
  std::unordered_map<std::pair<std::uint32_t, const Signature*>, std::uint32_t, KeyHash, KeyEq> ids;
  ids.reserve(block.size());
  next.resize(block.size());
  for (StateId s = 0; s < block.size(); ++s) {
    auto [it, inserted] = ids.try_emplace({block[s], &sigs[s]}, static_cast<std::uint32_t>(ids.size()));
    next[s] = it->second;
  }
  return static_cast<std::uint32_t>(ids.size());
}

}  // namespace detail

const char* to_string(BisimAlgorithm a) {
  switch (a) {
    case BisimAlgorithm::Signature:
      return "signature";
    case BisimAlgorithm::SignatureParallel:
      return "signature-omp";
    case BisimAlgorithm::Splitter:
      return "splitter";
  }
  return "?";
}

Partition Partition::single(std::size_t n) { return from_keys(std::vector<int>(n, 0)); }

Partition Partition::identity(std::size_t n) {
  std::vector<std::size_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = i;
  return from_keys(keys);
}

bool Partition::refines(const Partition& coarser) const {
  if (coarser.num_states() != num_states()) return false;
  for (const auto& c : classes_)
    for (auto s : c)
      if (coarser.class_of(s) != coarser.class_of(c.front())) return false;
  return true;
}

Partition signature_refinement(const Lts& lts) {
  const std::size_t n = lts.num_states();
  auto order = tau_topological_order(lts);
  std::reverse(order.begin(), order.end());
  std::vector<std::uint32_t> block(n, 0), next;
  std::vector<detail::Signature> sigs(n);
  std::uint32_t count = 1;
  for (;;) {
    for (auto s : order) detail::compute_signature(lts, s, block, sigs, sigs[s]);
    auto fresh = detail::renumber_blocks(block, sigs, next);
    block.swap(next);
    if (fresh == count) break;
    count = fresh;
  }
  return Partition::from_keys(block);
}

Partition branching_partition(const Lts& lts, BisimAlgorithm algorithm) {
  auto col = collapse_tau_sccs(lts);
  Partition inner;
  switch (algorithm) {
    case BisimAlgorithm::Signature:
      inner = signature_refinement(col.lts);
      break;
    case BisimAlgorithm::SignatureParallel:
      inner = signature_refinement_parallel(col.lts);
      break;
    case BisimAlgorithm::Splitter:
      inner = splitter_refinement(col.lts);
      break;
  }
  std::vector<ClassId> keys(lts.num_states());
  for (StateId s = 0; s < lts.num_states(); ++s) keys[s] = inner.class_of(col.state_map[s]);
  return Partition::from_keys(keys);
}

bool is_stable(const Lts& lts, const Partition& p) {
  if (p.num_states() != lts.num_states()) throw std::invalid_argument("partition is over a different state set");
  auto col = collapse_tau_sccs(lts);
  std::vector<std::uint32_t> block(col.lts.num_states());
  std::vector<bool> set(col.lts.num_states(), false);
  for (StateId s = 0; s < lts.num_states(); ++s) {
    auto c = col.state_map[s];
    if (set[c] && block[c] != p.class_of(s)) return false;  // an internal cycle spans two classes
    block[c] = p.class_of(s);
    set[c] = true;
  }
  auto order = tau_topological_order(col.lts);
  std::reverse(order.begin(), order.end());
  std::vector<detail::Signature> sigs(col.lts.num_states());
  for (auto s : order) detail::compute_signature(col.lts, s, block, sigs, sigs[s]);
  std::vector<std::uint32_t> next;
  auto fresh = detail::renumber_blocks(block, sigs, next);
  std::uint32_t old = 0;
  for (auto b : block) old = std::max(old, b + 1);
  // Classes with no member in the collapsed system cannot exist.
  return fresh == old;
}

QuotientLts quotient(const Lts& lts, const Partition& p) {
  if (p.num_states() != lts.num_states())
    throw std::invalid_argument(
        fmt::format("partition covers {} states, the system has {}", p.num_states(), lts.num_states()));
  LtsBuilder b(p.num_classes());
  const auto tau = b.intern(Action::tau(0, ""));
  std::map<Transition, std::vector<std::size_t>, decltype([](const Transition& x, const Transition& y) {
             return std::tie(x.src, x.label, x.dst) < std::tie(y.src, y.label, y.dst);
           })>
      lifted;
  std::vector<Transition> order;
  const auto all = lts.transitions();
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& t = all[i];
    auto cs = p.class_of(t.src), cd = p.class_of(t.dst);
    Transition q;
    if (lts.internal(t.label)) {
      if (cs == cd) continue;
      q = {cs, tau, cd};
    } else {
      q = {cs, b.intern(lts.label(t.label)), cd};
    }
    auto [it, inserted] = lifted.try_emplace(q);
    if (inserted) order.push_back(q);
    it->second.push_back(i);
  }
  // Builder keeps insertion order within a source; sort for a canonical layout.
  std::stable_sort(order.begin(), order.end(), [](const Transition& x, const Transition& y) { return x.src < y.src; });
  for (const auto& q : order) b.add(q.src, q.label, q.dst);
  QuotientLts out{std::move(b).build(p.class_of(lts.initial())), p, {}};
  out.witnesses.reserve(order.size());
  for (const auto& q : out.lts.transitions()) out.witnesses.push_back(lifted.at(q));
  return out;
}

bool is_stutter(const Lts& lts, const Partition& p, const Transition& t) {
  if (!lts.internal(t.label)) throw std::invalid_argument("stutter is defined on internal transitions only");
  return p.same(t.src, t.dst);
}

}  // namespace effrace
