#include "effrace/ktrace.hpp"

#include <algorithm>
#include <cstdlib>
#include <fmt/format.h>
#include <map>
#include <unordered_map>

namespace effrace {

std::size_t oracle_state_bound() {
  if (const char* env = std::getenv("EFFRACE_ORACLE_MAX_STATES")) {
    char* end = nullptr;
    auto v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 64;
}

namespace {

void check_input(const Lts& lts) {
  if (lts.num_states() > oracle_state_bound())
    throw OracleRefused(fmt::format("oracle refuses {} states (bound {}; set EFFRACE_ORACLE_MAX_STATES to raise it)",
                                    lts.num_states(), oracle_state_bound()));
  if (!acyclic(lts)) throw OracleRefused("oracle needs an acyclic transition system");
}

// Hash-consed traces: a trace is either a single class or
// (class, action, rest). Equal traces get equal ids.
class TraceTable {
 public:
  std::uint32_t leaf(std::uint32_t cls) { return intern({cls, kNone, kNone}); }
  std::uint32_t cons(std::uint32_t cls, std::uint32_t action, std::uint32_t rest) {
    return intern({cls, action, rest});
  }
  std::uint32_t head(std::uint32_t id) const { return nodes_[id].cls; }

 private:
  static constexpr std::uint32_t kNone = ~0u;
  struct Node {
    std::uint32_t cls, action, rest;
    bool operator==(const Node&) const = default;
  };
  struct NodeHash {
    std::size_t operator()(const Node& n) const noexcept {
      std::uint64_t h = n.cls;
      h = h * 0x100000001b3ULL ^ n.action;
      h = h * 0x100000001b3ULL ^ n.rest;
      return static_cast<std::size_t>(h ^ (h >> 29));
    }
  };
  std::uint32_t intern(Node n) {
    auto [it, inserted] = index_.try_emplace(n, static_cast<std::uint32_t>(nodes_.size()));
    if (inserted) nodes_.push_back(n);
    return it->second;
  }
  std::vector<Node> nodes_;
  std::unordered_map<Node, std::uint32_t, NodeHash> index_;
};

}  // namespace

Partition ktrace_step(const Lts& lts, const Partition& previous) {
  check_input(lts);
  const std::size_t n = lts.num_states();
  // Actions compare structurally; every internal label is the same action.
  std::vector<std::uint32_t> action_id(lts.labels().size());
  constexpr std::uint32_t kTau = 0;
  {
    std::map<std::string, std::uint32_t> ids;
    for (LabelId l = 0; l < lts.labels().size(); ++l) {
      if (lts.internal(l)) {
        action_id[l] = kTau;
      } else {
        auto [it, ins] = ids.try_emplace(lts.label(l).str(), static_cast<std::uint32_t>(ids.size() + 1));
        action_id[l] = it->second;
      }
    }
  }
  // Reverse topological order over all transitions.
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& t : lts.transitions()) ++indeg[t.dst];
  std::vector<StateId> order;
  for (StateId s = 0; s < n; ++s)
    if (indeg[s] == 0) order.push_back(s);
  for (std::size_t i = 0; i < order.size(); ++i)
    for (const auto& t : lts.out(order[i]))
      if (--indeg[t.dst] == 0) order.push_back(t.dst);

  TraceTable table;
  std::vector<std::vector<std::uint32_t>> traces(n);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const StateId s = *it;
    const auto c = previous.class_of(s);
    auto& set = traces[s];
    set.push_back(table.leaf(c));
    for (const auto& t : lts.out(s)) {
      const auto a = action_id[t.label];
      for (auto w : traces[t.dst]) {
        // A τ step between equal classes is absorbed into the run.
        if (a == kTau && table.head(w) == c) {
          set.push_back(w);
        } else {
          set.push_back(table.cons(c, a, w));
        }
      }
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
  }
  return Partition::from_keys(traces);
}

KTracePartition ktrace_partition(const Lts& lts, std::size_t k) {
  check_input(lts);
  Partition p = Partition::single(lts.num_states());
  for (std::size_t i = 0; i < k; ++i) p = ktrace_step(lts, p);
  return {k, std::move(p)};
}

MaxTraceResult max_trace_partition(const Lts& lts) {
  check_input(lts);
  Partition p = Partition::single(lts.num_states());
  std::size_t k = 0;
  for (;;) {
    auto next = ktrace_step(lts, p);
    if (next == p) return {std::move(p), k};
    p = std::move(next);
    ++k;
  }
}

Lts random_dag(std::mt19937_64& rng, const RandomLtsParams& params) {
  const std::size_t n = std::max<std::size_t>(1, params.states);
  LtsBuilder b(n);
  std::vector<LabelId> visible;
  for (std::size_t i = 0; i < params.visible_labels; ++i)
    visible.push_back(b.intern(Action::other(std::string(1, static_cast<char>('a' + i)))));
  const auto tau = b.intern(Action::tau(1, "x"));
  std::uniform_int_distribution<std::size_t> degree(0, params.max_out_degree);
  std::bernoulli_distribution is_tau(visible.empty() ? 1.0 : params.tau_probability);
  for (StateId s = 0; s + 1 < n; ++s) {
    const auto hi = std::min<std::size_t>(n - 1, s + std::max<std::size_t>(1, params.locality));
    std::uniform_int_distribution<std::size_t> target(s + 1, hi);
    const auto d = degree(rng);
    for (std::size_t e = 0; e < d; ++e) {
      LabelId l = tau;
      if (!is_tau(rng)) {
        std::uniform_int_distribution<std::size_t> pick(0, visible.size() - 1);
        l = visible[pick(rng)];
      }
      b.add(s, l, static_cast<StateId>(target(rng)));
    }
  }
  return std::move(b).build(0);
}

namespace {

OracleRun one_run(std::uint64_t seed, const RandomLtsParams& params, BisimAlgorithm algorithm) {
  std::mt19937_64 rng(seed);
  auto sized = params;
  sized.states = std::uniform_int_distribution<std::size_t>(1, std::max<std::size_t>(1, params.states))(rng);
  auto lts = random_dag(rng, sized);
  auto bisim = branching_partition(lts, algorithm);
  auto oracle = max_trace_partition(lts);
  return {seed, lts.num_states(), bisim.num_classes(), oracle.cap, bisim == oracle.partition};
}

}  // namespace

std::vector<OracleRun> oracle_agreement(std::uint64_t seed, std::size_t runs, const RandomLtsParams& params,
                                        BisimAlgorithm algorithm) {
  std::vector<OracleRun> out(runs);
  const auto m = static_cast<std::ptrdiff_t>(runs);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < m; ++i)
    out[static_cast<std::size_t>(i)] = one_run(seed + static_cast<std::uint64_t>(i), params, algorithm);
  return out;
}

std::vector<OracleRun> oracle_agreement_serial(std::uint64_t seed, std::size_t runs, const RandomLtsParams& params,
                                               BisimAlgorithm algorithm) {
  std::vector<OracleRun> out;
  out.reserve(runs);
  for (std::size_t i = 0; i < runs; ++i) out.push_back(one_run(seed + i, params, algorithm));
  return out;
}

}  // namespace effrace
