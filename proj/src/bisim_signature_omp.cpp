#include <algorithm>

#include "bisim_internal.hpp"
#include "effrace/bisim.hpp"

namespace effrace {

namespace {

// States grouped by height in the internal-transition DAG. A state's
// internal successors all sit in strictly lower levels.
std::vector<std::vector<StateId>> tau_levels(const Lts& lts) {
  auto order = tau_topological_order(lts);
  std::vector<std::uint32_t> height(lts.num_states(), 0);
  std::uint32_t top = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    std::uint32_t h = 0;
    for (const auto& t : lts.out(*it))
      if (lts.internal(t.label)) h = std::max(h, height[t.dst] + 1);
    height[*it] = h;
    top = std::max(top, h);
  }
  std::vector<std::vector<StateId>> levels(top + 1);
  for (StateId s = 0; s < lts.num_states(); ++s) levels[height[s]].push_back(s);
  return levels;
}

}  // namespace

Partition signature_refinement_parallel(const Lts& lts) {
  const std::size_t n = lts.num_states();
  const auto levels = tau_levels(lts);
  std::vector<std::uint32_t> block(n, 0), next;
  std::vector<detail::Signature> sigs(n);
  std::uint32_t count = 1;
  for (;;) {
    for (const auto& level : levels) {
      const auto m = static_cast<std::ptrdiff_t>(level.size());
#pragma omp parallel for schedule(dynamic, 64)
      for (std::ptrdiff_t i = 0; i < m; ++i) {
        const auto s = level[static_cast<std::size_t>(i)];
        detail::compute_signature(lts, s, block, sigs, sigs[s]);
      }
    }
    auto fresh = detail::renumber_blocks(block, sigs, next);
    block.swap(next);
    if (fresh == count) break;
    count = fresh;
  }
  return Partition::from_keys(block);
}

}  // namespace effrace
