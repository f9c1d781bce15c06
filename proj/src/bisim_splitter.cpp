#include <algorithm>

#include "bisim_internal.hpp"
#include "effrace/bisim.hpp"

namespace effrace {

Partition splitter_refinement(const Lts& lts) {
  const std::size_t n = lts.num_states();
  if (!tau_acyclic(lts)) throw LtsError("splitter refinement needs an Lts without internal cycles");
  std::vector<std::vector<StateId>> tau_pred(n);
  for (const auto& t : lts.transitions())
    if (lts.internal(t.label)) tau_pred[t.dst].push_back(t.src);

  std::vector<std::uint32_t> block(n, 0);
  std::vector<std::vector<StateId>> blocks(1);
  for (StateId s = 0; s < n; ++s) blocks[0].push_back(s);

  std::vector<char> pos(n, 0);
  std::vector<StateId> work;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::uint32_t b = 0; b < blocks.size(); ++b) {
      if (blocks[b].size() < 2) continue;
      // Candidate splitters: every non-inert (action, block) leaving B.
      std::vector<std::uint64_t> splitters;
      for (auto s : blocks[b])
        for (const auto& t : lts.out(s))
          if (!(lts.internal(t.label) && block[t.dst] == b))
            splitters.push_back(detail::sig_entry(detail::label_key(lts, t.label), block[t.dst]));
      std::sort(splitters.begin(), splitters.end());
      splitters.erase(std::unique(splitters.begin(), splitters.end()), splitters.end());

      for (auto sp : splitters) {
        const auto key = static_cast<std::uint32_t>(sp >> 32);
        const auto target = static_cast<std::uint32_t>(sp & 0xffffffffu);
        // Pos: states of B reaching `target` by inert moves then one `key` step.
        work.clear();
        std::size_t npos = 0;
        for (auto s : blocks[b]) {
          for (const auto& t : lts.out(s)) {
            if (detail::label_key(lts, t.label) == key && block[t.dst] == target) {
              pos[s] = 1;
              work.push_back(s);
              ++npos;
              break;
            }
          }
        }
        while (!work.empty()) {
          auto s = work.back();
          work.pop_back();
          for (auto p : tau_pred[s]) {
            if (block[p] == b && !pos[p]) {
              pos[p] = 1;
              ++npos;
              work.push_back(p);
            }
          }
        }
        const bool split = npos > 0 && npos < blocks[b].size();
        if (split) {
          const auto fresh = static_cast<std::uint32_t>(blocks.size());
          std::vector<StateId> keep, moved;
          for (auto s : blocks[b]) (pos[s] ? keep : moved).push_back(s);
          for (auto s : moved) block[s] = fresh;
          blocks[b] = std::move(keep);
          blocks.push_back(std::move(moved));
          changed = true;
        }
        for (auto s : blocks[b]) pos[s] = 0;
        if (split) {
          for (auto s : blocks.back()) pos[s] = 0;
          break;
        }
      }
    }
  }
  return Partition::from_keys(block);
}

}  // namespace effrace
