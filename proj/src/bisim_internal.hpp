#pragma once

#include <cstdint>
#include <vector>

#include "effrace/lts.hpp"

namespace effrace::detail {

// Every internal label maps to this id, so differently tagged internal
// actions compare equal.
inline constexpr std::uint32_t kTauKey = 0xffffffffu;

using Signature = std::vector<std::uint64_t>;

inline std::uint64_t sig_entry(std::uint32_t label_key, std::uint32_t block) {
  return (static_cast<std::uint64_t>(label_key) << 32) | block;
}

inline std::uint32_t label_key(const Lts& lts, LabelId l) { return lts.internal(l) ? kTauKey : l; }

// Signature of s given the signatures of its internal successors.
void compute_signature(const Lts& lts, StateId s, const std::vector<std::uint32_t>& block,
                       const std::vector<Signature>& sigs, Signature& out);

// Assigns new block ids from (old block, signature), in state order.
// Returns the number of blocks.
std::uint32_t renumber_blocks(const std::vector<std::uint32_t>& block, const std::vector<Signature>& sigs,
                              std::vector<std::uint32_t>& next);

}  // namespace effrace::detail
