#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "effrace/lts.hpp"

namespace effrace::fixtures {

/// Small Lts written with named states; the first name is the initial state.
struct Named {
  Lts lts;
  std::map<std::string, StateId> id;
  StateId operator[](const std::string& name) const { return id.at(name); }
};

inline Named make_named(const std::vector<std::tuple<std::string, Action, std::string>>& edges,
                        const std::string& initial) {
  Named n;
  n.id[initial] = 0;
  auto get = [&n](const std::string& s) {
    auto [it, ins] = n.id.try_emplace(s, static_cast<StateId>(n.id.size()));
    return it->second;
  };
  LtsBuilder b;
  std::vector<std::tuple<StateId, Action, StateId>> triples;
  for (const auto& [src, a, dst] : edges) {
    auto x = get(src);
    auto y = get(dst);
    triples.emplace_back(x, a, y);
  }
  b.ensure_states(n.id.size());
  for (const auto& [x, a, y] : triples) b.add(x, a, y);
  n.lts = std::move(b).build(0);
  return n;
}

inline Action tau(int t, const std::string& tag) { return Action::tau(t, tag); }
inline Action ret(int t, const std::string& m, const std::string& v = "") { return Action::ret(t, m, v); }
inline Action call(int t, const std::string& m, const std::string& v = "") { return Action::call(t, m, v); }

/// The HW-queue fragment around s and r: s and r have the same traces but
/// differ at level 2.
inline Named fig2_fragment() {
  return make_named(
      {
          {"s", tau(2, "D2"), "s1"},
          {"s1", tau(2, "D4"), "s2"},
          {"s2", ret(1, "Enq"), "s3"},
          {"s", tau(3, "E2"), "r"},
          {"s3", tau(2, "D4"), "s4"},
          {"s4", tau(2, "D5"), "s7"},
          {"s7", ret(2, "Deq", "a"), "s8"},
          {"s8", ret(3, "Enq"), "s9"},
          {"s3", tau(3, "E2"), "r3"},
          {"r", tau(2, "D2"), "r2"},
          {"r2", ret(1, "Enq"), "r3"},
          {"r3", tau(2, "D4"), "r4"},
          {"r4", ret(2, "Deq", "b"), "r5"},
          {"r5", ret(3, "Enq"), "r6"},
          {"r", tau(2, "D4"), "r7"},
          {"r7", tau(2, "D4"), "r8"},
          {"r8", ret(1, "Enq"), "r9"},
          {"r9", ret(2, "Deq", "a"), "r10"},
          {"r10", ret(3, "Enq"), "r11"},
      },
      "s");
}

/// Two internal branches where s -> r is matched by s -> s' through r.
inline Named fig4_1() {
  return make_named(
      {
          {"s", tau(1, "A"), "r"},
          {"s", tau(2, "B"), "s'"},
          {"r", tau(2, "B"), "s'"},
          {"r", Action::other("b"), "y"},
          {"s", Action::other("c"), "z"},
      },
      "s");
}

}  // namespace effrace::fixtures
