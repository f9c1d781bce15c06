#pragma once

#include <fmt/format.h>
#include <random>
#include <string>

#include "effrace/explore.hpp"
#include "effrace/model.hpp"

namespace effrace::fixtures {

/// Random object over two shared integers: up to two methods of one to three
/// atomic steps (reads, writes, cas, swaps), and a client of two or three
/// threads calling one method each.
struct RandomModel {
  std::string source;
  std::string client;
};

inline RandomModel random_model(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  auto u = [&g](int n) { return static_cast<int>(g() % static_cast<std::uint64_t>(n)); };
  const char* vars[] = {"x", "y"};
  RandomModel m;
  m.source = "shared x = 0, y = 0\n";
  const int methods = 1 + u(2);
  int tag = 0;
  for (int k = 0; k < methods; ++k) {
    m.source += fmt::format("method M{}() {{\n  local a, b\n  a := 0\n", k);
    const int steps = 1 + u(3);
    for (int i = 0; i < steps; ++i) {
      const std::string v = vars[u(2)];
      std::string st;
      switch (u(5)) {
        case 0: st = fmt::format("a := {}", v); break;
        case 1: st = fmt::format("{} := {}", v, u(3)); break;
        case 2: st = fmt::format("b := cas({}, {}, {})", v, u(3), u(3)); break;
        case 3: st = fmt::format("{} := a + 1", v); break;
        default: st = fmt::format("(a, {}) := ({}, a)", v, v); break;
      }
      m.source += fmt::format("  T{}: {}\n", tag++, st);
    }
    m.source += "  return a\n}\n";
  }
  const int threads = 2 + u(2);
  for (int t = 1; t <= threads; ++t) m.client += fmt::format("{}t{}:M{}", t > 1 ? "," : "", t, u(methods));
  return m;
}

inline Lts explore_random(const RandomModel& m) {
  auto model = parse_model(m.source, "random");
  return explore(model, parse_client(m.client, model));
}

}  // namespace effrace::fixtures
