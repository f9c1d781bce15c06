#include <doctest.h>

#include <cstdlib>
#include <random>

#include "effrace/bisim.hpp"
#include "effrace/ktrace.hpp"
#include "fixtures.hpp"

using namespace effrace;

TEST_CASE("level 0 is one class") {
  auto f = fixtures::fig2_fragment();
  auto p = ktrace_partition(f.lts, 0);
  CHECK(p.partition.num_classes() == 1);
}

TEST_CASE("HW fragment: equal traces, separated at level 2") {
  auto f = fixtures::fig2_fragment();
  auto k1 = ktrace_partition(f.lts, 1).partition;
  auto k2 = ktrace_partition(f.lts, 2).partition;
  CHECK(k1.same(f["s"], f["r"]));
  CHECK_FALSE(k2.same(f["s"], f["r"]));
  CHECK_FALSE(k1.same(f["s3"], f["r3"]));
  auto m = max_trace_partition(f.lts);
  CHECK(m.cap >= 2);
  CHECK(m.partition == branching_partition(f.lts));
}

TEST_CASE("single state: one class at every level") {
  auto lts = build_lts({}, 0);
  auto m = max_trace_partition(lts);
  CHECK(m.cap == 0);
  CHECK(m.partition.num_classes() == 1);
}

TEST_CASE("refinement is monotone") {
  RandomLtsParams params;
  for (std::uint64_t seed = 0; seed < 80; ++seed) {
    std::mt19937_64 rng(seed + 1000);
    auto lts = random_dag(rng, params);
    Partition prev = Partition::single(lts.num_states());
    for (std::size_t k = 1; k < 6; ++k) {
      auto next = ktrace_step(lts, prev);
      CHECK(next.refines(prev));
      prev = std::move(next);
    }
  }
}

TEST_CASE("inserting a stutter copy leaves other classes unchanged") {
  RandomLtsParams params;
  params.states = 25;
  for (std::uint64_t seed = 0; seed < 80; ++seed) {
    std::mt19937_64 rng(seed + 77);
    auto lts = random_dag(rng, params);
    const auto n = static_cast<StateId>(lts.num_states());
    if (n < 3) continue;
    const StateId v = static_cast<StateId>(1 + rng() % (n - 2));
    // v' copies v's out-edges plus an internal edge to v; half of v's
    // incoming edges are redirected to v'.
    LtsBuilder b(n + 1);
    const StateId copy = n;
    bool flip = false;
    for (const auto& t : lts.transitions()) {
      StateId dst = t.dst;
      if (dst == v && (flip = !flip)) dst = copy;
      b.add(t.src, lts.label(t.label), dst);
      if (t.src == v) b.add(copy, lts.label(t.label), t.dst);
    }
    b.add(copy, Action::tau(9, "dup"), v);
    auto grown = std::move(b).build(lts.initial());
    auto before = max_trace_partition(lts).partition;
    auto after = max_trace_partition(grown).partition;
    CHECK(after.same(copy, v));
    for (StateId x = 0; x < n; ++x)
      for (StateId y = x + 1; y < n; ++y) CHECK(before.same(x, y) == after.same(x, y));
  }
}

TEST_CASE("oracle refuses cyclic and oversized inputs") {
  std::vector<std::tuple<StateId, Action, StateId>> cyc{{0, Action::other("a"), 1}, {1, Action::other("b"), 0}};
  CHECK_THROWS_AS(max_trace_partition(build_lts(cyc, 0)), OracleRefused);
  std::vector<std::tuple<StateId, Action, StateId>> big;
  for (StateId i = 0; i < 100; ++i) big.emplace_back(i, Action::other("a"), i + 1);
  CHECK_THROWS_AS(max_trace_partition(build_lts(big, 0)), OracleRefused);
}

TEST_CASE("oracle agreement: parallel runner matches the serial runner") {
  RandomLtsParams params;
  auto par = oracle_agreement(500, 40, params);
  auto ser = oracle_agreement_serial(500, 40, params);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].agree);
    CHECK(par[i].seed == ser[i].seed);
    CHECK(par[i].classes == ser[i].classes);
    CHECK(par[i].cap == ser[i].cap);
  }
}
