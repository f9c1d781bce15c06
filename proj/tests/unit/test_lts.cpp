#include <doctest.h>

#include <random>

#include "effrace/history.hpp"
#include "effrace/lts.hpp"
#include "fixtures.hpp"

using namespace effrace;

TEST_CASE("build_lts: smallest nonempty system") {
  std::vector<std::tuple<StateId, Action, StateId>> t{{0, Action::tau(1, "a"), 1}};
  auto lts = build_lts(t, 0);
  CHECK(lts.num_states() == 2);
  CHECK(lts.num_transitions() == 1);
  CHECK(lts.num_internal_transitions() == 1);
  CHECK(lts.num_reachable() == 2);
}

TEST_CASE("build_lts: empty transition set") {
  auto lts = build_lts({}, 0);
  CHECK(lts.num_states() == 1);
  CHECK(lts.num_transitions() == 0);
  CHECK(lts.initial() == 0);
}

TEST_CASE("build_lts: unreachable states are kept and flagged") {
  std::vector<std::tuple<StateId, Action, StateId>> t{{0, Action::tau(1, "a"), 1}, {2, Action::tau(1, "b"), 1}};
  auto lts = build_lts(t, 0);
  CHECK(lts.num_states() == 3);
  CHECK(lts.reachable()[1]);
  CHECK_FALSE(lts.reachable()[2]);
  CHECK(lts.num_reachable() == 2);
}

TEST_CASE("LtsBuilder: dangling endpoint names the transition") {
  LtsBuilder b(2);
  b.add(0, Action::call(1, "Enq", "a"), 5);
  try {
    std::move(b).build(0);
    FAIL("expected LtsError");
  } catch (const LtsError& e) {
    CHECK(std::string(e.what()).find("(0, \"t1 call Enq(a)\", 5)") != std::string::npos);
  }
}

TEST_CASE("LtsBuilder: duplicates merge, equal actions share a label") {
  LtsBuilder b(2);
  b.add(0, Action::tau(1, "E1"), 1);
  b.add(0, Action::tau(1, "E1"), 1);
  b.add(1, Action::tau(1, "E1"), 0);
  auto lts = std::move(b).build(0);
  CHECK(lts.num_transitions() == 2);
  CHECK(lts.labels().size() == 1);
}

TEST_CASE("Action rendering") {
  CHECK(Action::call(1, "Enq", "a").str() == "t1 call Enq(a)");
  CHECK(Action::ret(2, "Deq", "b").str() == "t2 ret(b) Deq");
  CHECK(Action::ret(3, "Enq", "").str() == "t3 ret Enq");
  CHECK(Action::tau(3, "E2").str() == "t3.E2");
  CHECK(Action::tau(1, "C4:ok").base_tag() == "C4");
  CHECK(Action::tau(1, "E2").internal());
  CHECK(Action::tau(1, "E2") != Action::tau(1, "E1"));
}

TEST_CASE("collapse_tau_sccs: two-state loop") {
  std::vector<std::tuple<StateId, Action, StateId>> t{{0, Action::tau(1, "a"), 1}, {1, Action::tau(1, "b"), 0}};
  auto c = collapse_tau_sccs(build_lts(t, 0));
  CHECK(c.lts.num_states() == 1);
  CHECK(c.lts.num_transitions() == 0);
  CHECK(c.state_map == std::vector<StateId>{0, 0});
}

TEST_CASE("collapse_tau_sccs: loop plus a call") {
  std::vector<std::tuple<StateId, Action, StateId>> t{
      {0, Action::tau(1, "x"), 1}, {1, Action::tau(1, "y"), 0}, {0, Action::call(1, "M", ""), 2}};
  auto c = collapse_tau_sccs(build_lts(t, 0));
  CHECK(c.lts.num_states() == 2);
  CHECK(c.lts.num_transitions() == 1);
  CHECK(c.lts.num_internal_transitions() == 0);
  CHECK(c.lts.label(c.lts.transitions()[0].label).kind == ActionKind::Call);
  CHECK(tau_acyclic(c.lts));
}

TEST_CASE("collapse_tau_sccs: acyclic input is unchanged") {
  auto f = fixtures::fig2_fragment();
  auto c = collapse_tau_sccs(f.lts);
  CHECK(c.lts.num_states() == f.lts.num_states());
  CHECK(c.lts.num_transitions() == f.lts.num_transitions());
  for (StateId s = 0; s < f.lts.num_states(); ++s) CHECK(c.state_map[s] == s);
}

namespace {

Lts random_cyclic(std::mt19937_64& rng, std::size_t n) {
  LtsBuilder b(n);
  std::uniform_int_distribution<StateId> pick(0, static_cast<StateId>(n - 1));
  std::bernoulli_distribution vis(0.3);
  for (std::size_t e = 0; e < 2 * n; ++e) {
    auto a = vis(rng) ? Action::call(1, "m", "") : Action::tau(1, "t");
    b.add(pick(rng), a, pick(rng));
  }
  return std::move(b).build(0);
}

}  // namespace

TEST_CASE("collapse_tau_sccs is idempotent") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    auto lts = random_cyclic(rng, 2 + i % 20);
    auto once = collapse_tau_sccs(lts);
    CHECK(tau_acyclic(once.lts));
    auto twice = collapse_tau_sccs(once.lts);
    CHECK(twice.lts.num_states() == once.lts.num_states());
    CHECK(twice.lts.num_transitions() == once.lts.num_transitions());
    for (StateId s = 0; s < once.lts.num_states(); ++s) CHECK(twice.state_map[s] == s);
    // Visible transitions survive.
    std::size_t vis = 0;
    for (const auto& t : lts.transitions()) vis += !lts.internal(t.label);
    CHECK(once.lts.num_transitions() - once.lts.num_internal_transitions() <= vis);
  }
}

TEST_CASE("tau_topological_order puts sources first") {
  auto f = fixtures::fig2_fragment();
  auto order = tau_topological_order(f.lts);
  std::vector<std::size_t> pos(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  for (const auto& t : f.lts.transitions())
    if (f.lts.internal(t.label)) CHECK(pos[t.src] < pos[t.dst]);
}

namespace {

Path path_of(const Lts& lts, StateId start, std::initializer_list<StateId> states) {
  Path p{start, {}};
  StateId cur = start;
  for (auto next : states) {
    for (const auto& t : lts.out(cur))
      if (t.dst == next) {
        p.steps.emplace_back(t.label, next);
        break;
      }
    cur = next;
  }
  return p;
}

}  // namespace

TEST_CASE("history_of erases internal steps") {
  LtsBuilder b(5);
  b.add(0, Action::call(1, "Enq", "a"), 1);
  b.add(1, Action::tau(1, "E1"), 2);
  b.add(2, Action::tau(1, "E2"), 3);
  b.add(3, Action::ret(1, "Enq", ""), 4);
  auto lts = std::move(b).build(0);
  auto p = path_of(lts, 0, {1, 2, 3, 4});
  REQUIRE(valid_path(lts, p));
  auto h = history_of(lts, p);
  REQUIRE(h.size() == 2);
  CHECK(h.events[0].kind == ActionKind::Call);
  CHECK(h.events[1].kind == ActionKind::Ret);
  CHECK(h.complete());
  CHECK(history_of(lts, Path{0, {}}).empty());
}

TEST_CASE("history_of on the HW fragment ends with the two returns") {
  auto f = fixtures::fig2_fragment();
  auto p = path_of(f.lts, f["s"], {f["s1"], f["s2"], f["s3"], f["s4"], f["s7"], f["s8"], f["s9"]});
  REQUIRE(valid_path(f.lts, p));
  auto h = history_of(f.lts, p);
  REQUIRE(h.size() == 3);
  CHECK(h.events[1] == Action::ret(2, "Deq", "a"));
  CHECK(h.events[2] == Action::ret(3, "Enq", ""));
}

TEST_CASE("history_of commutes with concatenation") {
  auto f = fixtures::fig2_fragment();
  auto a = path_of(f.lts, f["s"], {f["s1"], f["s2"], f["s3"]});
  auto b = path_of(f.lts, f["s3"], {f["r3"], f["r4"], f["r5"]});
  auto ha = history_of(f.lts, a);
  auto hb = history_of(f.lts, b);
  auto hab = history_of(f.lts, a.concat(b));
  ha.events.insert(ha.events.end(), hb.events.begin(), hb.events.end());
  CHECK(hab == ha);
}

namespace {

History make(std::initializer_list<Action> evs) { return History{std::vector<Action>(evs)}; }

}  // namespace

TEST_CASE("precedes") {
  auto c1 = Action::call(1, "Enq", "a"), r1 = Action::ret(1, "Enq", "");
  auto c2 = Action::call(2, "Deq", ""), r2 = Action::ret(2, "Deq", "a");
  auto c3 = Action::call(3, "Enq", "b"), r3 = Action::ret(3, "Enq", "");

  SUBCASE("sequential") {
    auto h = make({c1, r1, c2, r2});
    auto ops = operations(h);
    REQUIRE(ops.size() == 2);
    CHECK(precedes(h, ops[0], ops[1]));
    CHECK_FALSE(precedes(h, ops[1], ops[0]));
    CHECK(h.sequential());
  }
  SUBCASE("overlapping") {
    auto h = make({c1, c2, r1, r2});
    auto ops = operations(h);
    CHECK_FALSE(precedes(h, ops[0], ops[1]));
    CHECK_FALSE(precedes(h, ops[1], ops[0]));
    CHECK_FALSE(h.sequential());
    CHECK(h.complete());
  }
  SUBCASE("three sequential operations are totally ordered") {
    auto h = make({c1, r1, c2, r2, c3, r3});
    auto ops = operations(h);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK_FALSE(precedes(h, ops[i], ops[i]));
      for (std::size_t j = 0; j < 3; ++j)
        if (i != j) CHECK(precedes(h, ops[i], ops[j]) != precedes(h, ops[j], ops[i]));
    }
    CHECK(precedes(h, ops[0], ops[2]));
  }
  SUBCASE("operation not in the history") {
    auto h = make({c1, r1});
    Operation bogus{5, std::nullopt, 1, "Enq", "a", ""};
    CHECK_THROWS_AS(precedes(h, bogus, operations(h)[0]), std::invalid_argument);
  }
}

TEST_CASE("precedes is irreflexive and transitive on random histories") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 300; ++round) {
    // Random interleaving of three threads with one or two ops each.
    std::vector<std::vector<Action>> per(3);
    for (int t = 1; t <= 3; ++t) {
      int ops = 1 + static_cast<int>(rng() % 2);
      for (int k = 0; k < ops; ++k) {
        per[t - 1].push_back(Action::call(t, "M", std::to_string(k)));
        per[t - 1].push_back(Action::ret(t, "M", ""));
      }
    }
    History h;
    std::vector<std::size_t> idx(3, 0);
    while (true) {
      std::vector<int> live;
      for (int t = 0; t < 3; ++t)
        if (idx[t] < per[t].size()) live.push_back(t);
      if (live.empty()) break;
      int t = live[rng() % live.size()];
      h.events.push_back(per[t][idx[t]++]);
    }
    auto ops = operations(h);
    for (const auto& a : ops) {
      CHECK_FALSE(precedes(h, a, a));
      for (const auto& b : ops)
        for (const auto& c : ops)
          if (precedes(h, a, b) && precedes(h, b, c)) CHECK(precedes(h, a, c));
    }
  }
}
