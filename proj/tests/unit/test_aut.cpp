#include <doctest.h>

#include "effrace/aut_io.hpp"
#include "effrace/bisim.hpp"
#include "fixtures.hpp"

using namespace effrace;

TEST_CASE("export: abstract two-state system") {
  std::vector<std::tuple<StateId, Action, StateId>> t{{0, Action::tau(1, "a"), 1}};
  auto text = to_aut(build_lts(t, 0), AutMode::Abstract);
  CHECK(text == "des (0, 1, 2)\n(0, \"i\", 1)\n");
}

TEST_CASE("labels round-trip") {
  for (const auto& a : {Action::call(1, "Enq", "a"), Action::call(4, "CCAS", "1,2"), Action::ret(2, "Deq", "b"),
                        Action::ret(3, "Enq", ""), Action::ret(1, "Deq", ":EMPTY"), Action::tau(3, "E2"),
                        Action::tau(1, "C4:ok"), Action::tau(2, "21:T")}) {
    CHECK(parse_aut_label(aut_label(a, AutMode::Annotated)) == a);
  }
  CHECK(parse_aut_label("i").internal());
  CHECK(parse_aut_label("tau").internal());
  CHECK(parse_aut_label("tau").tag.empty());
  CHECK(parse_aut_label("LOCK !1").kind == ActionKind::Other);
}

TEST_CASE("annotated round-trip preserves tags") {
  auto f = fixtures::fig2_fragment();
  auto back = from_aut(to_aut(f.lts, AutMode::Annotated));
  REQUIRE(back.num_states() == f.lts.num_states());
  REQUIRE(back.num_transitions() == f.lts.num_transitions());
  for (std::size_t i = 0; i < back.num_transitions(); ++i) {
    auto a = f.lts.transitions()[i];
    auto b = back.transitions()[i];
    CHECK(a.src == b.src);
    CHECK(a.dst == b.dst);
    CHECK(f.lts.label(a.label) == back.label(b.label));
  }
  CHECK(to_aut(back, AutMode::Annotated) == to_aut(f.lts, AutMode::Annotated));
}

TEST_CASE("abstract round-trip loses only tags") {
  auto f = fixtures::fig2_fragment();
  auto back = from_aut(to_aut(f.lts, AutMode::Abstract));
  CHECK(back.num_transitions() == f.lts.num_transitions());
  CHECK(back.num_internal_transitions() == f.lts.num_internal_transitions());
  CHECK(branching_partition(back) == branching_partition(f.lts));
}

TEST_CASE("import errors carry line numbers") {
  try {
    from_aut("des (0, 2, 2)\n(0, \"i\", 1)\n(0 \"i\" 1)\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(from_aut("hello\n"), ParseError);
  CHECK_THROWS_AS(from_aut("des (0, 2, 2)\n(0, \"i\", 1)\n"), ParseError);
  CHECK_THROWS_AS(from_aut("des (0, 1, 2)\n(0, \"i\", 7)\n"), ParseError);
}

TEST_CASE("import accepts unquoted labels and CRLF") {
  auto lts = from_aut("des (0, 2, 3)\r\n(0, i, 1)\r\n(1, \"t1 call Enq(a)\", 2)\r\n");
  CHECK(lts.num_states() == 3);
  CHECK(lts.num_internal_transitions() == 1);
}
