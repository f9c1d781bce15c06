#include <doctest.h>

#include <functional>
#include <set>

#include "effrace/catalog.hpp"
#include "effrace/effect.hpp"
#include "effrace/explore.hpp"
#include "effrace/seqspec.hpp"

using namespace effrace;

namespace {

/// Completed histories of all maximal paths of an acyclic system.
std::set<History> complete_histories(const Lts& lts) {
  std::set<History> out;
  History h;
  std::function<void(StateId)> dfs = [&](StateId s) {
    auto out_edges = lts.out(s);
    if (out_edges.empty()) {
      out.insert(h);
      return;
    }
    for (const auto& t : out_edges) {
      const auto& a = lts.label(t.label);
      if (a.visible()) h.events.push_back(a);
      dfs(t.dst);
      if (a.visible()) h.events.pop_back();
    }
  };
  dfs(lts.initial());
  return out;
}

History hist(std::initializer_list<Action> events) { return History{std::vector<Action>(events)}; }

}  // namespace

TEST_CASE("catalog: the five shipped models, each with an expected set") {
  std::vector<std::string> names;
  for (const auto& e : catalog()) names.push_back(e.name);
  CHECK(names == std::vector<std::string>{"ccas", "dglm-queue", "hw-queue", "ms-queue", "treiber-stack"});
  for (const auto& e : catalog()) {
    CAPTURE(e.name);
    auto m = e.model();
    CHECK_FALSE(e.expected().empty());
    CHECK_FALSE(m.client.empty());
    CHECK_FALSE(m.spec.kind.empty());
    CHECK_NOTHROW(SequentialSpec::from_decl(m.spec));
  }
  CHECK_THROWS_AS(catalog_entry("lazy-list"), std::invalid_argument);
}

TEST_CASE("catalog: expected sets") {
  auto hw = catalog_entry("hw-queue").expected();
  CHECK(hw == std::vector<std::string>{"E1", "E2", "D4"});
  CHECK(std::find(hw.begin(), hw.end(), "D2") == hw.end());
  CHECK(catalog_entry("ms-queue").expected() == std::vector<std::string>{"8:ok", "20", "21:T", "28:ok"});
  CHECK(catalog_entry("dglm-queue").expected() == catalog_entry("ms-queue").expected());
}

TEST_CASE("catalog: small default clients explore") {
  for (const char* name : {"hw-queue", "ccas", "treiber-stack"}) {
    CAPTURE(name);
    const auto& e = catalog_entry(name);
    auto lts = explore(e.model(), e.default_client());
    CHECK(lts.num_states() > 10);
  }
}

TEST_CASE("tag patterns") {
  CHECK(tag_matches("D4", "D4"));
  CHECK(tag_matches("D4", "D4:F"));
  CHECK_FALSE(tag_matches("D4:T", "D4:F"));
  CHECK_FALSE(tag_matches("D4", "D42"));
  CHECK(tags_match_exactly({"E1", "D4"}, {"D4:F", "E1"}));
  CHECK_FALSE(tags_match_exactly({"E1", "D4"}, {"E1"}));
  CHECK_FALSE(tags_match_exactly({"E1"}, {"E1", "E2"}));
}

TEST_CASE("sequential queue") {
  SpecDecl d{"queue", {{"empty", "EMPTY"}}};
  auto q = SequentialSpec::from_decl(d);
  auto s = q.initial();
  auto r1 = q.apply(s, "Enq", "a");
  REQUIRE(r1);
  auto r2 = q.apply(r1->first, "Enq", "b");
  REQUIRE(r2);
  auto r3 = q.apply(r2->first, "Deq", "");
  REQUIRE(r3);
  CHECK(r3->second == "a");
  auto e = q.apply(s, "Deq", "");
  REQUIRE(e);
  CHECK(e->second == "EMPTY");
  auto blocking = SequentialSpec::from_decl({"queue", {{"empty", "block"}}});
  CHECK_FALSE(blocking.apply(blocking.initial(), "Deq", ""));
  CHECK_THROWS_AS(SequentialSpec::from_decl({"heap", {}}), std::invalid_argument);
}

TEST_CASE("sequential stack is LIFO") {
  auto st = SequentialSpec::from_decl({"stack", {{"empty", "EMPTY"}}});
  auto s = st.apply(st.initial(), "Push", "a")->first;
  s = st.apply(s, "Push", "b")->first;
  CHECK(st.apply(s, "Pop", "")->second == "b");
}

TEST_CASE("legal and linearizable") {
  auto q = SequentialSpec::from_decl({"queue", {{"empty", "block"}}});
  auto seq = hist({Action::call(1, "Enq", "a"), Action::ret(1, "Enq", ""), Action::call(2, "Deq", ""),
                   Action::ret(2, "Deq", "a")});
  CHECK(legal(seq, q));
  auto bad = hist({Action::call(1, "Enq", "a"), Action::ret(1, "Enq", ""), Action::call(2, "Deq", ""),
                   Action::ret(2, "Deq", "b")});
  CHECK_FALSE(legal(bad, q));
  // Overlapping calls: the dequeue may be ordered after the enqueue.
  auto conc = hist({Action::call(2, "Deq", ""), Action::call(1, "Enq", "a"), Action::ret(1, "Enq", ""),
                    Action::ret(2, "Deq", "a")});
  CHECK(linearizable(conc, seq));
  CHECK_FALSE(linearization_orders(conc, q).empty());
  // Real-time order forbids it when the dequeue returns first.
  auto early = hist({Action::call(2, "Deq", ""), Action::ret(2, "Deq", "a"), Action::call(1, "Enq", "a"),
                     Action::ret(1, "Enq", "")});
  CHECK(linearization_orders(early, q).empty());
}

TEST_CASE("every completed history of the shipped small instances is linearizable") {
  for (const char* name : {"hw-queue", "treiber-stack"}) {
    CAPTURE(name);
    const auto& e = catalog_entry(name);
    auto m = e.model();
    auto client = std::string(name) == "treiber-stack" ? parse_client("mgc:1,domain=a,b,threads=2", m)
                                                       : e.default_client();
    auto lts = explore(m, client);
    EffectContext ctx(lts);
    auto spec = SequentialSpec::from_decl(m.spec);
    auto hs = complete_histories(ctx.system());
    CHECK(hs.size() > 1);
    for (const auto& h : hs) {
      if (!h.complete()) continue;
      CAPTURE(h.str());
      CHECK_FALSE(linearization_orders(h, spec, 1).empty());
    }
  }
}
