// Acceptance criteria: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <fmt/format.h>
#include <functional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "effrace/aut_io.hpp"
#include "effrace/catalog.hpp"
#include "effrace/effect.hpp"
#include "effrace/explore.hpp"
#include "effrace/ktrace.hpp"
#include "effrace/report.hpp"

using namespace effrace;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    pass = false;
    detail += (detail.empty() ? "" : "; ") + why;
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

struct Instance {
  std::string model;
  ClientConfig client;
  Lts lts;
};

Instance instance(const std::string& model, const std::string& client = "") {
  const auto& e = catalog_entry(model);
  auto m = e.model();
  auto c = client.empty() ? e.default_client() : parse_client(client, m);
  return {model, c, explore(m, c)};
}

std::vector<std::string> critical_tags(const EffectContext& ctx) {
  std::vector<std::string> out;
  for (const auto& [t, n] : critical_instructions(ctx)) out.push_back(t);
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return "{" + out + "}";
}

std::string tag_of(const std::string& step) { return step.substr(step.find('.') + 1); }

bool has_race(const std::map<std::pair<std::string, std::string>, std::size_t>& races, const std::string& a,
              const std::string& b) {
  for (const auto& [p, n] : races) {
    auto x = tag_of(p.first), y = tag_of(p.second);
    if ((x == a && y == b) || (x == b && y == a)) return true;
  }
  return false;
}

// ---------------------------------------------------------------- criteria

Outcome oracle_equivalence() {
  Outcome o;
  RandomLtsParams p;
  p.states = 40;
  p.visible_labels = 4;
  const std::size_t runs = 500;
  auto t0 = Clock::now();
  auto res = oracle_agreement(20240601, runs, p);
  const double secs = seconds_since(t0);
  std::size_t agree = 0, max_states = 0;
  for (const auto& r : res) {
    agree += r.agree;
    max_states = std::max(max_states, r.states);
  }
  o.note(fmt::format("{}/{} random systems agree (at most {} states), {:.1f} s", agree, res.size(), max_states, secs));
  if (agree != runs) o.fail("disagreement");
  if (max_states > 40) o.fail("system larger than 40 states");
  if (secs >= 60) o.fail("over 60 s");
  return o;
}

Outcome hw_instructions() {
  Outcome o;
  auto in = instance("hw-queue", "t1:Enq(a),t2:Deq,t3:Enq(b)");
  EffectContext ctx(in.lts);
  auto tags = critical_tags(ctx);
  o.note("critical " + join(tags));
  if (!tags_match_exactly({"E1", "E2", "D4"}, tags)) o.fail("critical set differs from {E1,E2,D4}");
  if (critical_instructions(ctx).count("D2")) o.fail("D2 is critical");
  // k-trace levels on the quotient, which is bisimilar to the system.
  const auto& q = ctx.quotient();
  if (q.lts.num_states() > oracle_state_bound()) {
    o.fail("quotient exceeds the oracle bound");
    return o;
  }
  auto k1 = ktrace_partition(q.lts, 1).partition;
  auto k2 = ktrace_partition(q.lts, 2).partition;
  std::size_t e2_level2 = 0;
  for (std::size_t i = 0; i < q.lts.num_transitions(); ++i) {
    const auto& t = q.lts.transitions()[i];
    if (!q.lts.internal(t.label) || !k1.same(t.src, t.dst) || k2.same(t.src, t.dst)) continue;
    for (auto w : q.witnesses[i])
      if (in.lts.label(in.lts.transitions()[w].label).tag == "E2") ++e2_level2;
  }
  o.note(fmt::format("{} E2 steps equal at level 1 and separated at level 2", e2_level2));
  if (e2_level2 == 0) o.fail("no E2 step separated only at level 2");
  return o;
}

Outcome ms_dglm() {
  Outcome o;
  const std::vector<std::string> expected{"8:ok", "20", "21:T", "28:ok"};
  std::vector<std::string> ms_tags;
  for (const char* name : {"ms-queue", "dglm-queue"}) {
    auto in = instance(name, "mgc:3,domain=a,threads=2");
    EffectContext ctx(in.lts);
    auto tags = critical_tags(ctx);
    o.note(fmt::format("{} {}", name, join(tags)));
    if (!tags_match_exactly(expected, tags)) o.fail(fmt::format("{} critical set differs", name));
    if (std::string(name) == "ms-queue") ms_tags = tags;
    else if (tags != ms_tags) o.fail("DGLM and MS sets differ");
    // Tail-swinging cas steps occur and are all stutter.
    std::set<std::string> tail_seen;
    for (const auto& a : in.lts.labels())
      if (a.internal() && (a.base_tag() == "10" || a.base_tag() == "12" || a.base_tag() == "25"))
        tail_seen.insert(a.base_tag());
    if (tail_seen.size() != 3) o.fail(fmt::format("{} exercises only {} Tail cas lines", name, tail_seen.size()));
    for (const auto& t : tags) {
      auto base = t.substr(0, t.find(':'));
      if (base == "10" || base == "12" || base == "25") o.fail(fmt::format("{} Tail cas {} is critical", name, t));
    }
  }
  return o;
}

Outcome ccas_races() {
  Outcome o;
  auto in = instance("ccas", "t1:CCAS(1,2),t2:CCAS(2,3),t3:CCAS(2,5),t4:SetFlag(false)");
  EffectContext ctx(in.lts);
  auto races = effect_races(ctx);
  auto ir = instruction_races(ctx, races);
  if (!has_race(ir, "C13", "F1")) o.fail("no C13/F1 race");
  if (!has_race(ir, "C15:ok", "C17:ok")) o.fail("no C15/C17 race");
  auto tags = critical_tags(ctx);
  o.note("critical " + join(tags));
  if (!tags_match_exactly(catalog_entry("ccas").expected(), tags)) o.fail("critical set differs");
  auto shared = shared_effect_targets(ctx, "C13");
  o.note(fmt::format("{} instruction-level races, {} classes entered by C13 of two threads", ir.size(), shared.size()));
  if (shared.empty()) o.fail("no class shared by C13 steps of two threads");
  return o;
}

Outcome history_coverage() {
  Outcome o;
  const std::vector<std::pair<std::string, std::string>> cases{
      {"hw-queue", "t1:Enq(a),t2:Deq,t3:Enq(b)"},
      {"ms-queue", "mgc:2,domain=a,threads=2"},
      {"treiber-stack", "mgc:2,domain=a,b,threads=2"},
      {"ccas", "t1:CCAS(1,2),t2:CCAS(2,3),t3:CCAS(2,5),t4:SetFlag(false)"},
  };
  for (const auto& [model, client] : cases) {
    auto t0 = Clock::now();
    auto in = instance(model, client);
    EffectContext ctx(in.lts);
    auto races = effect_races(ctx);
    auto r = check_history_coverage(ctx, races);
    const double secs = seconds_since(t0);
    o.note(fmt::format("{} {}/{} in {:.1f} s", model, r.violations, r.checked, secs));
    if (!r.passed) o.fail(fmt::format("{}: {}", model, r.witness));
    if (r.checked == 0) o.fail(fmt::format("{}: nothing checked", model));
    if (secs >= 120) o.fail(fmt::format("{} over 120 s", model));
  }
  return o;
}

Outcome race_recurrence() {
  Outcome o;
  for (const char* model : {"hw-queue", "ccas"}) {
    const auto& e = catalog_entry(model);
    auto m = e.model();
    auto small = explore(m, e.default_client());
    auto large = explore(m, e.default_client().with_extra_budget(1));
    EffectContext cs(small), cl(large);
    auto rs = effect_races(cs), rl = effect_races(cl);
    auto r = check_race_embedding(cs, rs, cl, rl);
    o.note(fmt::format("{} {} lost of {} ({} -> {} states)", model, r.violations, r.checked, small.num_states(),
                       large.num_states()));
    if (!r.passed) o.fail(fmt::format("{}: {}", model, r.witness));
    if (r.checked == 0) o.fail(fmt::format("{}: no races", model));
  }
  return o;
}

Outcome lp_detection() {
  Outcome o;
  const auto& e = catalog_entry("hw-queue");
  auto m = e.model();
  auto lts = explore(m, parse_client("t1:Enq(a),t2:Deq,t3:Enq(b),budget=2", m));
  EffectContext ctx(lts);
  auto races = effect_races(ctx);
  auto lps = detect_lps(ctx, races, SequentialSpec::from_decl(m.spec));
  std::size_t e2 = 0;
  for (const auto& a : lps) e2 += a.instruction == "E2" && a.operation.method == "Enq";
  o.note(fmt::format("{} E2 attributions to Enq", e2));
  if (e2 == 0) o.fail("E2 is never an LP of Enq");
  for (const auto& c : classify_lps(ctx)) {
    o.note(fmt::format("{} {} (max {})", c.method, c.fixed ? "fixed" : "non-fixed", c.max_critical_steps));
    if (c.fixed != (c.max_critical_steps <= 1)) o.fail(c.method + " classification inconsistent with its counts");
    if (c.method == "Enq" && c.fixed) o.fail("Enq classified as fixed");
  }
  return o;
}

Outcome crate() {
  Outcome o;
  auto in = instance("hw-queue", "t1:Enq(a),t2:Deq,t3:Enq(b)");
  EffectContext ctx(in.lts);
  auto rate = c_rate(in.lts, ctx.quotient());
  std::size_t orig_tau = 0, q_tau = 0;
  for (const auto& t : in.lts.transitions()) orig_tau += in.lts.internal(t.label);
  for (const auto& t : ctx.quotient().lts.transitions()) q_tau += ctx.quotient().lts.internal(t.label);
  o.note(fmt::format("HW {}/{} = {}", rate.num, rate.den, rate.percent()));
  if (rate.num != q_tau || rate.den != orig_tau) o.fail("C-rate is not quotient tau over system tau");
  if (rate == Rational{28, 368} && rate.percent() != "7.6%") o.fail("28/368 not printed as 7.6%");
  for (const char* model : {"ms-queue", "hw-queue"}) {
    auto m = catalog_entry(model).model();
    std::vector<Rational> row;
    std::string cells;
    for (int b = 2; b <= 5; ++b) {
      auto r = crate_row(m, fmt::format("2x{}", b), most_general_client(m, 2, b, {"a"}));
      row.push_back(r.c_rate);
      cells += fmt::format(" {}", r.c_rate.percent());
    }
    o.note(fmt::format("{} 2x2..2x5:{}", model, cells));
    for (std::size_t i = 1; i < row.size(); ++i)
      if (!(row[i] < row[i - 1])) o.fail(fmt::format("{} row not strictly decreasing", model));
  }
  return o;
}

Outcome property_suites() {
  Outcome o;
  const std::vector<std::pair<std::string, std::string>> cases{
      {"hw-queue", ""}, {"ms-queue", ""}, {"dglm-queue", ""}, {"treiber-stack", ""}, {"ccas", ""},
  };
  for (const auto& [model, client] : cases) {
    auto in = instance(model, client);
    EffectContext ctx(in.lts);
    auto races = effect_races(ctx);
    std::vector<CheckResult> checks{check_identification_exists(ctx), check_dichotomy(ctx),
                                    check_races_internal(ctx, races),  check_critical_agreement(ctx, races),
                                    check_quotient_paths(ctx, 4),      check_structure_separation(ctx, races)};
    std::size_t failed = 0;
    for (const auto& c : checks)
      if (!c.passed) {
        ++failed;
        o.fail(fmt::format("{} {}: {} violations, e.g. {}", model, c.name, c.violations, c.witness));
      }
    if (failed == 0) o.note(fmt::format("{} all {} suites pass", model, checks.size()));
  }
  return o;
}

using Triple = std::tuple<StateId, std::string, StateId>;

std::vector<Triple> triples(const Lts& lts, AutMode mode) {
  std::vector<Triple> out;
  for (const auto& t : lts.transitions()) out.emplace_back(t.src, aut_label(lts.label(t.label), mode), t.dst);
  std::sort(out.begin(), out.end());
  return out;
}

Outcome round_trips() {
  Outcome o;
  std::size_t checked = 0;
  for (const auto& e : catalog()) {
    auto m = e.model();
    auto lts = explore(m, e.default_client());
    EffectContext ctx(lts);
    const auto& q = ctx.quotient().lts;
    for (auto mode : {AutMode::Annotated, AutMode::Abstract}) {
      auto back = from_aut(to_aut(q, mode));
      ++checked;
      if (back.num_states() != q.num_states() || back.initial() != q.initial() ||
          triples(back, mode) != triples(q, mode))
        o.fail(fmt::format("{} quotient does not round-trip", e.name));
      if (branching_partition(back).num_classes() != back.num_states())
        o.fail(fmt::format("{} imported quotient is not minimal", e.name));
    }
    // Reports are byte-identical across runs.
    AnalysisOptions opts;
    opts.samples = 50;
    auto r1 = analyze_model(m, e.default_client(), opts);
    auto r2 = analyze_model(m, e.default_client(), opts);
    ++checked;
    if (render_json(r1.report) != render_json(r2.report) || render_table(r1.report) != render_table(r2.report) ||
        render_dot(r1) != render_dot(r2))
      o.fail(fmt::format("{} reports differ between runs", e.name));
  }
  o.note(fmt::format("{} round-trips and rerun comparisons", checked));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"HW critical instructions", hw_instructions},
      {"MS and DGLM critical instructions", ms_dglm},
      {"CCAS races", ccas_races},
      {"coverage of differing histories", history_coverage},
      {"races recur at larger budgets", race_recurrence},
      {"linearization points", lp_detection},
      {"C-rate", crate},
      {"structural property suites", property_suites},
      {"format round-trips and determinism", round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    fmt::print("criterion {:>2} {} {} ({:.1f} s): {}\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
               seconds_since(t0), o.detail);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria pass\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
