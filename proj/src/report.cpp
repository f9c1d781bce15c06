#include "effrace/report.hpp"

#include "effrace/catalog.hpp"

#include <chrono>
#include <fmt/format.h>
#include <json.hpp>
#include <set>
#include <sstream>

namespace effrace {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Counts counts_of(const Lts& lts) { return {lts.num_states(), lts.num_transitions(), lts.num_internal_transitions()}; }

std::vector<std::string> tags_of(const std::map<std::string, std::size_t>& critical) {
  std::vector<std::string> out;
  for (const auto& [t, n] : critical) out.push_back(t);
  return out;
}

}  // namespace

Analysis analyze_lts(Lts lts, const std::string& name, const std::string& client,
                     const std::optional<SequentialSpec>& spec, const AnalysisOptions& options) {
  Analysis a;
  a.lts = std::make_unique<Lts>(std::move(lts));
  auto& r = a.report;
  r.model = name;
  r.client = client;
  auto t0 = Clock::now();
  a.ctx = std::make_unique<EffectContext>(*a.lts);
  if (options.timings) r.timings_ms["partition"] = ms_since(t0);
  const auto& ctx = *a.ctx;
  r.system = counts_of(*a.lts);
  r.quotient = counts_of(ctx.quotient().lts);
  r.c_rate = c_rate(*a.lts, ctx.quotient());
  r.critical = critical_instructions(ctx);
  if (options.expected) {
    r.expected = options.expected;
    r.expected_match = tags_match_exactly(*options.expected, tags_of(r.critical));
  }

  t0 = Clock::now();
  a.races = effect_races(ctx);
  for (const auto& p : a.races) {
    RaceRow row{p.anchor, p.left, p.right, {}};
    for (const auto& [l1, l2] : p.instructions)
      row.instructions.emplace_back(ctx.system().label(l1).str(), ctx.system().label(l2).str());
    r.races.push_back(std::move(row));
  }
  r.instruction_races = instruction_races(ctx, a.races);
  r.non_transitive = non_transitive_witness(ctx, a.races);
  if (options.timings) r.timings_ms["races"] = ms_since(t0);

  if (options.lps && spec) {
    t0 = Clock::now();
    r.lps = detect_lps(ctx, a.races, *spec);
    r.lp_classes = classify_lps(ctx);
    if (options.timings) r.timings_ms["lps"] = ms_since(t0);
  }

  if (options.checks) {
    t0 = Clock::now();
    r.checks.push_back(check_identification_exists(ctx));
    r.checks.push_back(check_dichotomy(ctx));
    r.checks.push_back(check_races_internal(ctx, a.races));
    r.checks.push_back(check_critical_agreement(ctx, a.races));
    r.checks.push_back(check_structure_separation(ctx, a.races, options.samples));
    r.checks.push_back(check_intermediate_separation(ctx, a.races, options.samples / 2, options.seed));
    r.checks.push_back(check_quotient_paths(ctx));
    r.checks.push_back(check_history_coverage(ctx, a.races, options.pairing));
    if (options.timings) r.timings_ms["checks"] = ms_since(t0);
  }
  return a;
}

Analysis analyze_model(const ObjectModel& model, const ClientConfig& client, const AnalysisOptions& options,
                       const ExploreOptions& explore_options) {
  auto t0 = Clock::now();
  Lts lts = explore(model, client, explore_options);
  const double explore_ms = ms_since(t0);
  std::optional<SequentialSpec> spec;
  if (!model.spec.kind.empty()) spec = SequentialSpec::from_decl(model.spec);
  AnalysisOptions opts = options;
  if (!opts.expected && !model.critical.empty() && !model.client.empty() &&
      parse_client(model.client, model).str() == client.str())
    opts.expected = model.critical;
  auto a = analyze_lts(std::move(lts), model.name, client.str(), spec, opts);
  if (options.timings) a.report.timings_ms["explore"] = explore_ms;
  return a;
}

// ---------------------------------------------------------------- JSON

std::string render_json(const AnalysisReport& r) {
  using nlohmann::json;
  auto counts = [](const Counts& c) {
    return json{{"states", c.states}, {"transitions", c.transitions}, {"tau", c.tau}};
  };
  json j;
  j["schema"] = kReportSchema;
  j["model"] = r.model;
  j["client"] = r.client;
  j["system"] = counts(r.system);
  j["quotient"] = counts(r.quotient);
  j["c_rate"] = {{"numerator", r.c_rate.num}, {"denominator", r.c_rate.den}, {"percent", r.c_rate.percent()}};
  j["critical_instructions"] = json::object();
  for (const auto& [t, n] : r.critical) j["critical_instructions"][t] = n;
  if (r.expected) {
    j["expected_critical"] = *r.expected;
    j["expected_match"] = *r.expected_match;
  }
  j["races"] = json::array();
  for (const auto& row : r.races) {
    json ins = json::array();
    for (const auto& [a, b] : row.instructions) ins.push_back({a, b});
    j["races"].push_back({{"anchor", row.anchor}, {"left", row.left}, {"right", row.right}, {"instructions", ins}});
  }
  j["instruction_races"] = json::array();
  for (const auto& [p, n] : r.instruction_races)
    j["instruction_races"].push_back({{"pair", {p.first, p.second}}, {"anchors", n}});
  j["non_transitive"] = r.non_transitive ? json(*r.non_transitive) : json(nullptr);
  j["lps"] = json::array();
  for (const auto& lp : r.lps)
    j["lps"].push_back({{"instruction", lp.instruction},
                        {"step", lp.step},
                        {"operation", lp.operation.str()},
                        {"history", lp.history},
                        {"race", lp.race}});
  j["lp_classes"] = json::array();
  for (const auto& c : r.lp_classes)
    j["lp_classes"].push_back({{"method", c.method}, {"max_critical_steps", c.max_critical_steps}, {"fixed", c.fixed}});
  j["checks"] = json::array();
  for (const auto& c : r.checks)
    j["checks"].push_back({{"name", c.name},
                           {"passed", c.passed},
                           {"skipped", c.skipped},
                           {"checked", c.checked},
                           {"violations", c.violations},
                           {"witness", c.witness}});
  if (!r.timings_ms.empty()) j["timings_ms"] = r.timings_ms;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- table

std::string render_table(const AnalysisReport& r) {
  std::string out;
  auto line = [&out](const std::string& s) { out += s + "\n"; };
  line(fmt::format("model     {}", r.model));
  line(fmt::format("client    {}", r.client));
  line(fmt::format("{:10}{:>10}{:>13}{:>8}", "", "states", "transitions", "tau"));
  line(fmt::format("{:10}{:>10}{:>13}{:>8}", "system", r.system.states, r.system.transitions, r.system.tau));
  line(fmt::format("{:10}{:>10}{:>13}{:>8}", "quotient", r.quotient.states, r.quotient.transitions, r.quotient.tau));
  line(fmt::format("C-rate    {}/{} ({})", r.c_rate.num, r.c_rate.den, r.c_rate.percent()));
  std::string crit;
  for (const auto& [t, n] : r.critical) crit += fmt::format("{}{} {}", crit.empty() ? "" : ", ", t, n);
  line(fmt::format("critical  {}", crit.empty() ? "none" : crit));
  if (r.expected) {
    std::string e;
    for (const auto& t : *r.expected) e += (e.empty() ? "" : ", ") + t;
    line(fmt::format("expected  {} ({})", e, *r.expected_match ? "match" : "MISMATCH"));
  }
  std::set<ClassId> anchors;
  for (const auto& row : r.races) anchors.insert(row.anchor);
  line(fmt::format("races     {} at {} anchor classes", r.races.size(), anchors.size()));
  for (const auto& [p, n] : r.instruction_races) line(fmt::format("  {:<18} {:<18} {}", p.first, p.second, n));
  if (r.non_transitive) line("  non-transitive: " + *r.non_transitive);
  if (!r.lps.empty() || !r.lp_classes.empty()) {
    std::map<std::pair<std::string, std::string>, std::size_t> per;
    for (const auto& lp : r.lps) ++per[{lp.operation.method, lp.instruction}];
    line("LPs");
    for (const auto& [k, n] : per) line(fmt::format("  {:<10} {:<8} {}", k.first, k.second, n));
    for (const auto& c : r.lp_classes)
      line(fmt::format("  {:<10} {}, max critical steps per call {}", c.method, c.fixed ? "fixed" : "non-fixed",
                       c.max_critical_steps));
  }
  if (!r.checks.empty()) {
    line("checks");
    for (const auto& c : r.checks) {
      const char* verdict = c.skipped ? "skip" : c.passed ? "pass" : "FAIL";
      std::string s = fmt::format("  {:<26} {}  {} checked", c.name, verdict, c.checked);
      if (c.violations) s += fmt::format(", {} violations", c.violations);
      if (!c.witness.empty()) s += ": " + c.witness;
      line(s);
    }
  }
  for (const auto& [k, v] : r.timings_ms) line(fmt::format("time      {} {:.1f} ms", k, v));
  return out;
}

// ---------------------------------------------------------------- DOT

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string render_dot(const Analysis& a) {
  const auto& q = a.ctx->quotient();
  const auto& orig = *a.lts;
  std::string out = "digraph quotient {\n  rankdir=TB;\n  node [shape=circle, fontsize=10];\n";
  for (StateId c = 0; c < q.lts.num_states(); ++c)
    out += fmt::format("  c{} [label=\"{}\"{}];\n", c, c, c == q.lts.initial() ? ", shape=doublecircle" : "");
  for (std::size_t i = 0; i < q.lts.num_transitions(); ++i) {
    const auto& t = q.lts.transitions()[i];
    if (q.lts.internal(t.label)) {
      std::set<std::string> tags;
      for (auto w : q.witnesses[i]) tags.insert(orig.label(orig.transitions()[w].label).tag);
      std::string label;
      for (const auto& tg : tags) label += (label.empty() ? "" : " ") + tg;
      out += fmt::format("  c{} -> c{} [color=red, fontcolor=red, label=\"{}\"];\n", t.src, t.dst, dot_escape(label));
    } else {
      out += fmt::format("  c{} -> c{} [label=\"{}\"];\n", t.src, t.dst, dot_escape(q.lts.label(t.label).str()));
    }
  }
  out += "}\n";
  return out;
}

// ---------------------------------------------------------------- C-rate tables

CRateRow crate_row(const ObjectModel& model, const std::string& config, const ClientConfig& client,
                   const ExploreOptions& explore_options) {
  Lts lts = explore(model, client, explore_options);
  auto q = quotient(lts, branching_partition(lts));
  return {model.name, config, counts_of(lts), counts_of(q.lts), c_rate(lts, q), {}};
}

namespace {

std::string trend(const std::vector<CRateRow>& rows) {
  if (rows.size() < 2) return "single cell";
  for (const auto& r : rows)
    if (!r.error.empty() || !r.c_rate.defined()) return "incomplete";
  bool dec = true, inc = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    dec = dec && rows[i].c_rate < rows[i - 1].c_rate;
    inc = inc && rows[i - 1].c_rate < rows[i].c_rate;
  }
  return dec ? "strictly decreasing" : inc ? "strictly increasing" : "not monotone";
}

}  // namespace

std::string render_crate_table(const std::vector<CRateRow>& rows) {
  std::string out = fmt::format("{:<16}{:<8}{:>10}{:>10}{:>10}{:>10}{:>16}{:>8}\n", "model", "config", "states",
                                "tau", "q-states", "q-tau", "rate", "C-rate");
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].model == rows[i].model) ++j;
    for (std::size_t k = i; k < j; ++k) {
      const auto& r = rows[k];
      if (!r.error.empty()) {
        out += fmt::format("{:<16}{:<8}  {}\n", r.model, r.config, r.error);
        continue;
      }
      out += fmt::format("{:<16}{:<8}{:>10}{:>10}{:>10}{:>10}{:>16}{:>8}\n", r.model, r.config, r.system.states,
                         r.system.tau, r.quotient.states, r.quotient.tau,
                         fmt::format("{}/{}", r.c_rate.num, r.c_rate.den), r.c_rate.percent());
    }
    out += fmt::format("{:<16}trend: {}\n", "", trend({rows.begin() + i, rows.begin() + j}));
    i = j;
  }
  return out;
}

std::string render_crate_json(const std::vector<CRateRow>& rows) {
  using nlohmann::json;
  json j;
  j["schema"] = "effrace-crate/1";
  j["rows"] = json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"model", r.model},
                         {"config", r.config},
                         {"states", r.system.states},
                         {"tau", r.system.tau},
                         {"quotient_states", r.quotient.states},
                         {"quotient_tau", r.quotient.tau},
                         {"numerator", r.c_rate.num},
                         {"denominator", r.c_rate.den},
                         {"percent", r.c_rate.percent()},
                         {"error", r.error}});
  return j.dump(2) + "\n";
}

}  // namespace effrace
