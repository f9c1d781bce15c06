#include <CLI11.hpp>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "effrace/aut_io.hpp"
#include "effrace/bisim.hpp"
#include "effrace/catalog.hpp"
#include "effrace/explore.hpp"
#include "effrace/ktrace.hpp"
#include "effrace/report.hpp"

namespace fs = std::filesystem;
using namespace effrace;

namespace {

/// Error raised inside a named pipeline stage.
struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error(fmt::format("{}: {}", stage, what)) {}
};

template <class F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", p.string()));
  out << text;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

/// Options that select a model and a client.
struct ModelArgs {
  std::string model_ref;
  std::string model_file;
  std::string ops;
  std::string mgc;
  std::string domain;
  int threads = 0;
  int budget = 0;
  std::size_t step_bound = ExploreOptions{}.step_bound;

  void add(CLI::App* app, bool positional = true) {
    if (positional) app->add_option("model-ref", model_ref, "catalog name or path to a model file");
    app->add_option("--model", model_file, "model file (instead of a catalog name)");
    app->add_option("--ops", ops, "client: t1:Enq(a),t2:Deq,... or mgc:B,domain=a,b");
    app->add_option("--mgc", mgc, "most general client KxB: K threads, budget B");
    app->add_option("--domain", domain, "argument domain for --mgc, comma separated");
    app->add_option("--threads", threads, "thread count (checked against --ops)");
    app->add_option("--budget", budget, "operation budget of every thread");
    app->add_option("--step-bound", step_bound, "maximum number of explored states");
  }

  ObjectModel model() const {
    if (!model_file.empty()) return parse_model(read_file(model_file), fs::path(model_file).stem().string());
    if (model_ref.empty()) throw std::invalid_argument("no model given");
    if (fs::exists(model_ref) && fs::is_regular_file(model_ref))
      return parse_model(read_file(model_ref), fs::path(model_ref).stem().string());
    return catalog_entry(model_ref).model();
  }

  /// Argument values of the model's default client.
  static std::vector<std::string> default_domain(const ObjectModel& m) {
    std::set<std::string> vals;
    if (!m.client.empty())
      for (const auto& t : parse_client(m.client, m).threads)
        for (const auto& op : t.allowed)
          for (const auto& a : op.args)
            for (const auto& v : split(a, ',')) vals.insert(v);
    return {vals.begin(), vals.end()};
  }

  ClientConfig client(const ObjectModel& m) const {
    std::optional<int> t;
    if (threads > 0) t = threads;
    ClientConfig c;
    if (!ops.empty()) {
      c = parse_client(ops, m, t);
    } else if (!mgc.empty()) {
      auto parts = split(mgc, 'x');
      if (parts.size() != 2) throw std::invalid_argument(fmt::format("--mgc expects KxB, got '{}'", mgc));
      auto dom = domain.empty() ? default_domain(m) : split(domain, ',');
      c = most_general_client(m, std::stoi(parts[0]), std::stoi(parts[1]), dom);
    } else {
      if (m.client.empty()) throw std::invalid_argument("model has no default client; pass --ops or --mgc");
      c = parse_client(m.client, m, t);
    }
    if (budget > 0)
      for (auto& th : c.threads) th.budget = budget;
    return c;
  }

  ExploreOptions explore_options() const {
    ExploreOptions o;
    o.step_bound = step_bound;
    return o;
  }
};

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  return out;
}

int cmd_analyze(const ModelArgs& args, const std::vector<std::string>& emit, const std::string& out_dir,
                const AnalysisOptions& opts) {
  auto model = stage("parse", [&] { return args.model(); });
  auto client = stage("client", [&] { return args.client(model); });
  auto lts = stage("explore", [&] { return explore(model, client, args.explore_options()); });
  std::optional<SequentialSpec> spec;
  if (!model.spec.kind.empty()) spec = stage("spec", [&] { return SequentialSpec::from_decl(model.spec); });
  AnalysisOptions o = opts;
  if (!o.expected && !model.critical.empty() && !model.client.empty() &&
      parse_client(model.client, model).str() == client.str())
    o.expected = model.critical;
  auto a = stage("analysis", [&] { return analyze_lts(std::move(lts), model.name, client.str(), spec, o); });

  std::set<std::string> kinds(emit.begin(), emit.end());
  if (kinds.empty()) kinds.insert("table");
  std::vector<std::pair<std::string, std::string>> files;  // (suffix, content)
  for (const auto& k : kinds) {
    if (k == "table") files.emplace_back(".txt", render_table(a.report));
    else if (k == "json") files.emplace_back(".json", render_json(a.report));
    else if (k == "dot") files.emplace_back(".dot", render_dot(a));
    else if (k == "aut") {
      files.emplace_back(".aut", to_aut(*a.lts, AutMode::Annotated));
      files.emplace_back(".quotient.aut", to_aut(a.ctx->quotient().lts, AutMode::Annotated));
    } else {
      throw StageError("emit", fmt::format("unknown format '{}' (json, dot, aut, table)", k));
    }
  }
  stage("emit", [&] {
    if (out_dir.empty()) {
      for (const auto& [suffix, text] : files) std::cout << text;
    } else {
      fs::create_directories(out_dir);
      for (const auto& [suffix, text] : files) write_file(fs::path(out_dir) / (slug(model.name) + suffix), text);
    }
    return 0;
  });
  bool ok = !a.report.expected_match || *a.report.expected_match;
  for (const auto& c : a.report.checks) ok = ok && c.passed;
  return ok ? 0 : 3;
}

int cmd_crate(const std::vector<std::string>& models, const std::string& grid, const std::string& domain,
              std::size_t step_bound, const std::string& emit, const std::string& out_dir) {
  std::vector<CRateRow> rows;
  ExploreOptions eo;
  eo.step_bound = step_bound;
  for (const auto& name : models) {
    ModelArgs ma;
    ma.model_ref = name;
    ma.domain = domain;
    auto model = stage("parse", [&] { return ma.model(); });
    for (const auto& cell : split(grid, ',')) {
      ma.mgc = cell;
      try {
        rows.push_back(crate_row(model, cell, ma.client(model), eo));
      } catch (const std::exception& e) {
        CRateRow r;
        r.model = model.name;
        r.config = cell;
        r.error = e.what();
        rows.push_back(r);
      }
    }
  }
  std::string text = emit == "json" ? render_crate_json(rows) : render_crate_table(rows);
  if (out_dir.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / (emit == "json" ? "crate.json" : "crate.txt"), text);
  }
  for (const auto& r : rows)
    if (!r.error.empty()) return 3;
  return 0;
}

int cmd_oracle(std::size_t states, std::size_t labels, std::uint64_t seed, std::size_t runs, bool serial) {
  RandomLtsParams p;
  p.states = states;
  p.visible_labels = labels;
  if (states > oracle_state_bound())
    throw StageError("oracle", fmt::format("{} states exceed the oracle bound {} (EFFRACE_ORACLE_MAX_STATES)", states,
                                           oracle_state_bound()));
  auto res = serial ? oracle_agreement_serial(seed, runs, p) : oracle_agreement(seed, runs, p);
  std::size_t passed = 0;
  for (const auto& r : res) {
    std::cout << fmt::format("seed {} states {} classes {} cap {} {}\n", r.seed, r.states, r.classes, r.cap,
                             r.agree ? "pass" : "FAIL");
    passed += r.agree;
  }
  std::cout << fmt::format("{}/{} runs agree\n", passed, res.size());
  return passed == res.size() ? 0 : 3;
}

int cmd_import(const std::string& path, bool minimize, const std::string& mode, const std::string& out) {
  auto lts = stage("import", [&] { return from_aut(read_file(path)); });
  auto p = stage("partition", [&] { return branching_partition(lts); });
  std::cout << fmt::format("states {} transitions {} tau {} classes {}\n", lts.num_states(), lts.num_transitions(),
                           lts.num_internal_transitions(), p.num_classes());
  if (minimize) {
    auto q = quotient(lts, p);
    auto text = to_aut(q.lts, mode == "abstract" ? AutMode::Abstract : AutMode::Annotated);
    if (out.empty()) std::cout << text;
    else write_file(out, text);
  }
  return 0;
}

int cmd_export(const ModelArgs& args, bool use_quotient, const std::string& mode, const std::string& out) {
  auto model = stage("parse", [&] { return args.model(); });
  auto client = stage("client", [&] { return args.client(model); });
  auto lts = stage("explore", [&] { return explore(model, client, args.explore_options()); });
  auto m = mode == "abstract" ? AutMode::Abstract : AutMode::Annotated;
  std::string text;
  if (use_quotient) {
    auto q = stage("partition", [&] { return quotient(lts, branching_partition(lts)); });
    text = to_aut(q.lts, m);
  } else {
    text = to_aut(lts, m);
  }
  if (out.empty()) std::cout << text;
  else stage("emit", [&] { write_file(out, text); return 0; });
  return 0;
}

int cmd_list() {
  for (const auto& e : catalog()) {
    auto m = e.model();
    std::string crit;
    for (const auto& c : m.critical) crit += (crit.empty() ? "" : ", ") + c;
    std::cout << fmt::format("{:<16} client {:<40} critical {}\n", e.name, m.client, crit);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"effrace: effect races and critical steps of concurrent objects"};
  app.require_subcommand(1);

  ModelArgs analyze_args;
  std::vector<std::string> emit;
  std::string out_dir;
  AnalysisOptions opts;
  bool no_checks = false;
  std::string pairing = "interleaving";
  auto* analyze = app.add_subcommand("analyze", "explore, partition and analyze one instance");
  analyze_args.add(analyze);
  analyze->add_option("--emit", emit, "json, dot, aut, table (repeatable)")->delimiter(',');
  analyze->add_option("--out", out_dir, "write files here instead of stdout");
  analyze->add_option("--seed", opts.seed, "seed of the sampled checks");
  analyze->add_option("--samples", opts.samples, "critical steps sampled by separation checks, 0: all");
  analyze->add_option("--pairing", pairing, "history grouping of the coverage check")
      ->check(CLI::IsMember({"interleaving", "calls"}));
  analyze->add_flag("--no-checks", no_checks, "skip the property checks");
  analyze->add_flag("--timings", opts.timings, "include wall-clock timings");

  std::vector<std::string> crate_models{"ms-queue", "hw-queue"};
  std::string grid = "2x2,2x3,2x4,2x5";
  std::string crate_domain;
  std::size_t crate_bound = ExploreOptions{}.step_bound;
  std::string crate_emit = "table";
  std::string crate_out;
  auto* crate = app.add_subcommand("crate-table", "C-rates over a grid of most general clients");
  crate->add_option("models", crate_models, "catalog names");
  crate->add_option("--grid", grid, "cells KxB, comma separated");
  crate->add_option("--domain", crate_domain, "argument domain, comma separated");
  crate->add_option("--step-bound", crate_bound, "maximum number of explored states per cell");
  crate->add_option("--emit", crate_emit, "table or json")->check(CLI::IsMember({"table", "json"}));
  crate->add_option("--out", crate_out, "write the table here instead of stdout");

  std::size_t o_states = 40, o_labels = 4, o_runs = 500;
  std::uint64_t o_seed = 1;
  bool o_serial = false;
  auto* oracle = app.add_subcommand("oracle", "compare the partition against the k-trace oracle on random DAGs");
  oracle->add_option("--states", o_states, "states per random system");
  oracle->add_option("--labels", o_labels, "visible labels");
  oracle->add_option("--seed", o_seed, "seed of the first run");
  oracle->add_option("--runs", o_runs, "number of systems");
  oracle->add_flag("--serial", o_serial, "single-threaded reference");

  std::string imp_path, imp_mode = "annotated", imp_out;
  bool imp_min = false;
  auto* imp = app.add_subcommand("import-aut", "read an .aut file and partition it");
  imp->add_option("path", imp_path, ".aut file")->required();
  imp->add_flag("--minimize", imp_min, "print the quotient as .aut");
  imp->add_option("--mode", imp_mode, "abstract or annotated")->check(CLI::IsMember({"abstract", "annotated"}));
  imp->add_option("--out", imp_out, "output file for --minimize");

  ModelArgs exp_args;
  std::string exp_mode = "annotated", exp_out;
  bool exp_quotient = false;
  auto* exp = app.add_subcommand("export-aut", "write the explored system (or its quotient) as .aut");
  exp_args.add(exp);
  exp->add_option("--mode", exp_mode, "abstract or annotated")->check(CLI::IsMember({"abstract", "annotated"}));
  exp->add_flag("--quotient", exp_quotient, "export the quotient");
  exp->add_option("--out", exp_out, "output file");

  auto* list = app.add_subcommand("list-models", "shipped models");

  CLI11_PARSE(app, argc, argv);
  try {
    if (analyze->parsed()) {
      opts.checks = !no_checks;
      opts.pairing = pairing == "calls" ? HistoryPairing::CallMultiset : HistoryPairing::Interleaving;
      return cmd_analyze(analyze_args, emit, out_dir, opts);
    }
    if (crate->parsed()) return cmd_crate(crate_models, grid, crate_domain, crate_bound, crate_emit, crate_out);
    if (oracle->parsed()) return cmd_oracle(o_states, o_labels, o_seed, o_runs, o_serial);
    if (imp->parsed()) return cmd_import(imp_path, imp_min, imp_mode, imp_out);
    if (exp->parsed()) return cmd_export(exp_args, exp_quotient, exp_mode, exp_out);
    if (list->parsed()) return cmd_list();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
