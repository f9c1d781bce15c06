#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "effrace/effect.hpp"
#include "effrace/explore.hpp"
#include "effrace/lts.hpp"
#include "effrace/seqspec.hpp"

namespace effrace {

inline constexpr const char* kReportSchema = "effrace-report/1";

struct AnalysisOptions {
  bool checks = true;             // run the property checks
  bool lps = true;                // linearization points (needs a sequential spec)
  std::size_t samples = 200;      // critical steps sampled by the separation checks, 0: all
  std::uint64_t seed = 1;         // for the intermediate-system check
  HistoryPairing pairing = HistoryPairing::Interleaving;
  bool timings = false;           // wall-clock timings make reports differ across runs
  std::optional<std::vector<std::string>> expected;  // expected critical tag patterns
};

struct Counts {
  std::size_t states = 0;
  std::size_t transitions = 0;
  std::size_t tau = 0;
};

struct RaceRow {
  ClassId anchor = 0, left = 0, right = 0;
  std::vector<std::pair<std::string, std::string>> instructions;
};

struct AnalysisReport {
  std::string model;
  std::string client;
  Counts system;
  Counts quotient;
  Rational c_rate;
  std::map<std::string, std::size_t> critical;      // tag -> critical steps
  std::optional<std::vector<std::string>> expected;
  std::optional<bool> expected_match;
  std::vector<RaceRow> races;
  std::map<std::pair<std::string, std::string>, std::size_t> instruction_races;
  std::optional<std::string> non_transitive;
  std::vector<LpAttribution> lps;
  std::vector<LpClass> lp_classes;
  std::vector<CheckResult> checks;
  std::map<std::string, double> timings_ms;          // empty unless requested
};

/// The explored system together with its analyses. The context refers to
/// `lts`, so both live on the heap.
struct Analysis {
  std::unique_ptr<Lts> lts;
  std::unique_ptr<EffectContext> ctx;
  std::vector<RacePair> races;
  AnalysisReport report;
};

/// Runs the full pipeline on an existing Lts. `spec` enables LP detection.
Analysis analyze_lts(Lts lts, const std::string& name, const std::string& client,
                     const std::optional<SequentialSpec>& spec, const AnalysisOptions& options);

/// Explores `model` under `client` and analyzes the result.
Analysis analyze_model(const ObjectModel& model, const ClientConfig& client, const AnalysisOptions& options,
                       const ExploreOptions& explore_options = {});

/// Versioned JSON document, stable key order, two-space indentation.
std::string render_json(const AnalysisReport& report);
/// Human-readable summary.
std::string render_table(const AnalysisReport& report);
/// Quotient as a graph: classes as nodes, critical internal edges in red,
/// visible edges labeled with their action.
std::string render_dot(const Analysis& analysis);

/// One row of a C-rate table.
struct CRateRow {
  std::string model;
  std::string config;
  Counts system;
  Counts quotient;
  Rational c_rate;
  std::string error;  // set when the cell could not be computed
};

CRateRow crate_row(const ObjectModel& model, const std::string& config, const ClientConfig& client,
                   const ExploreOptions& explore_options = {});
/// Rows of one model are annotated with their trend along the table order.
std::string render_crate_table(const std::vector<CRateRow>& rows);
std::string render_crate_json(const std::vector<CRateRow>& rows);

}  // namespace effrace
