#include <benchmark/benchmark.h>

#include "effrace/bisim.hpp"
#include "effrace/catalog.hpp"
#include "effrace/explore.hpp"
#include "effrace/ktrace.hpp"

using namespace effrace;

namespace {

const Lts& system_for(const std::string& model, int budget) {
  static std::map<std::pair<std::string, int>, Lts> cache;
  auto key = std::pair{model, budget};
  auto it = cache.find(key);
  if (it == cache.end()) {
    auto m = catalog_entry(model).model();
    it = cache.emplace(key, explore(m, most_general_client(m, 2, budget, {"a"}))).first;
  }
  return it->second;
}

void partition(benchmark::State& state, const std::string& model, BisimAlgorithm alg) {
  const auto& lts = system_for(model, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(branching_partition(lts, alg).num_classes());
  state.counters["states"] = static_cast<double>(lts.num_states());
}

void BM_MsSerial(benchmark::State& s) { partition(s, "ms-queue", BisimAlgorithm::Signature); }
void BM_MsParallel(benchmark::State& s) { partition(s, "ms-queue", BisimAlgorithm::SignatureParallel); }
void BM_MsSplitter(benchmark::State& s) { partition(s, "ms-queue", BisimAlgorithm::Splitter); }
void BM_HwSerial(benchmark::State& s) { partition(s, "hw-queue", BisimAlgorithm::Signature); }
void BM_HwParallel(benchmark::State& s) { partition(s, "hw-queue", BisimAlgorithm::SignatureParallel); }

void BM_OracleSerial(benchmark::State& s) {
  RandomLtsParams p;
  for (auto _ : s) benchmark::DoNotOptimize(oracle_agreement_serial(1, static_cast<std::size_t>(s.range(0)), p).size());
}
void BM_OracleParallel(benchmark::State& s) {
  RandomLtsParams p;
  for (auto _ : s) benchmark::DoNotOptimize(oracle_agreement(1, static_cast<std::size_t>(s.range(0)), p).size());
}

}  // namespace

BENCHMARK(BM_MsSerial)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MsParallel)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MsSplitter)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HwSerial)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HwParallel)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OracleSerial)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OracleParallel)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
