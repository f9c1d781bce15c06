#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "effrace/bisim.hpp"
#include "effrace/lts.hpp"

namespace effrace {

/// Raised when the oracle is asked to work on an input it refuses.
class OracleRefused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// State bound for the oracle. Default 64, overridden by the environment
/// variable EFFRACE_ORACLE_MAX_STATES.
std::size_t oracle_state_bound();

struct KTracePartition {
  std::size_t k = 0;
  Partition partition;
};

/// States grouped by their k-trace sets. The input must be acyclic (so
/// every trace set is finite) and within the oracle bound.
KTracePartition ktrace_partition(const Lts& lts, std::size_t k);

/// One refinement level: the partition at level k+1 from the one at level k.
Partition ktrace_step(const Lts& lts, const Partition& previous);

struct MaxTraceResult {
  Partition partition;
  std::size_t cap = 0;  // smallest k with equal partitions at k and k+1
};

MaxTraceResult max_trace_partition(const Lts& lts);

/// Parameters of the random DAG generator used for cross-validation.
struct RandomLtsParams {
  std::size_t states = 40;
  std::size_t visible_labels = 4;
  double tau_probability = 0.5;
  std::size_t max_out_degree = 2;
  std::size_t locality = 6;  // targets lie in i+1 .. i+locality
};

/// Random acyclic Lts with states numbered in topological order.
Lts random_dag(std::mt19937_64& rng, const RandomLtsParams& params);

struct OracleRun {
  std::uint64_t seed = 0;
  std::size_t states = 0;
  std::size_t classes = 0;
  std::size_t cap = 0;
  bool agree = false;
};

/// Runs `runs` independent comparisons of branching_partition against the
/// oracle. Run i uses seed `seed + i`. Runs are distributed over OpenMP
/// threads; the result order does not depend on the thread count.
std::vector<OracleRun> oracle_agreement(std::uint64_t seed, std::size_t runs, const RandomLtsParams& params,
                                        BisimAlgorithm algorithm = BisimAlgorithm::Signature);

/// Serial reference of oracle_agreement.
std::vector<OracleRun> oracle_agreement_serial(std::uint64_t seed, std::size_t runs, const RandomLtsParams& params,
                                               BisimAlgorithm algorithm = BisimAlgorithm::Signature);

}  // namespace effrace
